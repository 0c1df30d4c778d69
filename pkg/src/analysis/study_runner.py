"""
Study runner
Replicated simulation studies and the train/test select workflow on real
input files.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from ..config.config_manager import RunConfig
from ..errors import ConfigError, EvalueError
from ..exports.csv_exporter import (
    AGGREGATE_FILE, DISTRIBUTIONS_FILE, PE_TRACE_FILE, REPLICATIONS_FILE, REPORT_FILE, CSVExporter,
)
from ..models.family_data import Dataset
from ..parsers.family_csv_parser import FamilyCSVParser
from ..simulation.genotype_simulator import Metrics, replicate_streams, score_selection, simulate_dataset
from .baselines import benjamini_hochberg, mbic2_backward, single_snp_gls_pvalues
from .evaluation import EvaluationKind
from .lmm import fit_ace
from .selector import (
    PredictionErrorCache, build_grid_ensembles, choose_winner, choose_winners_per_t, evaluate_grid,
    evaluate_mean_grid, select_over_grid,
)

logger = logging.getLogger(__name__)

SUMMARY_FILE = "run_summary.yaml"

TRAIN_STREAM = 0
TEST_STREAM = 1
ENSEMBLE_SEED_STREAM = 2
# simulate draws from key (0,) and replications from (h_index, replication, stream);
# the select split is the only two-word key
SPLIT_KEY = (1, 0)

FAILURES = (EvalueError, ArithmeticError, np.linalg.LinAlgError, ValueError)


def _replication_seed(seed: int, h_index: int, replication: int) -> int:
    """Ensemble seed for one replication"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(h_index, replication, ENSEMBLE_SEED_STREAM))
    return int(sequence.generate_state(1)[0])


def _row(method: str, kind: str, t: float, h: float, replication: int, selected: Optional[Sequence[int]] = None,
         metrics: Optional[Metrics] = None, winning_s: float = math.nan, error: str = "") -> Dict[str, Any]:
    row = {
        "method": method, "kind": kind, "t": t, "h": h, "replication": replication,
        "status": "failed" if error else "ok", "error": error,
        "n_selected": len(selected) if selected is not None else math.nan,
        "tp": math.nan, "tn": math.nan, "rtp": math.nan, "rtn": math.nan,
        "winning_s": winning_s,
    }
    if metrics is not None:
        row.update({
            "tp": math.nan if metrics.tp is None else metrics.tp,
            "tn": metrics.tn,
            "rtp": math.nan if metrics.rtp is None else metrics.rtp,
            "rtn": metrics.rtn,
        })
    return row


def _describe(error: Exception) -> str:
    return f"{type(error).__name__}: {error}"


def run_replication(config: RunConfig, h_index: int, h: float, replication: int) -> List[Dict[str, Any]]:
    """All methods on one simulated train/test pair; failures become rows"""
    sim = config.sim_config(h)
    blocks = sim.blocks
    rows: List[Dict[str, Any]] = []

    train, truth = simulate_dataset(sim, replicate_streams(config.seed, h_index, replication, TRAIN_STREAM))
    test, _ = simulate_dataset(sim, replicate_streams(config.seed, h_index, replication, TEST_STREAM))
    ensemble_seed = _replication_seed(config.seed, h_index, replication)

    try:
        fit = fit_ace(train)
        fit_error = ""
    except FAILURES as e:
        fit, fit_error = None, _describe(e)

    for kind in config.kinds:
        selection = config.selection_config(kind)
        selection.seed = ensemble_seed
        selection.max_workers = 1
        try:
            if fit is None:
                raise RuntimeError(fit_error)
            ensembles = build_grid_ensembles(fit, train, selection)
            prediction_error = PredictionErrorCache(fit, train, test)
            points, _ = evaluate_grid(ensembles, selection, prediction_error, kind)
            for t, winner in sorted(choose_winners_per_t(points).items()):
                rows.append(_row("evalue", kind.value, t, h, replication, winner.selected,
                                 score_selection(winner.selected, truth, blocks), winner.s))
            if config.selection.mean_evalue:
                winner = choose_winner(evaluate_mean_grid(ensembles, kind, prediction_error))
                rows.append(_row("evalue-mean", kind.value, math.nan, h, replication, winner.selected,
                                 score_selection(winner.selected, truth, blocks), winner.s))
        except (RuntimeError,) + FAILURES as e:
            logger.warning(f"h={h} replication {replication}: {kind.value} selection failed ({e})")
            for t in selection.t_values:
                rows.append(_row("evalue", kind.value, t, h, replication, error=_describe(e)))
            if config.selection.mean_evalue:
                rows.append(_row("evalue-mean", kind.value, math.nan, h, replication, error=_describe(e)))

    if config.baselines.rfgls_bh:
        try:
            selected = benjamini_hochberg(single_snp_gls_pvalues(train), config.baselines.fdr_level)
            rows.append(_row("rfgls-bh", "", math.nan, h, replication, selected,
                             score_selection(selected, truth, blocks)))
        except FAILURES as e:
            rows.append(_row("rfgls-bh", "", math.nan, h, replication, error=_describe(e)))

    if config.baselines.mbic2:
        try:
            selected = mbic2_backward(train, config.baselines.mbic2_penalty_constant)
            rows.append(_row("mbic2", "", math.nan, h, replication, selected,
                             score_selection(selected, truth, blocks)))
        except FAILURES as e:
            rows.append(_row("mbic2", "", math.nan, h, replication, error=_describe(e)))

    return rows


def _run_job(job: Tuple[RunConfig, int, float, int]) -> List[Dict[str, Any]]:
    return run_replication(*job)


def aggregate_replications(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean metrics per method, kind, t and h over successful replications"""
    keys = ["method", "kind", "t", "h"]
    records = []
    for key, group in frame.groupby(keys, sort=False, dropna=False):
        ok = group[group["status"] == "ok"]
        record = dict(zip(keys, key))
        record["n_replications"] = len(group)
        record["n_failed"] = int((group["status"] != "ok").sum())
        for metric in ("tp", "tn", "rtp", "rtn"):
            record[metric] = ok[metric].mean() if len(ok) else math.nan
        records.append(record)
    return pd.DataFrame.from_records(records)


class StudyRunner:
    """Runs the study and select workflows and writes their artifacts"""

    def __init__(self, config: RunConfig, out_dir: Optional[Path] = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.out_dir = Path(out_dir or config.output.out_dir)
        self.exporter = CSVExporter()

    def run_study(self) -> Dict[str, Path]:
        """Replications over the heritability list; one row per method, threshold and replication"""
        config = self.config
        jobs = [
            (config, h_index, float(h), replication)
            for h_index, h in enumerate(config.study.h_list)
            for replication in range(config.study.replications)
        ]
        self.logger.info(
            f"Running {len(jobs)} replications ({len(config.study.h_list)} values of h) "
            f"with {config.output.max_workers} workers"
        )

        rows: List[Dict[str, Any]] = []
        if config.output.max_workers > 1:
            with ProcessPoolExecutor(max_workers=config.output.max_workers) as pool:
                for job_rows in pool.map(_run_job, jobs):
                    rows.extend(job_rows)
        else:
            for index, job in enumerate(jobs, 1):
                rows.extend(_run_job(job))
                self.logger.info(f"Replication {index}/{len(jobs)} finished (h={job[2]})")

        frame = pd.DataFrame.from_records(rows)
        failed = int((frame["status"] != "ok").sum())
        if failed:
            self.logger.warning(f"{failed} method runs failed; see the error column of {REPLICATIONS_FILE}")

        self.out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"replications": self.out_dir / REPLICATIONS_FILE, "aggregate": self.out_dir / AGGREGATE_FILE}
        self.exporter.export_replications(frame, paths["replications"])
        self.exporter.export_aggregate(aggregate_replications(frame), paths["aggregate"])
        return paths

    def split_families(self, dataset: Dataset) -> Tuple[Dataset, Dataset]:
        """Seeded unstratified split by family at the configured fraction"""
        m = dataset.n_families
        if m < 2:
            raise ConfigError(f"Need at least two families to split into train and test, got {m}")
        n_train = min(max(int(round(self.config.selection.split_fraction * m)), 1), m - 1)
        order = replicate_streams(self.config.seed, *SPLIT_KEY).permutation(m)
        train = dataset.subset_families(sorted(order[:n_train].tolist()))
        test = dataset.subset_families(sorted(order[n_train:].tolist()))
        self.logger.info(f"Split {m} families into {train.n_families} train / {test.n_families} test")
        return train, test

    def run_select(self, pedigree: Path, phenotype: Path, genotype: Path, covariates: Optional[Path] = None,
                   snp_info: Optional[Path] = None, dump_distributions: bool = False) -> Dict[str, Path]:
        config = self.config
        dataset = FamilyCSVParser().parse_files(pedigree, phenotype, genotype, covariates, snp_info)
        train, test = self.split_families(dataset)

        kind = config.kinds[0]
        if len(config.kinds) > 1:
            self.logger.warning(f"select uses one evaluation map; running {kind.value}")
        result = select_over_grid(train, test, config.selection_config(kind))

        baseline_flags: Dict[str, List[int]] = {}
        if config.baselines.rfgls_bh:
            pvalues = single_snp_gls_pvalues(dataset)
            baseline_flags["rfgls_bh"] = benjamini_hochberg(pvalues, config.baselines.fdr_level)
        if config.baselines.mbic2:
            baseline_flags["mbic2"] = mbic2_backward(dataset, config.baselines.mbic2_penalty_constant)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": self.out_dir / REPORT_FILE,
            "pe_trace": self.out_dir / PE_TRACE_FILE,
            "summary": self.out_dir / SUMMARY_FILE,
        }
        self.exporter.export_selection_report(result, dataset, paths["report"], baseline_flags)
        self.exporter.export_pe_trace(result, paths["pe_trace"])
        self._write_summary(result, dataset, train, test, kind, paths["summary"])
        if dump_distributions or config.output.dump_distributions:
            paths["distributions"] = self.out_dir / DISTRIBUTIONS_FILE
            self.exporter.export_distributions(result.reports, dataset.snp_ids, paths["distributions"])

        self.logger.info(f"Selected {len(result.selected)} SNPs: "
                         f"{', '.join(dataset.snp_ids[j] for j in result.selected) or 'none'}")
        return paths

    def _write_summary(self, result, dataset: Dataset, train: Dataset, test: Dataset,
                       kind: EvaluationKind, path: Path):
        fit = result.fit
        report = result.per_predictor_evalues
        summary = {
            "kind": kind.value,
            "seed": self.config.seed,
            "n_families": {"train": train.n_families, "test": test.n_families},
            "winning_s": float(result.winning_s),
            "winning_t": float(result.winning_t),
            "thresholds": {float(q): report.threshold(q, result.winning_t) for q in report.q_list},
            "selected": [dataset.snp_ids[j] for j in result.selected],
            "variance_components": {
                "sigma_a2": float(fit.vc.sigma_a2),
                "sigma_c2": float(fit.vc.sigma_c2),
                "sigma_e2": float(fit.vc.sigma_e2),
            },
            "heritability": float(fit.heritability),
            "log_likelihood": float(fit.log_likelihood),
            "converged": bool(fit.converged),
        }
        with open(path, "w") as f:
            yaml.safe_dump(summary, f, default_flow_style=False, sort_keys=True)
