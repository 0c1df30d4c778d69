"""
CSV export for datasets, selection reports and study tables
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import DataValidationError
from ..models.family_data import Dataset, Role
from ..simulation.genotype_simulator import BlockSpec, TruthSpec

DATASET_FILES = {
    "pedigree": "pedigree.csv",
    "phenotype": "phenotype.csv",
    "genotype": "genotype.csv",
    "covariates": "covariates.csv",
    "snp_info": "snp_info.csv",
}
REPORT_FILE = "selection_report.csv"
PE_TRACE_FILE = "pe_trace.csv"
DISTRIBUTIONS_FILE = "distributions.csv"
REPLICATIONS_FILE = "replications.csv"
AGGREGATE_FILE = "aggregate.csv"
TRUTH_FILE = "truth.csv"

REPLICATION_COLUMNS = ["method", "kind", "t", "h", "replication", "status", "error",
                       "n_selected", "tp", "tn", "rtp", "rtn", "winning_s"]
AGGREGATE_COLUMNS = ["method", "kind", "t", "h", "n_replications", "n_failed", "tp", "tn", "rtp", "rtn"]
DISTRIBUTION_COLUMNS = ["s", "distribution", "score"]
REPORT_KEY_COLUMNS = ["snp_id", "position", "selected"]


def _number(value: float) -> str:
    # repr round-trips exactly through float()
    return repr(float(value))


def _genotype(value: float) -> str:
    return str(int(value))


class CSVExporter:
    """Writes every tabular artifact of the tool"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def _write_rows(self, path: Path, header: Sequence[str], rows):
        with open(path, "w", newline="", encoding="utf-8") as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        self.logger.debug(f"Wrote {path}")

    def export_dataset(self, dataset: Dataset, out_dir: Path) -> Dict[str, Path]:
        """Pedigree, phenotype, genotype, covariate and SNP-info files"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {name: out_dir / filename for name, filename in DATASET_FILES.items()}

        pedigree_rows, phenotype_rows, genotype_rows, covariate_rows = [], [], [], []
        for family in dataset.families:
            spec = family.pedigree
            for index, member in enumerate(spec.members):
                key = [spec.family_id, member.member_id]
                child_type = spec.child_type_of(member).value if member.role == Role.CHILD else ""
                pedigree_rows.append(key + [member.role.value, child_type])
                phenotype_rows.append(key + [_number(family.phenotype[index])])
                genotype_rows.append(key + [_genotype(v) for v in family.genotypes[index]])
                covariate_rows.append(key + [_number(v) for v in family.covariates[index]])

        self._write_rows(paths["pedigree"], ["family_id", "member_id", "role", "child_type"], pedigree_rows)
        self._write_rows(paths["phenotype"], ["family_id", "member_id", "value"], phenotype_rows)
        self._write_rows(paths["genotype"], ["family_id", "member_id"] + list(dataset.snp_ids), genotype_rows)

        if dataset.n_covariates:
            self._write_rows(paths["covariates"], ["family_id", "member_id"] + list(dataset.covariate_ids),
                             covariate_rows)
        else:
            del paths["covariates"]

        positions = dataset.snp_positions or [str(j + 1) for j in range(dataset.n_snps)]
        self._write_rows(paths["snp_info"], ["snp_id", "position"], zip(dataset.snp_ids, positions))

        self.logger.info(f"Wrote dataset with {dataset.n_families} families to {out_dir}")
        return paths

    def export_truth(self, truth: TruthSpec, blocks: BlockSpec, snp_ids: Sequence[str], path: Path):
        causal = set(truth.causal_indices)
        block_of = blocks.block_of()
        rows = [
            [snp_id, int(block_of[j]) + 1, int(j in causal), _number(truth.beta[j])]
            for j, snp_id in enumerate(snp_ids)
        ]
        self._write_rows(path, ["snp_id", "block", "causal", "beta"], rows)

    def export_selection_report(self, result, dataset: Dataset, path: Path,
                                baseline_flags: Optional[Dict[str, Sequence[int]]] = None):
        """One row per SNP: e-values at the winning s, flags and association sign"""
        report = result.per_predictor_evalues
        selected = set(result.selected)
        baseline_flags = baseline_flags or {}
        positions = dataset.snp_positions or [""] * dataset.n_snps
        coefficients = result.fit.snp_coefficients if result.fit is not None else np.zeros(dataset.n_snps)

        header = ["snp_id", "position"]
        header += [f"evalue_q{q:g}" for q in report.q_list]
        header += ["selected", "association"]
        header += [f"{name}_selected" for name in baseline_flags]

        rows = []
        for j, snp_id in enumerate(dataset.snp_ids):
            row = [snp_id, positions[j]]
            row += [_number(v) for v in report.dropone_quantiles[j]]
            row += [int(j in selected), "+" if coefficients[j] >= 0 else "-"]
            row += [int(j in set(flags)) for flags in baseline_flags.values()]
            rows.append(row)
        self._write_rows(path, header, rows)

    def export_pe_trace(self, result, path: Path):
        rows = [
            [_number(s), _number(t), _number(pe), result.set_sizes.get((s, t), ""),
             int(s == result.winning_s and t == result.winning_t)]
            for (s, t), pe in sorted(result.pe_trace.items())
        ]
        self._write_rows(path, ["s", "t", "pe", "n_selected", "winner"], rows)

    def export_distributions(self, reports: Dict[float, "object"], snp_ids: Sequence[str], path: Path):
        """Long format: s, distribution, draw, score"""
        rows = []
        for s in sorted(reports):
            report = reports[s]
            rows.extend([_number(s), "full", r, _number(v)] for r, v in enumerate(report.full_scores))
            for j, snp_id in enumerate(snp_ids):
                rows.extend([_number(s), snp_id, r, _number(v)] for r, v in enumerate(report.dropone_scores[:, j]))
        self._write_rows(path, ["s", "distribution", "draw", "score"], rows)
        self.logger.info(f"Wrote evaluation distributions for {len(reports)} values of s to {path}")

    def export_replications(self, frame: pd.DataFrame, path: Path):
        frame.reindex(columns=REPLICATION_COLUMNS).to_csv(path, index=False, float_format="%.10g",
                                                           lineterminator="\n")

    def export_aggregate(self, frame: pd.DataFrame, path: Path):
        frame.reindex(columns=AGGREGATE_COLUMNS).to_csv(path, index=False, float_format="%.6f",
                                                         lineterminator="\n")
        self.logger.info(f"Wrote aggregate table ({len(frame)} rows) to {path}")


def _read_run_table(path: Path, required: Sequence[str], **read_options) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, **read_options)
    except (ValueError, pd.errors.EmptyDataError) as e:
        raise DataValidationError(f"Could not parse CSV ({e})", file=str(path))
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise DataValidationError(f"Missing required columns {missing}", file=str(path), line=1)
    return frame


def load_distributions(path: Path) -> pd.DataFrame:
    frame = _read_run_table(path, DISTRIBUTION_COLUMNS, dtype={"distribution": str})
    if not pd.api.types.is_numeric_dtype(frame["s"]) or not pd.api.types.is_numeric_dtype(frame["score"]):
        raise DataValidationError("Columns s and score must be numeric", file=str(path))
    return frame


def load_selection_report(path: Path) -> pd.DataFrame:
    frame = _read_run_table(path, REPORT_KEY_COLUMNS, dtype={"snp_id": str, "position": str}, keep_default_na=False)
    if not evalue_columns(frame):
        raise DataValidationError("Selection report has no evalue_q columns", file=str(path), line=1)
    return frame


def evalue_columns(frame: pd.DataFrame) -> List[str]:
    return [column for column in frame.columns if column.startswith("evalue_q")]
