"""
E-value selection engine
Full-model and drop-one evaluation distributions, quantile thresholds with
q-intersection, and the (s, t) grid search on held-out prediction error.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from ..models.family_data import Dataset
from .bootstrap import BootstrapEnsemble, ResamplingConfig, build_ensemble
from .evaluation import EvalDistribution, EvaluationKind, empirical_quantile, score_squared_norms, standardize
from .lmm import FitOptions, FittedAceModel, fit_ace, fixed_effects_design, refit_fixed_effects

logger = logging.getLogger(__name__)

DEFAULT_Q_LIST = (0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_S_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0)
DEFAULT_T = {
    EvaluationKind.E1: math.exp(-1),
    EvaluationKind.E2: 0.8,
}
T_GRID_PRESETS = {
    EvaluationKind.E1: tuple(math.exp(-k) for k in range(1, 6)),
    EvaluationKind.E2: (0.8, 0.74, 0.68, 0.62, 0.56, 0.5),
}
GENE_LEVEL_S_GRID = tuple(round(0.2 * k, 1) for k in range(1, 16))
GENE_LEVEL_T_GRID = tuple(round(0.1 + 0.05 * k, 2) for k in range(15))


@dataclass
class SelectionConfig:
    q_list: Tuple[float, ...] = DEFAULT_Q_LIST
    t: Optional[float] = None
    t_grid: Optional[Tuple[float, ...]] = None
    s_grid: Tuple[float, ...] = DEFAULT_S_GRID
    kind: EvaluationKind = EvaluationKind.E2
    R: int = 500
    R1: int = 500
    seed: int = 0
    max_workers: int = 1

    def __post_init__(self):
        self.kind = EvaluationKind.parse(self.kind)
        self.q_list = tuple(float(q) for q in self.q_list)
        self.s_grid = tuple(float(s) for s in self.s_grid)
        if self.t_grid is not None:
            self.t_grid = tuple(float(t) for t in self.t_grid)

        if not self.q_list:
            raise ConfigError("q_list must not be empty")
        if not self.s_grid:
            raise ConfigError("s_grid must not be empty")
        if any(not s > 0 for s in self.s_grid):
            raise ConfigError(f"s_grid values must be positive, got {self.s_grid}")
        if self.t_grid is not None and not self.t_grid:
            raise ConfigError("t_grid must not be empty when given")

        for t in self.t_values:
            if not 0 < t < 1:
                raise ConfigError(f"Threshold fraction t must lie in (0, 1), got {t}")
            for q in self.q_list:
                if not 0 < q * t < 1:
                    raise ConfigError(f"q*t must lie in (0, 1), got q={q}, t={t}")

        # Validates R, R1 against the ensemble minimum
        self.resampling(self.s_grid[0])

    @property
    def t_values(self) -> Tuple[float, ...]:
        if self.t_grid is not None:
            return self.t_grid
        return (self.t if self.t is not None else DEFAULT_T[self.kind],)

    @property
    def sorted_s_grid(self) -> Tuple[float, ...]:
        # Grid order never matters: substreams are keyed by sorted position
        return tuple(sorted(set(self.s_grid)))

    def resampling(self, s: float) -> ResamplingConfig:
        return ResamplingConfig(R=self.R, R1=self.R1, s=s, seed=self.seed)


@dataclass
class EvalueReport:
    full_scores: np.ndarray
    dropone_scores: np.ndarray
    q_list: Tuple[float, ...]
    kind: EvaluationKind
    s: float
    full_quantiles: Dict[float, float] = field(default_factory=dict)
    dropone_quantiles: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.full_quantiles:
            self.full_quantiles = {q: empirical_quantile(self.full_scores, q) for q in self.q_list}
        if self.dropone_quantiles is None:
            self.dropone_quantiles = np.array([
                [empirical_quantile(self.dropone_scores[:, j], q) for q in self.q_list]
                for j in range(self.n_snps)
            ]).reshape(self.n_snps, len(self.q_list))

    @property
    def n_snps(self) -> int:
        return self.dropone_scores.shape[1]

    def q_index(self, q: float) -> int:
        for index, value in enumerate(self.q_list):
            if math.isclose(value, q, rel_tol=0, abs_tol=1e-12):
                return index
        raise ValueError(f"q={q} is not among the report's quantile levels {self.q_list}")

    def threshold(self, q: float, t: float) -> float:
        """c_{q t} of the full-model distribution"""
        return empirical_quantile(self.full_scores, q * t)


def _score_matrices(ensemble: BootstrapEnsemble, kind: EvaluationKind) -> Tuple[np.ndarray, np.ndarray]:
    """Full-model scores (R,) and drop-one scores (R, p_g)"""
    kind = EvaluationKind.parse(kind)
    mean, sd = ensemble.reference_mean, ensemble.reference_sd
    squared = standardize(ensemble.primary, mean, sd) ** 2
    zeroed = standardize(np.zeros(ensemble.n_snps), mean, sd) ** 2

    full = score_squared_norms(squared.sum(axis=1), kind)
    dropone = np.empty_like(squared)
    for j in range(ensemble.n_snps):
        replaced = squared.copy()
        replaced[:, j] = zeroed[j]
        dropone[:, j] = score_squared_norms(replaced.sum(axis=1), kind)
    return full, dropone


def evalue_distributions(ensemble: BootstrapEnsemble,
                         kind: EvaluationKind) -> Tuple[EvalDistribution, List[EvalDistribution]]:
    """Full-model distribution and one drop-one distribution per SNP"""
    kind = EvaluationKind.parse(kind)
    full, dropone = _score_matrices(ensemble, kind)
    return (
        EvalDistribution(full, kind, "full"),
        [EvalDistribution(dropone[:, j], kind, f"-{j}") for j in range(dropone.shape[1])],
    )


def evalue_report(ensemble: BootstrapEnsemble, kind: EvaluationKind,
                  q_list: Sequence[float] = DEFAULT_Q_LIST) -> EvalueReport:
    kind = EvaluationKind.parse(kind)
    full, dropone = _score_matrices(ensemble, kind)
    return EvalueReport(
        full_scores=full,
        dropone_scores=dropone,
        q_list=tuple(q_list),
        kind=kind,
        s=ensemble.source_config.s,
    )


def select_single(report: EvalueReport, q: float, t: float) -> List[int]:
    """{j : c_q(E_-j) < c_{qt}(E_*)}"""
    column = report.dropone_quantiles[:, report.q_index(q)]
    return np.flatnonzero(column < report.threshold(q, t)).tolist()


def select_q_intersection(report: EvalueReport, q_list: Sequence[float], t: float) -> List[int]:
    """Predictors selected at every q"""
    selected = None
    for q in q_list:
        current = set(select_single(report, q, t))
        selected = current if selected is None else selected & current
        if not selected:
            break
    return sorted(selected or [])


def mean_evalue_select(ensemble: BootstrapEnsemble, kind: EvaluationKind) -> List[int]:
    """{j : mean(E_-j) < mean(E_*)}"""
    full, dropone = _score_matrices(ensemble, kind)
    return np.flatnonzero(dropone.mean(axis=0) < full.mean()).tolist()


def restricted_prediction_error(train_fit: FittedAceModel, train: Dataset,
                                selected: Sequence[int], test: Dataset) -> float:
    """Sum of squared fixed-effect residuals on test after a GLS refit on train"""
    if test.snp_ids != train.snp_ids or test.covariate_ids != train.covariate_ids:
        raise ConfigError("Test data must share the SNP and covariate layout of the training data")

    columns = sorted(int(j) for j in selected)
    coefficients, _, _ = refit_fixed_effects(train, train_fit.per_family_V_inverse, columns)

    design = fixed_effects_design(test, columns)
    error = 0.0
    for X, family in zip(design.blocks, test.families):
        residual = family.phenotype - X @ coefficients
        error += float(residual @ residual)
    return error


@dataclass(frozen=True)
class GridPoint:
    s: float
    t: float
    selected: Tuple[int, ...]
    pe: float

    @property
    def ranking_key(self):
        return (self.pe, len(self.selected), self.s, self.t)


@dataclass
class SelectionResult:
    selected: Tuple[int, ...]
    winning_s: float
    winning_t: float
    pe_trace: Dict[Tuple[float, float], float]
    per_predictor_evalues: EvalueReport
    set_sizes: Dict[Tuple[float, float], int] = field(default_factory=dict)
    reports: Dict[float, EvalueReport] = field(default_factory=dict)
    fit: Optional[FittedAceModel] = None


class PredictionErrorCache:
    """Memoizes restricted prediction error per selected set"""

    def __init__(self, train_fit: FittedAceModel, train: Dataset, test: Dataset):
        self.train_fit = train_fit
        self.train = train
        self.test = test
        self._values: Dict[Tuple[int, ...], float] = {}

    def __call__(self, selected: Sequence[int]) -> float:
        key = tuple(sorted(selected))
        if key not in self._values:
            self._values[key] = restricted_prediction_error(self.train_fit, self.train, key, self.test)
        return self._values[key]


def build_grid_ensembles(fit: FittedAceModel, train: Dataset,
                         config: SelectionConfig) -> Dict[float, BootstrapEnsemble]:
    """One ensemble per s, with substreams keyed by the sorted grid position"""
    grid = config.sorted_s_grid

    def build(item):
        index, s = item
        return build_ensemble(fit, train, config.resampling(s), grid_index=index)

    items = list(enumerate(grid))
    if config.max_workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            ensembles = list(pool.map(build, items))
    else:
        ensembles = [build(item) for item in items]

    for s, ensemble in zip(grid, ensembles):
        spread = ensemble.summary()["sd"]
        logger.debug(f"Ensemble s={s}: primary sd range [{spread.min():.4g}, {spread.max():.4g}]")
    return dict(zip(grid, ensembles))


def evaluate_grid(ensembles: Dict[float, BootstrapEnsemble], config: SelectionConfig,
                  prediction_error: Callable[[Sequence[int]], float],
                  kind: Optional[EvaluationKind] = None) -> Tuple[List[GridPoint], Dict[float, EvalueReport]]:
    """Quantile e-value selection and its prediction error at every (s, t)"""
    kind = EvaluationKind.parse(kind or config.kind)
    points: List[GridPoint] = []
    reports: Dict[float, EvalueReport] = {}

    for s in sorted(ensembles):
        report = evalue_report(ensembles[s], kind, config.q_list)
        reports[s] = report
        for t in config.t_values:
            selected = tuple(select_q_intersection(report, config.q_list, t))
            points.append(GridPoint(s=s, t=t, selected=selected, pe=prediction_error(selected)))
        logger.debug(f"Grid point s={s}: evaluated {len(config.t_values)} thresholds")

    return points, reports


def evaluate_mean_grid(ensembles: Dict[float, BootstrapEnsemble], kind: EvaluationKind,
                       prediction_error: Callable[[Sequence[int]], float]) -> List[GridPoint]:
    """Mean e-value selection and its prediction error at every s"""
    points = []
    for s in sorted(ensembles):
        selected = tuple(mean_evalue_select(ensembles[s], kind))
        points.append(GridPoint(s=s, t=float("nan"), selected=selected, pe=prediction_error(selected)))
    return points


def choose_winner(points: Sequence[GridPoint]) -> GridPoint:
    """Smallest PE; ties go to the smaller set, then smaller s, then smaller t"""
    if not points:
        raise ConfigError("No grid points to choose from")
    return min(points, key=lambda point: point.ranking_key)


def choose_winners_per_t(points: Sequence[GridPoint]) -> Dict[float, GridPoint]:
    """Search over s only, separately at each fixed t"""
    by_t: Dict[float, List[GridPoint]] = {}
    for point in points:
        by_t.setdefault(point.t, []).append(point)
    return {t: choose_winner(group) for t, group in by_t.items()}


def select_over_grid(train: Dataset, test: Dataset, config: SelectionConfig,
                     fit: Optional[FittedAceModel] = None,
                     fit_options: Optional[FitOptions] = None) -> SelectionResult:
    """Fit once on train, search (s, t) by held-out prediction error"""
    if fit is None:
        fit = fit_ace(train, fit_options)

    ensembles = build_grid_ensembles(fit, train, config)
    prediction_error = PredictionErrorCache(fit, train, test)
    points, reports = evaluate_grid(ensembles, config, prediction_error)
    winner = choose_winner(points)

    logger.info(
        f"Selected {len(winner.selected)} of {train.n_snps} SNPs at s={winner.s}, t={winner.t:.4g} "
        f"(PE={winner.pe:.4f})"
    )
    return SelectionResult(
        selected=winner.selected,
        winning_s=winner.s,
        winning_t=winner.t,
        pe_trace={(p.s, p.t): p.pe for p in points},
        per_predictor_evalues=reports[winner.s],
        set_sizes={(p.s, p.t): len(p.selected) for p in points},
        reports=reports,
        fit=fit,
    )
