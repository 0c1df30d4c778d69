"""
Comparison selectors: mBIC2 backward deletion on an ordinary linear model,
and single-SNP GLS tests under null-model variance components with
Benjamini-Hochberg control.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import special, stats

from ..errors import RankDeficiencyError
from ..models.family_data import Dataset
from .lmm import FitOptions, collinear_columns, fit_ace, fixed_effects_design, gls_solve

logger = logging.getLogger(__name__)

MBIC2_PENALTY_CONSTANT = 4.0
DEFAULT_FDR_LEVEL = 0.05


@dataclass
class PValueVector:
    pvalues: np.ndarray
    statistics: np.ndarray
    df: int

    def __post_init__(self):
        self.pvalues = np.asarray(self.pvalues, dtype=float)
        self.statistics = np.asarray(self.statistics, dtype=float)
        if self.pvalues.shape != self.statistics.shape:
            raise ValueError("p-values and statistics must have the same length")
        if np.any((self.pvalues < 0) | (self.pvalues > 1)):
            raise ValueError("p-values must lie in [0, 1]")

    def __len__(self) -> int:
        return self.pvalues.shape[0]


def mbic2_criterion(n: int, rss: float, k: int, p_g: int,
                    penalty_constant: float = MBIC2_PENALTY_CONSTANT) -> float:
    """n log(RSS/n) + k log n + 2k log(p_g/c) - 2 log k!"""
    value = n * np.log(rss / n)
    if k > 0:
        value += k * np.log(n) + 2 * k * np.log(p_g / penalty_constant) - 2 * special.gammaln(k + 1)
    return float(value)


def _ols_rss(design: np.ndarray, y: np.ndarray) -> float:
    coefficients, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coefficients
    return float(residual @ residual)


def mbic2_backward(dataset: Dataset, penalty_constant: float = MBIC2_PENALTY_CONSTANT) -> List[int]:
    """Backward deletion from the full SNP set on the stacked OLS model

    Family structure is ignored. The intercept and covariates are always kept.
    Each step removes the SNP whose deletion lowers the criterion most; ties
    go to the lowest index.
    """
    y, G, C, _ = dataset.stacked()
    n = y.shape[0]
    p_g = dataset.n_snps
    base = np.hstack([np.ones((n, 1)), C])

    full = np.hstack([base, G])
    labels = ["intercept"] + list(dataset.covariate_ids) + list(dataset.snp_ids)
    deficient = collinear_columns(full.T @ full, labels)
    if deficient:
        raise RankDeficiencyError(deficient, "Stacked OLS design for mBIC2 is rank deficient")

    current = list(range(p_g))
    score = mbic2_criterion(n, _ols_rss(full, y), len(current), p_g, penalty_constant)

    while current:
        best_score, best_position = score, None
        for position, j in enumerate(current):
            remaining = current[:position] + current[position + 1:]
            design = np.hstack([base, G[:, remaining]])
            candidate = mbic2_criterion(n, _ols_rss(design, y), len(remaining), p_g, penalty_constant)
            if candidate < best_score:
                best_score, best_position = candidate, position
        if best_position is None:
            break
        del current[best_position]
        score = best_score

    logger.debug(f"mBIC2 kept {len(current)} of {p_g} SNPs (criterion {score:.4f})")
    return current


def single_snp_gls_pvalues(dataset: Dataset, fit_options: Optional[FitOptions] = None,
                           v_inverses: Optional[Sequence[np.ndarray]] = None) -> PValueVector:
    """Per-SNP GLS t-tests with variance components frozen at the null fit

    Passing v_inverses skips the null fit and uses the given blocks.
    """
    if v_inverses is None:
        null_fit = fit_ace(dataset, fit_options, snp_columns=[])
        v_inverses = null_fit.per_family_V_inverse
        logger.debug(f"Null-model variance components: {null_fit.vc}")

    n = dataset.n_individuals
    df = n - (dataset.n_covariates + 2)
    responses = [family.phenotype for family in dataset.families]

    statistics = np.zeros(dataset.n_snps)
    pvalues = np.ones(dataset.n_snps)
    for j in range(dataset.n_snps):
        design = fixed_effects_design(dataset, [j])
        try:
            coefficients, covariance = gls_solve(design, responses, v_inverses)
        except RankDeficiencyError:
            logger.warning(f"SNP {dataset.snp_ids[j]} is collinear with the intercept or covariates; p-value set to 1")
            continue

        weighted_rss = 0.0
        for X, y, v_inv in zip(design.blocks, responses, v_inverses):
            residual = y - X @ coefficients
            weighted_rss += float(residual @ v_inv @ residual)

        scale = weighted_rss / df
        statistic = coefficients[1] / np.sqrt(scale * covariance[1, 1])
        statistics[j] = statistic
        pvalues[j] = 2.0 * stats.t.sf(abs(statistic), df)

    return PValueVector(pvalues=np.clip(pvalues, 0.0, 1.0), statistics=statistics, df=df)


def benjamini_hochberg(pvalues, level: float = DEFAULT_FDR_LEVEL) -> List[int]:
    """Step-up: reject the k smallest where k is the largest with p_(k) <= k*level/p"""
    if not 0 < level < 1:
        raise ValueError(f"FDR level must lie in (0, 1), got {level}")
    if isinstance(pvalues, PValueVector):
        pvalues = pvalues.pvalues
    pvalues = np.asarray(pvalues, dtype=float)
    p = pvalues.shape[0]
    if p == 0:
        return []

    order = np.argsort(pvalues, kind="stable")
    critical = level * np.arange(1, p + 1) / p
    passing = np.flatnonzero(pvalues[order] <= critical)
    if passing.size == 0:
        return []
    return sorted(order[:passing[-1] + 1].tolist())
