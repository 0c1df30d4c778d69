"""
Maximum-likelihood fitting of the ACE linear mixed model
GLS for the fixed effects, Nelder-Mead over log variance components
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from ..errors import ConvergenceWarning, RankDeficiencyError
from ..models.family_data import AceVarianceComponents, Dataset
from .kinship import ace_covariance, family_relationship_blocks

logger = logging.getLogger(__name__)

VC_FLOOR = 1e-8
LOG_LOWER_BOUND = np.log(1e-10)
RANK_TOLERANCE = 1e-10
# Fractions of the phenotypic variance assigned to (a, c, e) at each start
START_SPLITS = ((0.5, 0.25, 0.25), (0.25, 0.25, 0.5), (0.1, 0.1, 0.8))
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class FixedEffectsDesign:
    """Per-family design matrices X_i = [1 | G_i | C_i]"""
    blocks: List[np.ndarray]
    labels: List[str]
    snp_columns: List[int]

    @property
    def n_columns(self) -> int:
        return len(self.labels)

    @property
    def snp_slice(self) -> slice:
        return slice(1, 1 + len(self.snp_columns))


@dataclass
class FitOptions:
    tolerance: float = 1e-6
    max_iters: int = 2000
    init: Optional[AceVarianceComponents] = None
    multi_start: bool = True


@dataclass
class FittedAceModel:
    coefficients: np.ndarray
    vc: AceVarianceComponents
    coefficient_covariance: np.ndarray
    per_family_V_inverse: List[np.ndarray]
    log_likelihood: float
    converged: bool
    labels: List[str] = field(default_factory=list)
    snp_columns: List[int] = field(default_factory=list)
    n_iterations: int = 0

    @property
    def neg2_log_likelihood(self) -> float:
        return -2.0 * self.log_likelihood

    @property
    def snp_slice(self) -> slice:
        return slice(1, 1 + len(self.snp_columns))

    @property
    def snp_coefficients(self) -> np.ndarray:
        return self.coefficients[self.snp_slice]

    @property
    def heritability(self) -> float:
        """Polygenic share of the total variance"""
        return self.vc.sigma_a2 / self.vc.total


def fixed_effects_design(dataset: Dataset, snp_columns: Optional[Sequence[int]] = None) -> FixedEffectsDesign:
    """Build [1 | G_i[:, snp_columns] | C_i] for every family"""
    if snp_columns is None:
        snp_columns = list(range(dataset.n_snps))
    snp_columns = [int(j) for j in snp_columns]

    labels = ["intercept"] + [dataset.snp_ids[j] for j in snp_columns] + list(dataset.covariate_ids)
    blocks = []
    for family in dataset.families:
        n_i = family.size
        blocks.append(np.hstack([
            np.ones((n_i, 1)),
            family.genotypes[:, snp_columns],
            family.covariates,
        ]))

    return FixedEffectsDesign(blocks=blocks, labels=labels, snp_columns=snp_columns)


def collinear_columns(normal_matrix: np.ndarray, labels: Sequence[str]) -> List[str]:
    """Labels of columns that a pivoted QR finds linearly dependent"""
    k = normal_matrix.shape[0]
    if k == 0:
        return []

    diagonal = np.diag(normal_matrix).copy()
    dead = diagonal <= 0
    scale = np.where(dead, 1.0, 1.0 / np.sqrt(np.where(dead, 1.0, diagonal)))
    scaled = normal_matrix * np.outer(scale, scale)
    scaled[dead, :] = 0.0
    scaled[:, dead] = 0.0

    _, r, pivots = linalg.qr(scaled, pivoting=True)
    magnitude = np.abs(np.diag(r))
    if magnitude[0] == 0:
        return list(labels)

    rank = int(np.sum(magnitude > RANK_TOLERANCE * max(k, 1) * magnitude[0]))
    return [labels[j] for j in sorted(pivots[rank:])]


def _solve_normal_equations(normal_matrix: np.ndarray, rhs: np.ndarray,
                            labels: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    normal_matrix = 0.5 * (normal_matrix + normal_matrix.T)

    deficient = collinear_columns(normal_matrix, labels)
    if deficient:
        raise RankDeficiencyError(deficient)

    try:
        factor = linalg.cho_factor(normal_matrix)
    except linalg.LinAlgError:
        raise RankDeficiencyError(labels, "Normal matrix is not positive definite")

    coefficients = linalg.cho_solve(factor, rhs)
    covariance = linalg.cho_solve(factor, np.eye(normal_matrix.shape[0]))
    return coefficients, 0.5 * (covariance + covariance.T)


def gls_solve(design: FixedEffectsDesign, responses: Sequence[np.ndarray],
              v_inverses: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized least squares over independent family blocks"""
    k = design.n_columns
    normal_matrix = np.zeros((k, k))
    rhs = np.zeros(k)

    for X, y, v_inv in zip(design.blocks, responses, v_inverses):
        xt_vinv = X.T @ v_inv
        normal_matrix += xt_vinv @ X
        rhs += xt_vinv @ y

    return _solve_normal_equations(normal_matrix, rhs, design.labels)


def ace_inverse_blocks(dataset: Dataset, vc: AceVarianceComponents) -> List[np.ndarray]:
    """V_i^{-1} for every family at the given variance components"""
    phis = family_relationship_blocks(dataset)
    return [np.linalg.inv(ace_covariance(phi, vc)) for phi in phis]


def refit_fixed_effects(dataset: Dataset, v_inverses: Sequence[np.ndarray],
                        snp_columns: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, FixedEffectsDesign]:
    """GLS on a SNP subset with the covariance blocks held fixed"""
    design = fixed_effects_design(dataset, snp_columns)
    responses = [family.phenotype for family in dataset.families]
    coefficients, covariance = gls_solve(design, responses, v_inverses)
    return coefficients, covariance, design


@dataclass
class _SizeGroup:
    positions: np.ndarray
    X: np.ndarray
    y: np.ndarray
    phi: np.ndarray


class AceLikelihood:
    """Profile -2 log-likelihood of the ACE model with fixed effects profiled out"""

    def __init__(self, dataset: Dataset, snp_columns: Optional[Sequence[int]] = None):
        self.logger = logging.getLogger(__name__)
        self.dataset = dataset
        self.design = fixed_effects_design(dataset, snp_columns)
        self.n_obs = dataset.n_individuals

        # Families of equal size are evaluated as one batch
        phis = family_relationship_blocks(dataset)
        sizes = np.array([family.size for family in dataset.families])
        self._groups: List[_SizeGroup] = []
        for n in np.unique(sizes):
            positions = np.flatnonzero(sizes == n)
            self._groups.append(_SizeGroup(
                positions=positions,
                X=np.stack([self.design.blocks[i] for i in positions]),
                y=np.stack([dataset.families[i].phenotype for i in positions]),
                phi=np.stack([phis[i] for i in positions]),
            ))

        k = self.design.n_columns
        gram = np.zeros((k, k))
        for group in self._groups:
            gram += np.einsum("gni,gnj->ij", group.X, group.X)
        deficient = collinear_columns(gram, self.design.labels)
        if deficient:
            raise RankDeficiencyError(deficient)

    def evaluate(self, vc: AceVarianceComponents):
        """Return (-2LL, coefficients, covariance, per-group V^{-1} stacks)"""
        k = self.design.n_columns
        normal_matrix = np.zeros((k, k))
        rhs = np.zeros(k)
        log_det = 0.0
        inverses = []

        for group in self._groups:
            n = group.X.shape[1]
            V = (vc.sigma_a2 * group.phi + vc.sigma_c2 * np.ones((n, n))
                 + vc.sigma_e2 * np.eye(n))
            L = np.linalg.cholesky(V)
            log_det += 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)))
            v_inv = np.linalg.inv(V)
            inverses.append(v_inv)

            xt_vinv = np.matmul(np.swapaxes(group.X, 1, 2), v_inv)
            normal_matrix += np.matmul(xt_vinv, group.X).sum(axis=0)
            rhs += np.einsum("gkn,gn->k", xt_vinv, group.y)

        coefficients, covariance = _solve_normal_equations(normal_matrix, rhs, self.design.labels)

        quadratic = 0.0
        for group, v_inv in zip(self._groups, inverses):
            residual = group.y - group.X @ coefficients
            quadratic += np.einsum("gn,gnm,gm->", residual, v_inv, residual)

        neg2ll = self.n_obs * LOG_2PI + log_det + quadratic
        return neg2ll, coefficients, covariance, inverses

    def __call__(self, vc: AceVarianceComponents) -> float:
        try:
            value = self.evaluate(vc)[0]
        except np.linalg.LinAlgError:
            return np.inf
        return float(value) if np.isfinite(value) else np.inf

    def per_family_inverses(self, inverses: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Reorder per-group inverse stacks into dataset family order"""
        ordered: List[Optional[np.ndarray]] = [None] * self.dataset.n_families
        for group, stack in zip(self._groups, inverses):
            for position, v_inv in zip(group.positions, stack):
                ordered[position] = v_inv
        return ordered


def profile_neg_loglik(dataset: Dataset, vc: AceVarianceComponents) -> float:
    """-2 log-likelihood at vc with the fixed effects profiled out by GLS"""
    return AceLikelihood(dataset)(vc)


def _phenotypic_variance(dataset: Dataset) -> float:
    y = dataset.stacked()[0]
    total = float(np.var(y)) if y.size > 1 else 1.0
    return max(total, 100.0 * VC_FLOOR)


def initial_values(dataset: Dataset, split: Tuple[float, float, float] = START_SPLITS[0]) -> AceVarianceComponents:
    """Split the phenotypic variance across (a, c, e)"""
    total = _phenotypic_variance(dataset)
    return AceVarianceComponents(split[0] * total, split[1] * total, split[2] * total)


def _to_components(u: np.ndarray) -> AceVarianceComponents:
    sigma = VC_FLOOR + np.exp(u)
    return AceVarianceComponents(float(sigma[0]), float(sigma[1]), float(sigma[2]))


def _to_log(vc: AceVarianceComponents) -> np.ndarray:
    return np.log(np.maximum(vc.as_array(), np.exp(LOG_LOWER_BOUND)))


def fit_ace(dataset: Dataset, options: Optional[FitOptions] = None,
            snp_columns: Optional[Sequence[int]] = None) -> FittedAceModel:
    """Maximum-likelihood ACE fit; fixed effects from the final GLS solve"""
    options = options or FitOptions()
    likelihood = AceLikelihood(dataset, snp_columns)

    starts = [options.init] if options.init is not None else [initial_values(dataset)]
    if options.multi_start:
        starts.extend(initial_values(dataset, split) for split in START_SPLITS[1:])

    upper = np.log(1e4 * _phenotypic_variance(dataset))
    bounds = [(LOG_LOWER_BOUND, upper)] * 3

    def objective(u: np.ndarray) -> float:
        return likelihood(_to_components(u))

    best = None
    for start in starts:
        u0 = np.clip(_to_log(start), LOG_LOWER_BOUND, upper)
        simplex = np.vstack([u0] + [u0 + 0.5 * np.eye(3)[i] for i in range(3)])
        simplex = np.clip(simplex, LOG_LOWER_BOUND, upper)

        result = optimize.minimize(
            objective, u0, method="Nelder-Mead", bounds=bounds,
            options={
                "xatol": options.tolerance,
                "fatol": options.tolerance,
                "maxiter": options.max_iters,
                "initial_simplex": simplex,
            },
        )
        logger.debug(f"Start {start} -> -2LL {result.fun:.6f} after {result.nit} iterations")

        if best is None or result.fun < best.fun:
            best = result

    converged = bool(best.success)
    if not converged:
        message = f"ACE fit did not converge within {options.max_iters} iterations: {best.message}"
        logger.warning(message)
        warnings.warn(message, ConvergenceWarning)

    vc = _to_components(best.x)
    neg2ll, coefficients, covariance, inverses = likelihood.evaluate(vc)
    logger.info(
        f"ACE fit: sigma_a2={vc.sigma_a2:.4f}, sigma_c2={vc.sigma_c2:.4f}, "
        f"sigma_e2={vc.sigma_e2:.4f}, -2LL={neg2ll:.4f}"
    )

    return FittedAceModel(
        coefficients=coefficients,
        vc=vc,
        coefficient_covariance=covariance,
        per_family_V_inverse=likelihood.per_family_inverses(inverses),
        log_likelihood=-0.5 * float(neg2ll),
        converged=converged,
        labels=list(likelihood.design.labels),
        snp_columns=list(likelihood.design.snp_columns),
        n_iterations=int(best.nit),
    )
