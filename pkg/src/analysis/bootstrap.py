"""
Generalized-bootstrap coefficient ensembles
Perturbed coefficients come from the closed-form first-order representation;
the model is never refit.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..errors import ConfigError, DegenerateReferenceError, StructuralError
from ..models.family_data import Dataset
from .lmm import FittedAceModel, fixed_effects_design

logger = logging.getLogger(__name__)

MIN_ENSEMBLE_SIZE = 100
MIN_REFERENCE_SD = 1e-12

PRIMARY_STREAM = 0
REFERENCE_STREAM = 1


@dataclass(frozen=True)
class ResamplingConfig:
    R: int = 500
    R1: int = 500
    s: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.R < MIN_ENSEMBLE_SIZE or self.R1 < MIN_ENSEMBLE_SIZE:
            raise ConfigError(f"Ensemble sizes must be >= {MIN_ENSEMBLE_SIZE}, got R={self.R}, R1={self.R1}")
        if not self.s > 0:
            raise ConfigError(f"Bootstrap scale s must be positive, got {self.s}")


@dataclass
class BootstrapEnsemble:
    primary: np.ndarray
    reference: np.ndarray
    reference_mean: np.ndarray
    reference_sd: np.ndarray
    source_config: ResamplingConfig
    point_estimate: np.ndarray

    @property
    def n_snps(self) -> int:
        return self.primary.shape[1]

    def summary(self) -> Dict[str, np.ndarray]:
        """Per-coordinate moments of the primary ensemble"""
        return {
            "mean": self.primary.mean(axis=0),
            "sd": self.primary.std(axis=0, ddof=1),
            "reference_mean": self.reference_mean,
            "reference_sd": self.reference_sd,
        }


def ensemble_stream(seed: int, grid_index: int, stream: int) -> np.random.Generator:
    """Counter-based substream keyed by (seed, grid point, stream id)

    Philox is a counter-based generator; SeedSequence spawn keys make each
    (grid_index, stream) pair independent of the order streams are created in.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(grid_index), int(stream)))
    return np.random.Generator(np.random.Philox(sequence))


def draw_family_weights(m: int, rng: np.random.Generator) -> np.ndarray:
    """Centered Gamma(1,1) - 1 weights, one per family"""
    if m < 1:
        raise StructuralError(f"Need at least one family to draw weights, got m={m}")
    return rng.standard_exponential(m) - 1.0


def family_scores(fit: FittedAceModel, dataset: Dataset) -> np.ndarray:
    """Rows X_i' V_i^{-1} (y_i - X_i theta_hat), one per family"""
    design = fixed_effects_design(dataset, fit.snp_columns)
    if design.n_columns != fit.coefficients.shape[0]:
        raise StructuralError(
            f"Fit has {fit.coefficients.shape[0]} coefficients but the design has {design.n_columns} columns"
        )
    if len(fit.per_family_V_inverse) != dataset.n_families:
        raise StructuralError(
            f"Fit covers {len(fit.per_family_V_inverse)} families, dataset has {dataset.n_families}"
        )

    scores = np.empty((dataset.n_families, design.n_columns))
    for i, (X, family, v_inv) in enumerate(zip(design.blocks, dataset.families, fit.per_family_V_inverse)):
        residual = family.phenotype - X @ fit.coefficients
        scores[i] = X.T @ (v_inv @ residual)
    return scores


def _snp_prefactor(fit: FittedAceModel) -> np.ndarray:
    # SNP rows of (X' V^{-1} X)^{-1}
    return fit.coefficient_covariance[fit.snp_slice, :]


def perturb_coefficients(fit: FittedAceModel, dataset: Dataset, weights: np.ndarray, s: float) -> np.ndarray:
    """One bootstrap draw of the SNP coefficients"""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (dataset.n_families,):
        raise StructuralError(f"Expected {dataset.n_families} family weights, got shape {weights.shape}")

    scores = family_scores(fit, dataset)
    return fit.snp_coefficients + s * (_snp_prefactor(fit) @ (scores.T @ weights))


def _draw_block(point: np.ndarray, perturbation: np.ndarray, weights: np.ndarray, s: float) -> np.ndarray:
    # Each row: beta_g + s * P S' w_r
    return point + s * (weights @ perturbation)


def build_ensemble(fit: FittedAceModel, dataset: Dataset, config: ResamplingConfig,
                   grid_index: int = 0) -> BootstrapEnsemble:
    """Primary (R) and reference (R1) ensembles from independent weight streams"""
    if not fit.converged:
        logger.warning("Building a bootstrap ensemble from a fit that did not converge")

    m = dataset.n_families
    # Computed once and shared by all R + R1 draws: (m, p_g)
    perturbation = family_scores(fit, dataset) @ _snp_prefactor(fit).T
    point = fit.snp_coefficients

    primary_weights, reference_weights = ensemble_weights(config, m, grid_index)

    primary = _draw_block(point, perturbation, primary_weights, config.s)
    reference = _draw_block(point, perturbation, reference_weights, config.s)

    reference_mean = reference.mean(axis=0)
    reference_sd = reference.std(axis=0, ddof=1)
    degenerate = np.flatnonzero(~(reference_sd >= MIN_REFERENCE_SD))
    if degenerate.size:
        raise DegenerateReferenceError(degenerate.tolist())

    logger.debug(f"Built ensemble s={config.s}: R={config.R}, R1={config.R1}, m={m}")
    return BootstrapEnsemble(
        primary=primary,
        reference=reference,
        reference_mean=reference_mean,
        reference_sd=reference_sd,
        source_config=config,
        point_estimate=point.copy(),
    )


def ensemble_weights(config: ResamplingConfig, m: int, grid_index: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """The (primary, reference) weight matrices build_ensemble draws"""
    primary = ensemble_stream(config.seed, grid_index, PRIMARY_STREAM).standard_exponential((config.R, m)) - 1.0
    reference = ensemble_stream(config.seed, grid_index, REFERENCE_STREAM).standard_exponential((config.R1, m)) - 1.0
    return primary, reference
