"""
Evaluation maps scoring points against a bootstrap reference distribution
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from ..errors import DegenerateReferenceError


class EvaluationKind(Enum):
    E1 = "E1"
    E2 = "E2"

    @classmethod
    def parse(cls, value) -> "EvaluationKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().upper())


@dataclass
class EvalDistribution:
    values: np.ndarray
    kind: EvaluationKind
    label: str = "full"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            raise ValueError(f"Evaluation distribution '{self.label}' is empty")
        if np.any(self.values <= 0) or np.any(self.values > 1):
            raise ValueError(f"Evaluation scores for '{self.label}' must lie in (0, 1]")

    def quantile(self, q: float) -> float:
        return empirical_quantile(self.values, q)

    def mean(self) -> float:
        return float(np.mean(self.values))


def standardize(x: np.ndarray, mean: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """z_j = (x_j - mean_j) / sd_j; works row-wise on 2-D input"""
    sd = np.asarray(sd, dtype=float)
    degenerate = np.flatnonzero(~(sd > 0))
    if degenerate.size:
        raise DegenerateReferenceError(degenerate.tolist())
    return (np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)) / sd


def score_squared_norms(squared_norms: np.ndarray, kind: EvaluationKind) -> np.ndarray:
    """Apply an evaluation map to squared standardized norms"""
    squared_norms = np.asarray(squared_norms, dtype=float)
    if kind == EvaluationKind.E1:
        return 1.0 / (1.0 + squared_norms)
    if kind == EvaluationKind.E2:
        return np.exp(-np.sqrt(squared_norms))
    raise ValueError(f"Unknown evaluation kind: {kind}")


def evaluate(x: np.ndarray, reference: Tuple[np.ndarray, np.ndarray], kind: EvaluationKind) -> float:
    """E1 = 1/(1+|z|^2), E2 = exp(-|z|)"""
    mean, sd = reference
    z = standardize(x, mean, sd)
    return float(score_squared_norms(np.dot(z, z), EvaluationKind.parse(kind)))


def evaluate_many(points: np.ndarray, reference: Tuple[np.ndarray, np.ndarray], kind: EvaluationKind) -> np.ndarray:
    """Row-wise evaluate over a (draws, coordinates) matrix"""
    mean, sd = reference
    z = standardize(np.atleast_2d(points), mean, sd)
    return score_squared_norms(np.sum(z * z, axis=1), EvaluationKind.parse(kind))


def quantile_rank(n: int, q: float) -> int:
    """1-based order statistic ceil(q*n), robust to q*n rounding noise"""
    return max(1, math.ceil(round(q * n, 9)))


def empirical_quantile(values: Sequence[float], q: float) -> float:
    """Left-continuous inverse CDF: the ceil(q*n)-th order statistic"""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("Cannot take a quantile of an empty sample")
    if not 0 < q < 1:
        raise ValueError(f"Quantile level must lie in (0, 1), got {q}")

    k = quantile_rank(values.size, q)
    return float(np.partition(values, k - 1)[k - 1])
