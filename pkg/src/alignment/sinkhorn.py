"""
Truncated Sinkhorn-Knopp scaling.

Starting from r_0 = 1 the iteration alternates

    c_{j+1} = 1 / (K0^T r_j)
    r_{j+1} = 1 / (K0 c_{j+1})

and K_j = diag(r_j) K0 diag(c_j). Every step is recorded on the tape of K0,
so a loss on K_T differentiates through all T steps.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from src.numcore import ops
from src.numcore.errors import NumericDomainError, ShapeError
from src.numcore.matrix import as_matrix

RESIDUAL_FLOOR = 1e-13
# scaling vectors beyond this are reported as overflow before they turn into inf
SCALE_LIMIT = 1e150


@dataclass
class SinkhornDiagnostics:
    residuals: List[float] = field(default_factory=list)
    sigma2: float = float("nan")

    @property
    def iterations(self):
        return len(self.residuals)

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else float("nan")

    def to_frame(self):
        return pd.DataFrame({"iteration": np.arange(1, len(self.residuals) + 1),
                             "residual": self.residuals})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path


@dataclass
class DecayFit:
    exponent: Optional[float]
    two_log_sigma2: float
    points: int
    sufficient: bool
    reason: str = ""

    def to_dict(self):
        return {"exponent": self.exponent, "two_log_sigma2": self.two_log_sigma2,
                "points": self.points, "sufficient": self.sufficient, "reason": self.reason}


def marginal_residual(K):
    """Euclidean norm of [K^T 1; K 1] - [1; 1]."""
    K = np.asarray(K)
    gap = np.concatenate([K.sum(axis=0) - 1.0, K.sum(axis=1) - 1.0])
    return float(np.linalg.norm(gap))


def second_singular_value(K):
    s = np.linalg.svd(np.asarray(K), compute_uv=False)
    return float(s[1]) if len(s) > 1 else 0.0


def sinkhorn(K0, T):
    """Scale a strictly positive square matrix towards double stochasticity.

    Args:
        K0: square Matrix (or array) with entries > 0, tracked or not
        T: number of (column, row) update pairs

    Returns:
        Tuple[Matrix, SinkhornDiagnostics]: K_T and the residual trajectory
    """
    K0 = as_matrix(K0)
    if K0.rows != K0.cols:
        raise ShapeError(f"sinkhorn needs a square matrix, got {K0.shape}")
    if T < 0:
        raise ValueError(f"sinkhorn needs T >= 0, got {T}")
    if np.any(K0.data <= 0):
        bad = tuple(int(i) for i in np.argwhere(K0.data <= 0)[0])
        raise NumericDomainError(f"sinkhorn: entry {bad} is {K0.data[bad]!r}, expected > 0")

    d = K0.rows
    diag = SinkhornDiagnostics()
    K0T = ops.transpose(K0)
    r = as_matrix(np.ones((d, 1)))
    c = as_matrix(np.ones((d, 1)))
    for j in range(1, T + 1):
        try:
            c = ops.reciprocal(ops.matmul(K0T, r))
            r = ops.reciprocal(ops.matmul(K0, c))
        except NumericDomainError as e:
            raise NumericDomainError(f"sinkhorn overflow at iteration {j}: {e}") from e
        if max(np.abs(r.data).max(), np.abs(c.data).max()) > SCALE_LIMIT:
            raise NumericDomainError(f"sinkhorn overflow at iteration {j}: scaling vector exceeds {SCALE_LIMIT:g}")
        diag.residuals.append(marginal_residual(r.data * K0.data * c.data.T))

    K_T = ops.mul(ops.mul(K0, r), ops.transpose(c))
    diag.sigma2 = second_singular_value(K_T.data)
    return K_T, diag


def fit_decay_rate(diag: SinkhornDiagnostics, burn_in=5, floor=RESIDUAL_FLOOR, min_points=10):
    """Least-squares slope of log residual against iteration after ``burn_in``.

    The slope is reported next to 2 log sigma_2; a residual trajectory that
    reaches ``floor`` too early gives an insufficient-signal result.
    """
    two_log_sigma2 = 2.0 * float(np.log(diag.sigma2)) if diag.sigma2 > 0 else float("-inf")
    res = np.asarray(diag.residuals[burn_in:], dtype=np.float64)
    iters = np.arange(burn_in + 1, burn_in + 1 + len(res))
    keep = res > floor
    if keep.sum() < min_points:
        return DecayFit(None, two_log_sigma2, int(keep.sum()), False,
                        f"only {int(keep.sum())} residuals above {floor:g} after burn-in {burn_in}")
    slope, _ = np.polyfit(iters[keep], np.log(res[keep]), 1)
    return DecayFit(float(slope), two_log_sigma2, int(keep.sum()), True)
