"""Symmetric degree normalization of a (relaxed) adjacency matrix."""

import numpy as np

from src.numcore import ops
from src.numcore.errors import ContractError, ShapeError
from src.numcore.matrix import Matrix, as_matrix

SELF_LOOP_MODES = ("replace", "add", "keep")
# tolerance on the [0, 1] entry check
ENTRY_TOL = 1e-12


def normalize_adjacency(A, self_loops="replace"):
    """A_hat = D^{-1/2} (A with self loops) D^{-1/2}, D the row degrees.

    ``self_loops="replace"`` overwrites the diagonal of A with 1 so every
    node carries exactly one unit self loop (A = 0, A = I and the all-ones
    matrix all stay well defined). ``"add"`` uses A + I literally. ``"keep"``
    takes the diagonal of A as given, so every row needs a positive degree.
    Differentiable in A; the diagonal receives no gradient in replace mode.
    """
    A = as_matrix(A)
    if A.rows != A.cols:
        raise ShapeError(f"adjacency must be square, got {A.shape}")
    if np.any(A.data < -ENTRY_TOL) or np.any(A.data > 1.0 + ENTRY_TOL):
        raise ContractError(f"adjacency entries must lie in [0, 1], got range "
                            f"[{A.data.min():.6g}, {A.data.max():.6g}]")
    n = A.rows
    eye = Matrix.eye(n)
    if self_loops == "replace":
        A_loop = ops.add(ops.mul(A, Matrix(1.0 - np.eye(n))), eye)
    elif self_loops == "add":
        A_loop = ops.add(A, eye)
    elif self_loops == "keep":
        A_loop = A
    else:
        raise ContractError(f"Unknown self-loop mode '{self_loops}', expected one of {SELF_LOOP_MODES}")
    d_inv_sqrt = ops.power(ops.row_sums(A_loop), -0.5)
    return ops.mul(ops.mul(A_loop, d_inv_sqrt), ops.transpose(d_inv_sqrt))
