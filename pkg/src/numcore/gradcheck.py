"""Central finite-difference checker for tape gradients."""

from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from src.numcore.errors import ContractError, ShapeError
from src.numcore.tape import Tape

# relative errors are taken against max(|analytic| + |numeric|, DENOM_FLOOR)
DENOM_FLOOR = 1e-5


@dataclass
class GradCheckReport:
    errors: List[float] = field(default_factory=list)
    tol: float = 1e-4
    step: float = 1e-6

    @property
    def passed(self):
        return all(e <= self.tol for e in self.errors)

    @property
    def max_error(self):
        return max(self.errors) if self.errors else 0.0

    def to_dict(self):
        return {"errors": list(self.errors), "tol": self.tol, "step": self.step,
                "passed": self.passed, "max_error": self.max_error}


def _evaluate(f, params):
    tape = Tape()
    leaves = [tape.watch(p) for p in params]
    out = f(leaves)
    if out.shape != (1, 1):
        raise ShapeError(f"grad_check needs a scalar (1x1) function, got {out.shape}")
    return tape, leaves, out


def relative_error(analytic, numeric, floor=DENOM_FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return np.abs(analytic - numeric) / denom


def numeric_gradient(f: Callable, params: Sequence[np.ndarray], index: int, step: float = 1e-6):
    """Central differences of ``f`` with respect to ``params[index]``."""
    base = [np.array(p, dtype=np.float64) for p in params]
    target = base[index]
    grad = np.zeros_like(target)
    for pos in np.ndindex(target.shape):
        orig = target[pos]
        target[pos] = orig + step
        plus = _evaluate(f, base)[2].item()
        target[pos] = orig - step
        minus = _evaluate(f, base)[2].item()
        target[pos] = orig
        grad[pos] = (plus - minus) / (2.0 * step)
    return grad


def grad_check(f: Callable, params: Sequence[np.ndarray], tol: float = 1e-4, step: float = 1e-6):
    """Compare tape gradients of ``f`` against central differences.

    Args:
        f: callable taking the list of tracked leaf matrices and returning a
            1x1 Matrix. It must be deterministic (fix any RNG inside).
        params: parameter values, one array per leaf.
        tol: maximum allowed relative error per parameter.
        step: finite-difference step.

    Returns:
        GradCheckReport with the max relative error for each parameter.
    """
    params = [np.array(p, dtype=np.float64) for p in params]
    tape, leaves, out = _evaluate(f, params)
    again = _evaluate(f, params)[2]
    if out.item() != again.item():
        raise ContractError(
            f"grad_check: two forward passes disagree ({out.item()!r} vs {again.item()!r}); "
            "fix the RNG seed inside f")
    analytic = tape.gradient(out, leaves)

    report = GradCheckReport(tol=tol, step=step)
    for i, g in enumerate(analytic):
        numeric = numeric_gradient(f, params, i, step)
        err = relative_error(g, numeric)
        report.errors.append(float(err.max()) if err.size else 0.0)
    return report
