"""
Full-batch Adam with early stopping on validation loss.

A training problem exposes its parameter groups, a tracked training loss and
an untracked validation loss. The trainer runs one fresh problem per learning
rate of the grid, keeps the parameters of the best validation epoch, and
returns the problem whose best validation loss is lowest (ties go to the
earlier learning rate).
"""

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

from src.globalmodel.model import f3_loss, predict_proba
from src.numcore import ops
from src.numcore.errors import ContractError
from src.numcore.optim import Adam
from src.numcore.tape import Tape
from src.utils.console import log

LOG_EVERY = 50


@dataclass
class EarlyStopping:
    max_epochs: int = 500
    patience: int = 50
    lr_grid: Sequence[float] = (0.01, 0.001)

    def __post_init__(self):
        if self.max_epochs < 0 or self.patience < 1:
            raise ContractError(f"need max_epochs >= 0 and patience >= 1, got {self.max_epochs}, {self.patience}")
        if not self.lr_grid:
            raise ContractError("learning-rate grid is empty")


@dataclass
class FitResult:
    problem: object
    lr: float
    epochs_run: int
    best_epoch: int
    best_val_loss: float
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    grid: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self):
        return {"lr": self.lr, "epochs_run": self.epochs_run, "best_epoch": self.best_epoch,
                "best_val_loss": self.best_val_loss, "lr_grid": [list(g) for g in self.grid]}


def validation_cross_entropy(probs, labels):
    p = np.clip(probs[np.arange(len(labels)), labels], ops.LOG_CLAMP, None)
    return float(-np.mean(np.log(p)))


def _fit_one(problem, lr, stopping, name):
    groups = problem.param_groups(lr)
    optimizers = [Adam(arrays, lr=group_lr) for arrays, group_lr in groups]
    params = [p for arrays, _ in groups for p in arrays]
    best_val = problem.val_loss()
    best_state = [p.copy() for p in params]
    best_epoch, stale, epochs = 0, 0, 0
    train_losses, val_losses = [], [best_val]

    for epoch in range(stopping.max_epochs):
        tape = Tape()
        leaves = [tape.watch(p) for p in params]
        loss = problem.train_loss(leaves, epoch)
        grads = tape.gradient(loss, leaves)
        start = 0
        for opt in optimizers:
            opt.step(grads[start:start + len(opt.params)])
            start += len(opt.params)
        problem.after_step(epoch)
        epochs = epoch + 1

        val = problem.val_loss()
        train_losses.append(loss.item())
        val_losses.append(val)
        if val < best_val:
            best_val, best_epoch, stale = val, epochs, 0
            best_state = [p.copy() for p in params]
        else:
            stale += 1
        if epoch % LOG_EVERY == 0:
            log(f"{name} lr={lr:g} epoch {epoch}: train {loss.item():.4f}, val {val:.4f}", "DEBUG")
        if stale >= stopping.patience:
            log(f"{name} lr={lr:g}: early stop at epoch {epochs} (best {best_epoch})", "DEBUG")
            break

    for p, saved in zip(params, best_state):
        np.copyto(p, saved)
    problem.after_restore()
    return FitResult(problem, lr, epochs, best_epoch, best_val, train_losses, val_losses)


def fit(make_problem: Callable[[], object], stopping: EarlyStopping, name="model"):
    """Train one fresh problem per learning rate and keep the best by validation loss.

    Args:
        make_problem: factory returning an identically initialized problem
        stopping: epoch budget, patience and learning-rate grid
        name: label used in log messages

    Returns:
        FitResult for the selected learning rate
    """
    best = None
    grid = []
    for lr in stopping.lr_grid:
        result = _fit_one(make_problem(), lr, stopping, name)
        grid.append((float(lr), result.best_val_loss))
        if best is None or result.best_val_loss < best.best_val_loss:
            best = result
    best.grid = grid
    log(f"{name}: selected lr {best.lr:g} (val loss {best.best_val_loss:.4f}, "
        f"{best.epochs_run} epochs)", "DEBUG")
    return best


class GlobalProblem:
    """
    Train a GlobalModel on fixed shared latents.

    Args:
        gm: GlobalModel, updated in place
        bundle: RepresentationBundle
        seed: key of the graph-sampling stream
        samples: graph samples averaged per step (learned graph modes)
        counter: DrawCounter for graph draws
    """

    def __init__(self, gm, bundle, seed=0, samples=1, counter=None):
        self.gm = gm
        self.bundle = bundle
        self.seed = seed
        self.samples = samples
        self.counter = counter
        self.train_index = bundle.indices("train")
        self.val_index = bundle.indices("val")
        if len(self.train_index) == 0 or len(self.val_index) == 0:
            raise ContractError("global training needs nonempty train and validation splits")

    def param_groups(self, lr):
        return [(self.gm.parameter_arrays(), lr)]

    def train_loss(self, leaves, step):
        return f3_loss(self.gm, self.bundle, self.train_index, leaves, seed=self.seed, step=step,
                       samples=self.samples, counter=self.counter)

    def val_loss(self):
        probs = predict_proba(self.gm, self.bundle, self.val_index)
        return validation_cross_entropy(probs, self.bundle.labels[self.val_index])

    def after_step(self, step):
        self.gm.after_step()

    def after_restore(self):
        pass

    def predict(self, index, sample_at_inference=False, samples=1):
        return predict_proba(self.gm, self.bundle, index, seed=self.seed,
                             sample_at_inference=sample_at_inference, samples=samples)
