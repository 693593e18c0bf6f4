"""
Differentiable primitives over Matrix.

Each primitive computes its value with numpy and, when any operand is
tracked, records an analytic backward closure on the operands' tape.
Broadcasting is limited to a row vector (1 x cols), a column vector
(rows x 1) or a 1x1 operand.
"""

import numpy as np
from scipy.special import expit

from src.numcore.errors import LabelIndexError, NumericDomainError, ShapeError
from src.numcore.matrix import Matrix, as_matrix
from src.numcore.tape import common_tape

LOG_CLAMP = 1e-12


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(value))[0])
        raise NumericDomainError(f"{name} produced a non-finite value at index {bad}")


def _emit(name, value, inputs, backward):
    value = np.asarray(value, dtype=np.float64)
    _check_finite(name, value)
    tape = common_tape(*inputs)
    if tape is None:
        return Matrix(value)
    return tape.record(value, inputs, backward, name)


def _broadcast_shape(a, b, name):
    if a.shape == b.shape:
        return a.shape
    for big, small in ((a, b), (b, a)):
        if small.shape == (1, 1):
            return big.shape
        if small.shape == (1, big.cols) or small.shape == (big.rows, 1):
            return big.shape
    raise ShapeError(f"{name}: cannot combine shapes {a.shape} and {b.shape}")


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


# -- linear algebra ---------------------------------------------------------

def matmul(a, b):
    """Matrix product ``a @ b``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.shape} x {b.shape} (inner dimensions {a.cols} != {b.rows})")
    A, B = a.data, b.data

    def backward(g):
        return g @ B.T, A.T @ g

    return _emit("matmul", A @ B, (a, b), backward)


def add(a, b):
    a, b = as_matrix(a), as_matrix(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _emit("add", a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_matrix(a), as_matrix(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), -_unbroadcast(g, sb)

    return _emit("sub", a.data - b.data, (a, b), backward)


def mul(a, b):
    """Hadamard product with row/column broadcasting."""
    a, b = as_matrix(a), as_matrix(b)
    _broadcast_shape(a, b, "mul")
    A, B = a.data, b.data

    def backward(g):
        return _unbroadcast(g * B, A.shape), _unbroadcast(g * A, B.shape)

    return _emit("mul", A * B, (a, b), backward)


def scale(m, c):
    m = as_matrix(m)
    c = float(c)

    def backward(g):
        return (g * c,)

    return _emit("scale", m.data * c, (m,), backward)


def transpose(m):
    m = as_matrix(m)

    def backward(g):
        return (g.T,)

    return _emit("transpose", m.data.T, (m,), backward)


# -- elementwise ------------------------------------------------------------

def _relu(x):
    y = np.maximum(x, 0.0)
    return y, lambda g: g * (x > 0)


def _sigmoid(x):
    y = expit(x)
    return y, lambda g: g * y * (1.0 - y)


def _tanh(x):
    y = np.tanh(x)
    return y, lambda g: g * (1.0 - y * y)


def _exp(x):
    y = np.exp(x)
    return y, lambda g: g * y


def _log(x):
    if np.any(x <= 0):
        bad = tuple(int(i) for i in np.argwhere(x <= 0)[0])
        raise NumericDomainError(f"log: entry {bad} is {x[bad]!r}, expected > 0")
    return np.log(x), lambda g: g / x


def _reciprocal(x):
    if np.any(x == 0):
        bad = tuple(int(i) for i in np.argwhere(x == 0)[0])
        raise NumericDomainError(f"reciprocal: entry {bad} is zero")
    y = 1.0 / x
    return y, lambda g: -g * y * y


def _square(x):
    return x * x, lambda g: 2.0 * g * x


ELEMENTWISE = {
    "relu": _relu,
    "sigmoid": _sigmoid,
    "tanh": _tanh,
    "exp": _exp,
    "log": _log,
    "reciprocal": _reciprocal,
    "square": _square,
}


def elementwise(op, m):
    """Apply one of ``ELEMENTWISE`` entrywise."""
    if op not in ELEMENTWISE:
        raise ValueError(f"Unknown elementwise op '{op}', expected one of {sorted(ELEMENTWISE)}")
    m = as_matrix(m)
    value, grad = ELEMENTWISE[op](m.data)

    def backward(g):
        return (grad(g),)

    return _emit(op, value, (m,), backward)


def relu(m):
    return elementwise("relu", m)


def sigmoid(m):
    return elementwise("sigmoid", m)


def tanh(m):
    return elementwise("tanh", m)


def exp(m):
    return elementwise("exp", m)


def log(m):
    return elementwise("log", m)


def reciprocal(m):
    return elementwise("reciprocal", m)


def power(m, p):
    """Entrywise ``m ** p``; non-integer powers need positive entries."""
    m = as_matrix(m)
    x = m.data
    p = float(p)
    if not p.is_integer() and np.any(x <= 0):
        bad = tuple(int(i) for i in np.argwhere(x <= 0)[0])
        raise NumericDomainError(f"power({p}): entry {bad} is {x[bad]!r}, expected > 0")
    y = x ** p

    def backward(g):
        return (g * p * x ** (p - 1.0),)

    return _emit("power", y, (m,), backward)


def unary(m, fn, dfn, name):
    """Entrywise ``fn`` with derivative ``dfn(x, y)``, for functions outside ``ELEMENTWISE``."""
    m = as_matrix(m)
    x = m.data
    y = np.asarray(fn(x), dtype=np.float64)

    def backward(g):
        return (g * dfn(x, y),)

    return _emit(name, y, (m,), backward)


# -- reductions -------------------------------------------------------------

def sum_all(m):
    m = as_matrix(m)
    shape = m.shape

    def backward(g):
        return (np.full(shape, g[0, 0]),)

    return _emit("sum_all", np.array([[m.data.sum()]]), (m,), backward)


def mean_all(m):
    m = as_matrix(m)
    shape, size = m.shape, m.data.size

    def backward(g):
        return (np.full(shape, g[0, 0] / size),)

    return _emit("mean_all", np.array([[m.data.mean()]]), (m,), backward)


def row_sums(m):
    """Column vector of per-row sums."""
    m = as_matrix(m)
    shape = m.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _emit("row_sums", m.data.sum(axis=1, keepdims=True), (m,), backward)


def col_sums(m):
    """Row vector of per-column sums."""
    m = as_matrix(m)
    shape = m.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _emit("col_sums", m.data.sum(axis=0, keepdims=True), (m,), backward)


# -- probabilistic heads ----------------------------------------------------

def softmax_rows(m):
    """Row-wise softmax, computed after subtracting each row's maximum."""
    m = as_matrix(m)
    if m.rows == 0 or m.cols == 0:
        raise ShapeError(f"softmax_rows needs a nonempty matrix, got {m.shape}")
    z = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _emit("softmax_rows", y, (m,), backward)


def cross_entropy(pred, labels):
    """Mean of ``-log pred[k, labels[k]]`` with probabilities clamped at 1e-12."""
    pred = as_matrix(pred)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != pred.rows:
        raise ShapeError(f"cross_entropy: {pred.rows} prediction rows but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= pred.cols):
        bad = int(np.argwhere((labels < 0) | (labels >= pred.cols))[0, 0])
        raise LabelIndexError(f"cross_entropy: label {labels[bad]} at row {bad} outside [0, {pred.cols})")
    rows = np.arange(pred.rows)
    p = pred.data[rows, labels]
    clamped = np.maximum(p, LOG_CLAMP)
    n = max(pred.rows, 1)
    loss = -np.log(clamped).sum() / n

    def backward(g):
        grad = np.zeros(pred.shape)
        active = p >= LOG_CLAMP
        grad[rows[active], labels[active]] = -1.0 / (n * p[active])
        return (grad * g[0, 0],)

    return _emit("cross_entropy", np.array([[loss]]), (pred,), backward)


# -- indexing and stacking --------------------------------------------------

def take_rows(m, index):
    m = as_matrix(m)
    index = np.asarray(index, dtype=np.int64)
    shape = m.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _emit("take_rows", m.data[index, :], (m,), backward)


def take_cols(m, index):
    m = as_matrix(m)
    index = np.asarray(index, dtype=np.int64)
    shape = m.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out.T, index, g.T)
        return (out,)

    return _emit("take_cols", m.data[:, index], (m,), backward)


def vstack(mats):
    mats = [as_matrix(x) for x in mats]
    cols = {x.cols for x in mats}
    if len(cols) != 1:
        raise ShapeError(f"vstack: column counts differ {[x.shape for x in mats]}")
    bounds = np.cumsum([0] + [x.rows for x in mats])

    def backward(g):
        return tuple(g[bounds[i]:bounds[i + 1], :] for i in range(len(mats)))

    return _emit("vstack", np.vstack([x.data for x in mats]), tuple(mats), backward)


def hstack(mats):
    mats = [as_matrix(x) for x in mats]
    rows = {x.rows for x in mats}
    if len(rows) != 1:
        raise ShapeError(f"hstack: row counts differ {[x.shape for x in mats]}")
    bounds = np.cumsum([0] + [x.cols for x in mats])

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(mats)))

    return _emit("hstack", np.hstack([x.data for x in mats]), tuple(mats), backward)


def interleave_rows(mats):
    """Stack n (m x d) matrices so that row ``k*n + i`` is row k of matrix i."""
    mats = [as_matrix(x) for x in mats]
    shapes = {x.shape for x in mats}
    if len(shapes) != 1:
        raise ShapeError(f"interleave_rows: shapes differ {[x.shape for x in mats]}")
    n = len(mats)
    m, d = mats[0].shape
    value = np.stack([x.data for x in mats], axis=1).reshape(m * n, d)

    def backward(g):
        gb = g.reshape(m, n, d)
        return tuple(gb[:, i, :] for i in range(n))

    return _emit("interleave_rows", value, tuple(mats), backward)


# -- graph blocks -----------------------------------------------------------

def _blocks(x, n, name):
    if n <= 0 or x.rows % n:
        raise ShapeError(f"{name}: {x.rows} rows do not split into blocks of {n}")
    return x.data.reshape(x.rows // n, n, x.cols)


def block_left_matmul(a, x, n):
    """For each consecutive block X_k of n rows, compute ``a @ X_k``."""
    a, x = as_matrix(a), as_matrix(x)
    if a.shape != (n, n):
        raise ShapeError(f"block_left_matmul: adjacency {a.shape} does not match block size {n}")
    A = a.data
    xb = _blocks(x, n, "block_left_matmul")
    out = np.matmul(A, xb)

    def backward(g):
        gb = g.reshape(xb.shape)
        ga = np.matmul(gb, xb.transpose(0, 2, 1)).sum(axis=0)
        gx = np.matmul(A.T, gb).reshape(x.shape)
        return ga, gx

    return _emit("block_left_matmul", out.reshape(x.shape), (a, x), backward)


def block_mean(x, n):
    """Mean of each consecutive block of n rows (the 1/n 1^T pooling)."""
    x = as_matrix(x)
    xb = _blocks(x, n, "block_mean")
    shape = x.shape

    def backward(g):
        return (np.repeat(g[:, None, :] / n, n, axis=1).reshape(shape),)

    return _emit("block_mean", xb.mean(axis=1), (x,), backward)
