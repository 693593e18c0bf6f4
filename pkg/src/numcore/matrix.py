"""
Dense 2-D float64 matrix, the numeric carrier for data, parameters and gradients.

A Matrix is immutable: its buffer is a read-only numpy array. Matrices that
were produced on a Tape carry the tape and their value slot so that later
operations can be recorded against them.
"""

import numpy as np

from src.numcore.errors import ShapeError


class Matrix:
    __slots__ = ("_data", "_tape", "_slot")

    def __init__(self, data, tape=None, slot=None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ShapeError(f"Matrix needs 2-D data, got an array of shape {arr.shape}")
        arr.setflags(write=False)
        self._data = arr
        self._tape = tape
        self._slot = slot

    # -- construction -------------------------------------------------------

    @classmethod
    def zeros(cls, rows, cols):
        return cls(np.zeros((rows, cols)))

    @classmethod
    def ones(cls, rows, cols):
        return cls(np.ones((rows, cols)))

    @classmethod
    def eye(cls, n):
        return cls(np.eye(n))

    @classmethod
    def column(cls, values):
        return cls(np.asarray(values, dtype=np.float64).reshape(-1, 1))

    @classmethod
    def row(cls, values):
        return cls(np.asarray(values, dtype=np.float64).reshape(1, -1))

    # -- inspection ---------------------------------------------------------

    @property
    def data(self):
        """Read-only view of the row-major buffer."""
        return self._data

    @property
    def rows(self):
        return self._data.shape[0]

    @property
    def cols(self):
        return self._data.shape[1]

    @property
    def shape(self):
        return self._data.shape

    @property
    def tape(self):
        return self._tape

    @property
    def tracked(self):
        return self._tape is not None

    def numpy(self):
        """Writable copy of the values."""
        return self._data.copy()

    def item(self):
        if self._data.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 matrix, got {self.shape}")
        return float(self._data[0, 0])

    def detach(self):
        return Matrix(self._data)

    def __repr__(self):
        flag = ", tracked" if self.tracked else ""
        return f"Matrix({self.rows}x{self.cols}{flag})"

    def __len__(self):
        return self.rows

    # -- operators (recorded through src.numcore.ops) -----------------------

    def __matmul__(self, other):
        from src.numcore import ops
        return ops.matmul(self, _as_matrix(other))

    def __add__(self, other):
        from src.numcore import ops
        return ops.add(self, _as_matrix(other))

    def __radd__(self, other):
        from src.numcore import ops
        return ops.add(_as_matrix(other), self)

    def __sub__(self, other):
        from src.numcore import ops
        return ops.sub(self, _as_matrix(other))

    def __rsub__(self, other):
        from src.numcore import ops
        return ops.sub(_as_matrix(other), self)

    def __mul__(self, other):
        from src.numcore import ops
        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, _as_matrix(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        from src.numcore import ops
        if not np.isscalar(other):
            raise ShapeError("Matrix division is only defined by a scalar")
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self):
        from src.numcore import ops
        return ops.scale(self, -1.0)

    @property
    def T(self):
        from src.numcore import ops
        return ops.transpose(self)


def _as_matrix(value):
    if isinstance(value, Matrix):
        return value
    return Matrix(value)


def as_matrix(value):
    """Wrap arrays and scalars; pass matrices through unchanged."""
    return _as_matrix(value)
