"""Counter-based random streams and the draw tally."""

import threading

import numpy as np


class DrawCounter:
    """Thread-safe tally of scalar random draws."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, n):
        with self._lock:
            self._count += int(n)

    @property
    def count(self):
        with self._lock:
            return self._count

    def reset(self):
        with self._lock:
            self._count = 0


def make_generator(seed, step=0, stream=0):
    """Philox generator keyed by ``seed``; ``step`` and ``stream`` select disjoint counter ranges."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, int(step), int(stream), 0]))
