"""
Reverse-mode tape.

Operations in ``src.numcore.ops`` append a node (output slot, input slots,
backward closure) whenever one of their inputs lives on a tape. Replaying the
nodes in reverse order accumulates gradients into the slots of the leaves
registered with ``watch``.

A tape belongs to one worker; it is not thread-safe.
"""

import numpy as np

from src.numcore.errors import ContractError, ShapeError
from src.numcore.matrix import Matrix


class _Node:
    __slots__ = ("out_slot", "in_slots", "backward", "name")

    def __init__(self, out_slot, in_slots, backward, name):
        self.out_slot = out_slot
        self.in_slots = in_slots
        self.backward = backward
        self.name = name


class Tape:
    def __init__(self):
        self._values = []
        self._nodes = []
        self._leaves = set()

    def __len__(self):
        return len(self._nodes)

    @property
    def operations(self):
        """Names of the recorded primitives, in forward order."""
        return [node.name for node in self._nodes]

    def _new_slot(self, value):
        self._values.append(value)
        return len(self._values) - 1

    def watch(self, value):
        """Register a leaf parameter and return it as a tracked Matrix."""
        arr = value.data if isinstance(value, Matrix) else np.asarray(value, dtype=np.float64)
        m = Matrix(arr)
        slot = self._new_slot(m.data)
        self._leaves.add(slot)
        return Matrix(m.data, tape=self, slot=slot)

    def record(self, value, inputs, backward, name):
        """Store ``value`` as the output of a primitive over ``inputs``.

        ``backward(grad_out)`` must return one gradient (or None) per input.
        """
        out = Matrix(value)
        slot = self._new_slot(out.data)
        in_slots = tuple(m._slot if m._tape is self else None for m in inputs)
        self._nodes.append(_Node(slot, in_slots, backward, name))
        return Matrix(out.data, tape=self, slot=slot)

    def gradient(self, output, params, seed=None):
        """Gradients of ``output`` with respect to each matrix in ``params``.

        ``output`` must be 1x1 unless ``seed`` gives the upstream gradient.
        Leaves that did not take part in the forward pass get exact zeros.
        """
        if output._tape is not self:
            raise ContractError("output was not computed on this tape")
        for p in params:
            if p._tape is not self or p._slot not in self._leaves:
                raise ContractError(f"{p!r} is not a leaf watched by this tape")
        if seed is None:
            if output.shape != (1, 1):
                raise ShapeError(f"gradient() needs a 1x1 output or an explicit seed, got {output.shape}")
            seed = np.ones((1, 1))
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != output.shape:
            raise ShapeError(f"seed shape {seed.shape} does not match output shape {output.shape}")

        grads = {output._slot: seed}
        for node in reversed(self._nodes):
            g = grads.pop(node.out_slot, None)
            if g is None:
                continue
            in_grads = node.backward(g)
            for slot, gi in zip(node.in_slots, in_grads):
                if slot is None or gi is None:
                    continue
                if slot in grads:
                    grads[slot] = grads[slot] + gi
                else:
                    grads[slot] = gi
        result = []
        for p in params:
            g = grads.get(p._slot)
            result.append(np.zeros(p.shape) if g is None else np.array(g, dtype=np.float64))
        return result


def common_tape(*inputs):
    """The tape shared by the tracked inputs, or None when nothing is tracked."""
    tape = None
    for m in inputs:
        if m._tape is None:
            continue
        if tape is None:
            tape = m._tape
        elif m._tape is not tape:
            raise ContractError("operands live on different tapes")
    return tape
