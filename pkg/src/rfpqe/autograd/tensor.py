"""Dense tensors with reverse-mode differentiation.

Every differentiable operation appends a :class:`Node` stamped with a
monotonically increasing sequence number, so construction order is a valid
topological order and :func:`backward` simply walks the reachable nodes in
reverse sequence order.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionError, UsageError

_sequence = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@dataclass(eq=False)
class Node:
    op: str
    inputs: tuple["Tensor", ...]
    backward_fn: BackwardFn
    out_id: int = 0
    seq: int = field(default_factory=lambda: next(_sequence))


class Tensor:
    """An n-dimensional float array that can record the operations applied to it.

    The constructor always copies ``data``; two tensors never share a buffer.
    Integer and boolean inputs are promoted to float64.
    """

    __slots__ = ("data", "requires_grad", "grad", "_node", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        arr = np.array(data, dtype=dtype, copy=True)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._node: Node | None = None
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray, op: str, inputs: Sequence["Tensor"], backward_fn: BackwardFn) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        needs = is_grad_enabled() and any(t.requires_grad for t in inputs)
        out.requires_grad = needs
        out._node = Node(op, tuple(inputs), backward_fn, id(out)) if needs else None
        return out

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_non_scalar(self.shape)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data, requires_grad=self.requires_grad, dtype=dtype, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operators (implemented in ops) ----------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def sum(self):
        from . import ops
        return ops.sum(self)

    def mean(self):
        from . import ops
        return ops.mean(self)

    def backward(self) -> None:
        backward(self)


def _raise_non_scalar(shape):
    raise UsageError(f"tensor of shape {shape} is not a scalar")


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


class ComputationGraph:
    """The nodes reachable from an output, in construction order."""

    def __init__(self, nodes: list[Node]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "ComputationGraph":
        seen: set[int] = set()
        nodes: list[Node] = []
        stack = [output]
        while stack:
            t = stack.pop()
            node = t._node
            if node is None or id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node.inputs)
        nodes.sort(key=lambda n: n.seq)
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor, graph: ComputationGraph | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it."""
    if loss.data.ndim != 0:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if graph is None:
        graph = ComputationGraph.from_output(loss)

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    if loss._node is None and loss.requires_grad:
        leaves[id(loss)] = loss

    for node in reversed(graph.nodes):
        g_out = grads.pop(node.out_id, None)
        if g_out is None:
            continue
        in_grads = node.backward_fn(g_out)
        for t, g in zip(node.inputs, in_grads):
            if g is None or not t.requires_grad:
                continue
            if g.shape != t.shape:
                raise DimensionError(f"{node.op}: gradient shape {g.shape} != input shape {t.shape}")
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
            if t._node is None:
                leaves[key] = t

    for key, t in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        g = g.astype(t.data.dtype, copy=False)
        t.grad = g.copy() if t.grad is None else t.grad + g

