"""Reverse-mode automatic differentiation over dense float64 arrays.

Computation is recorded dynamically (define-by-run): every operation on
`Value` objects appends a node holding its parents and a vector-Jacobian
closure. `backward()` walks the recorded graph once in reverse
topological order. Graphs are rebuilt on every forward pass, so shapes
may vary freely between passes.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = [True]
_F64 = np.dtype(np.float64)


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED[0]


@contextmanager
def no_grad():
    """Disable recording inside the block; forward values still computed."""
    prev = _GRAD_ENABLED[0]
    _GRAD_ENABLED[0] = False
    try:
        yield
    finally:
        _GRAD_ENABLED[0] = prev


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an operation."""


class Value:
    """A float64 array plus its position in the recorded computation."""

    __slots__ = ("data", "grad", "_parents", "_vjp")

    def __init__(self, data, parents=(), vjp=None):
        if type(data) is not np.ndarray or data.dtype != _F64:
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Value":
        return Value(self.data)

    def backward(self, seed=None) -> None:
        """Accumulate gradients of `self` into every reachable node.

        Each recorded node is visited exactly once, in reverse
        topological order; repeated calls re-accumulate into `.grad`.
        """
        topo: list[Value] = []
        seen: set[int] = set()
        stack: list[tuple[Value, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        if seed is None:
            seed = np.ones_like(self.data)
        self.grad = seed if self.grad is None else self.grad + seed
        # buffers allocated during this pass may be accumulated into in
        # place; anything else (vjp outputs, prior grads) is left intact
        owned: set[int] = set()
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            grad = node.grad
            for parent, fn in zip(node._parents, node._vjp):
                g = fn(grad)
                if g is None:
                    continue
                if parent.grad is None:
                    parent.grad = g
                elif id(parent.grad) in owned:
                    np.add(parent.grad, g, out=parent.grad)
                else:
                    parent.grad = parent.grad + g
                    owned.add(id(parent.grad))

    # operator sugar; implementations live in lanesim.grad.ops
    def __add__(self, other):
        return _ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _ops.sub(self, other)

    def __rsub__(self, other):
        return _ops.sub(other, self)

    def __mul__(self, other):
        return _ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _ops.div(self, other)

    def __rtruediv__(self, other):
        return _ops.div(other, self)

    def __neg__(self):
        return _ops.neg(self)

    def __matmul__(self, other):
        return _ops.matmul(self, other)

    def __pow__(self, p):
        return _ops.power(self, p)

    def __getitem__(self, idx):
        return _ops.getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return _ops.sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return _ops.mean(self, axis, keepdims)

    def reshape(self, *shape):
        return _ops.reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes=None):
        return _ops.transpose(self, axes)

    @property
    def T(self):
        return _ops.transpose(self, None)

    def __repr__(self):
        return f"Value(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


def data_of(x) -> np.ndarray:
    """The ndarray behind `x`, whether Value, array, or scalar."""
    if isinstance(x, Value):
        return x.data
    return np.asarray(x, dtype=np.float64)


def make(out_data, *pairs) -> Value:
    """Build an output node from (input, grad_fn) pairs.

    Only Value inputs become parents; constants contribute no node and
    their gradient closures are dropped. With recording disabled the
    bare result is returned. `_vjp` holds one gradient closure per
    recorded parent, in parent order.
    """
    if not _GRAD_ENABLED[0]:
        return Value(out_data)
    if len(pairs) == 1:
        inp, fn = pairs[0]
        if type(inp) is Value:
            return Value(out_data, (inp,), (fn,))
        return Value(out_data)
    if len(pairs) == 2:
        (a, fa), (b, fb) = pairs
        a_is = type(a) is Value
        b_is = type(b) is Value
        if a_is and b_is:
            return Value(out_data, (a, b), (fa, fb))
        if a_is:
            return Value(out_data, (a,), (fa,))
        if b_is:
            return Value(out_data, (b,), (fb,))
        return Value(out_data)
    parents = []
    fns = []
    for inp, fn in pairs:
        if isinstance(inp, Value):
            parents.append(inp)
            fns.append(fn)
    if not parents:
        return Value(out_data)
    return Value(out_data, tuple(parents), tuple(fns))


from . import ops as _ops  # noqa: E402  (cycle resolved at import time)
