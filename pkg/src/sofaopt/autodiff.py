"""Reverse-mode automatic differentiation on a linear tape.

Nodes hold float64 numpy arrays, so one node can represent a whole grid of
values at once (a "tensorized" scalar). Every operation appends a node to the
tape in execution order; the backward sweep walks the tape in reverse, which
is a valid topological order by construction.

Subgradient conventions, chosen so constraint anchors at exactly zero do not
inject gradient: ``abs`` and ``relu`` have derivative 0 at 0, and elementwise
``maximum``/``minimum`` route the gradient to their first argument on ties.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_data(value):
    return np.asarray(value, dtype=np.float64)


class Tensor:
    """A value on a tape, with an adjoint accumulated during backward."""

    __slots__ = ("data", "tape", "node_id", "grad", "_parents", "_vjps")

    # keep numpy from absorbing us into object arrays; reflected operators run
    __array_ufunc__ = None

    def __init__(self, data, tape, parents=(), vjps=()):
        self.data = _as_data(data)
        self.tape = tape
        self.grad = None
        self._parents = parents
        self._vjps = vjps
        tape._register(self)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(node_id={self.node_id}, shape={self.data.shape})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Execution-ordered record of Tensor nodes for one evaluation."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes = []

    def _register(self, node):
        node.node_id = len(self.nodes)
        self.nodes.append(node)

    def tensor(self, data):
        """Create a leaf node (an independent variable)."""
        return Tensor(data, self)

    def backward(self, output, seed=None):
        """Accumulate adjoints of ``output`` into every upstream node.

        ``output`` is normally a scalar; for non-scalars a ``seed`` adjoint of
        the same shape must be supplied.
        """
        if output.tape is not self:
            raise ConfigError("output tensor does not belong to this tape")
        if seed is None:
            if output.size != 1:
                raise ConfigError("backward from a non-scalar requires a seed")
            seed = np.ones_like(output.data)
        for node in self.nodes:
            node.grad = None
        output.grad = _as_data(seed)
        for node in reversed(self.nodes[: output.node_id + 1]):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    parent.grad = parent.grad + contrib


def _lift(tape, value):
    """Tensor passthrough; raw numbers/arrays become constant operands."""
    if isinstance(value, Tensor):
        if value.tape is not tape:
            raise ConfigError("operands live on different tapes")
        return value, True
    return _as_data(value), False


def _binary(a, b, fwd, vjp_a, vjp_b):
    tape = a.tape if isinstance(a, Tensor) else b.tape
    a, a_var = _lift(tape, a)
    b, b_var = _lift(tape, b)
    av = a.data if a_var else a
    bv = b.data if b_var else b
    out = fwd(av, bv)
    parents, vjps = [], []
    if a_var:
        parents.append(a)
        vjps.append(lambda g, av=av, bv=bv, sh=av.shape: _unbroadcast(vjp_a(g, av, bv), sh))
    if b_var:
        parents.append(b)
        vjps.append(lambda g, av=av, bv=bv, sh=bv.shape: _unbroadcast(vjp_b(g, av, bv), sh))
    return Tensor(out, tape, tuple(parents), tuple(vjps))


def add(a, b):
    return _binary(a, b, lambda x, y: x + y,
                   lambda g, x, y: g,
                   lambda g, x, y: g)


def sub(a, b):
    return _binary(a, b, lambda x, y: x - y,
                   lambda g, x, y: g,
                   lambda g, x, y: -g)


def mul(a, b):
    return _binary(a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y,
                   lambda g, x, y: g * x)


def div(a, b):
    return _binary(a, b, lambda x, y: x / y,
                   lambda g, x, y: g / y,
                   lambda g, x, y: -g * x / (y * y))


def maximum(a, b):
    """Elementwise max; gradient goes to the first argument on ties."""
    return _binary(a, b, np.maximum,
                   lambda g, x, y: g * (x >= y),
                   lambda g, x, y: g * (x < y))


def minimum(a, b):
    """Elementwise min; gradient goes to the first argument on ties."""
    return _binary(a, b, np.minimum,
                   lambda g, x, y: g * (x <= y),
                   lambda g, x, y: g * (x > y))


def _unary(a, fwd, make_vjp):
    out = fwd(a.data)
    vjp = make_vjp(a.data, out)
    return Tensor(out, a.tape, (a,), (vjp,))


def neg(a):
    return _unary(a, lambda x: -x, lambda x, o: lambda g: -g)


def power(a, exponent):
    exponent = float(exponent)
    return _unary(a, lambda x: x ** exponent,
                  lambda x, o: lambda g: g * exponent * x ** (exponent - 1.0))


def absolute(a):
    # sign(0) == 0, so the subgradient at the kink is 0
    return _unary(a, np.abs, lambda x, o: lambda g: g * np.sign(x))


def relu(a):
    return _unary(a, lambda x: np.maximum(x, 0.0),
                  lambda x, o: lambda g: g * (x > 0.0))


def sin(a):
    return _unary(a, np.sin, lambda x, o: lambda g: g * np.cos(x))


def cos(a):
    return _unary(a, np.cos, lambda x, o: lambda g: -g * np.sin(x))


def tanh(a):
    return _unary(a, np.tanh, lambda x, o: lambda g: g * (1.0 - o * o))


def softplus(a):
    # log(1 + exp(x)) computed stably; derivative is the logistic sigmoid
    def fwd(x):
        return np.logaddexp(0.0, x)

    def make_vjp(x, o):
        sig = 1.0 / (1.0 + np.exp(-x))
        return lambda g: g * sig

    return _unary(a, fwd, make_vjp)


def exp(a):
    return _unary(a, np.exp, lambda x, o: lambda g: g * o)


def log(a):
    return _unary(a, np.log, lambda x, o: lambda g: g / x)


def sqrt(a):
    return _unary(a, np.sqrt, lambda x, o: lambda g: g * 0.5 / o)


def where(cond, a, b):
    """Select per element from two branches; ``cond`` is a plain bool array."""
    cond = np.asarray(cond, dtype=bool)
    return _binary(a, b, lambda x, y: np.where(cond, x, y),
                   lambda g, x, y: g * cond,
                   lambda g, x, y: g * ~cond)


def matmul(a, b):
    return _binary(a, b, lambda x, y: x @ y,
                   lambda g, x, y: g @ y.T,
                   lambda g, x, y: x.T @ g)


def total(a):
    """Sum of all elements, as a scalar tensor."""
    return _unary(a, lambda x: np.asarray(x.sum()),
                  lambda x, o: lambda g: np.broadcast_to(g, x.shape).copy())


def reshape(a, shape):
    orig = a.data.shape
    return _unary(a, lambda x: x.reshape(shape),
                  lambda x, o: lambda g: g.reshape(orig))


def take(a, indices):
    """Gather along the first axis; backward scatter-adds into the source."""
    indices = np.asarray(indices, dtype=np.intp)

    def make_vjp(x, o):
        def vjp(g):
            out = np.zeros_like(x)
            np.add.at(out, indices, g)
            return out

        return vjp

    return _unary(a, lambda x: x[indices], make_vjp)


def concatenate(tensors):
    """Join 1-d tensors; backward splits the adjoint at the same offsets."""
    if not tensors:
        raise ConfigError("concatenate needs at least one tensor")
    tape = tensors[0].tape
    sizes = [t.data.size for t in tensors]
    offsets = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in tensors])
    parents = tuple(tensors)
    vjps = tuple(
        (lambda g, s=offsets[i], e=offsets[i + 1]: g[s:e]) for i in range(len(tensors))
    )
    return Tensor(out, tape, parents, vjps)


def finite_difference(fn, x, step=1e-6):
    """Central-difference gradient of a scalar ``fn`` at ``x`` (test helper)."""
    x = _as_data(x).copy()
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        f_plus = fn(x)
        flat[i] = keep - step
        f_minus = fn(x)
        flat[i] = keep
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad
