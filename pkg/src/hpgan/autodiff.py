"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every backward rule (except the fused GRU cell) is written in terms of the
same tensor ops it differentiates. Running the backward pass with
``create_graph=True`` therefore records the gradient computation as graph
nodes, which is what makes the gradient-penalty term differentiable with
respect to critic weights.
"""
from __future__ import annotations

import contextlib
import threading
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels

LEAKY_SLOPE = 0.2


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class SecondOrderError(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def _grad_mode(flag: bool):
    prev = is_grad_enabled()
    _state.enabled = flag
    try:
        yield
    finally:
        _state.enabled = prev


def no_grad():
    """Context manager: ops inside build no graph."""
    return _grad_mode(False)


def enable_grad():
    return _grad_mode(True)


class Tensor:
    """An immutable float64 array plus the graph edge that produced it."""

    __slots__ = ("data", "requires_grad", "op", "name", "_parents", "_backward", "_double", "_branch")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self.name = name
        self._parents: tuple = ()
        self._backward = None
        self._double = True
        self._branch = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        t = Tensor.__new__(Tensor)
        t.data = self.data
        t.requires_grad = False
        t.op = "leaf"
        t.name = self.name
        t._parents = ()
        t._backward = None
        t._double = True
        t._branch = None
        return t

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __repr__(self):
        tag = f", op={self.op}" if self.op != "leaf" else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def primitive(data, op: str, parents: Sequence[Tensor], backward: Callable, double: bool = True) -> Tensor:
    """Wrap ``data`` as the output of ``op``.

    ``backward(g)`` receives the upstream gradient (a Tensor) and returns
    one gradient Tensor (or None) per parent. ``double=False`` marks rules
    that only work on raw arrays and cannot be differentiated again.
    """
    t = Tensor.__new__(Tensor)
    t.data = data
    t.op = op
    t.name = None
    t._double = double
    t._branch = None
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        t.requires_grad = True
        t._parents = tuple(parents)
        t._backward = backward
    else:
        t.requires_grad = False
        t._parents = ()
        t._backward = None
    return t


def _bshape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ------------------------------------------------------------------ shape plumbing


def sum_to(a: Tensor, shape: tuple) -> Tensor:
    """Sum a broadcast result back down to ``shape``."""
    shape = tuple(shape)
    if a.shape == shape:
        return a
    lead = len(a.shape) - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and a.shape[i + lead] != 1
    )
    data = a.data.sum(axis=axes, keepdims=True)
    data = data.reshape(shape)
    return primitive(data, "sum_to", (a,), lambda g: (broadcast_to(g, a.shape),))


def broadcast_to(a: Tensor, shape: tuple) -> Tensor:
    shape = tuple(shape)
    if a.shape == shape:
        return a
    data = np.broadcast_to(a.data, shape).copy()
    return primitive(data, "broadcast_to", (a,), lambda g: (sum_to(g, a.shape),))


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {tuple(shape)}") from None
    return primitive(data, "reshape", (a,), lambda g: (reshape(g, a.shape),))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")
    return primitive(a.data.T.copy(), "transpose", (a,), lambda g: (transpose(g),))


# ------------------------------------------------------------------ arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("add", a, b)
    return primitive(
        a.data + b.data, "add", (a, b),
        lambda g: (sum_to(g, a.shape), sum_to(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("subtract", a, b)
    return primitive(
        a.data - b.data, "subtract", (a, b),
        lambda g: (sum_to(g, a.shape), sum_to(neg(g), b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return primitive(-a.data, "neg", (a,), lambda g: (neg(g),))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("multiply", a, b)

    def backward(g):
        ga = sum_to(mul(g, b), a.shape) if a.requires_grad else None
        gb = sum_to(mul(g, a), b.shape) if b.requires_grad else None
        return ga, gb

    return primitive(a.data * b.data, "multiply", (a, b), backward)


def scale(a, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    a = as_tensor(a)
    c = float(c)
    return primitive(a.data * c, "scale", (a,), lambda g: (scale(g, c),))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("divide", a, b)
    out_data = a.data / b.data

    def backward(g):
        ga = sum_to(div(g, b), a.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = sum_to(neg(div(mul(g, a), mul(b, b))), b.shape)
        return ga, gb

    return primitive(out_data, "divide", (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = matmul(g, transpose(b)) if a.requires_grad else None
        gb = matmul(transpose(a), g) if b.requires_grad else None
        return ga, gb

    return primitive(a.data @ b.data, "matmul", (a, b), backward)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: no inputs")
    nd = ts[0].data.ndim
    ax = axis % nd if nd else 0
    for t in ts[1:]:
        if t.data.ndim != nd or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, ts[0].shape)) if i != ax
        ):
            raise ShapeError(f"concat: incompatible shapes {ts[0].shape} and {t.shape}")
    data = np.concatenate([t.data for t in ts], axis=ax)
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def backward(g):
        out = []
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if not t.requires_grad:
                out.append(None)
                continue
            idx = [slice(None)] * nd
            idx[ax] = slice(int(lo), int(hi))
            out.append(getitem(g, tuple(idx)))
        return tuple(out)

    return primitive(data, "concat", ts, backward)


def _is_basic(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, type(Ellipsis), type(None))) for i in items)


def getitem(a: Tensor, idx) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data[idx]
    except IndexError as exc:
        raise ShapeError(f"slice: {exc} for shape {a.shape}") from None
    data = np.array(data, dtype=np.float64)
    return primitive(data, "slice", (a,), lambda g: (_scatter(g, idx, a.shape),))


def _scatter(g: Tensor, idx, shape) -> Tensor:
    out = np.zeros(shape)
    if _is_basic(idx):
        out[idx] = g.data
    else:
        np.add.at(out, idx, g.data)
    return primitive(out, "scatter", (g,), lambda gg: (getitem(gg, idx),))


# ------------------------------------------------------------------ reductions


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def _expand(g: Tensor, shape, axes, keepdims) -> Tensor:
    if not keepdims:
        kshape = tuple(1 if i in axes else s for i, s in enumerate(shape))
        g = reshape(g, kshape)
    return broadcast_to(g, shape)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.data.ndim)
    data = np.asarray(a.data.sum(axis=axes, keepdims=keepdims), dtype=np.float64)
    return primitive(data, "sum", (a,), lambda g: (_expand(g, a.shape, axes, keepdims),))


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.data.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return scale(sum_(a, axes, keepdims), 1.0 / count)


# ------------------------------------------------------------------ elementwise


def square(a) -> Tensor:
    a = as_tensor(a)
    return primitive(a.data * a.data, "square", (a,), lambda g: (mul(g, scale(a, 2.0)),))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError(f"sqrt: negative input (min {a.data.min()!r})")
    out_data = np.sqrt(a.data)
    out = None

    def backward(g):
        return (div(g, scale(out, 2.0)),)

    out = primitive(out_data, "sqrt", (a,), backward)
    return out


def _masked(g, mask) -> Tensor:
    # a second-order graph keeps only this product, so it carries the mask too
    out = mul(g, mask)
    if out.requires_grad:
        out._branch = mask
    return out


def abs_(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    out = primitive(np.abs(a.data), "abs", (a,), lambda g: (_masked(g, sign),))
    out._branch = sign
    return out


def maximum(a, c: float) -> Tensor:
    """Elementwise ``max(a, c)`` for a constant ``c``; ties send no gradient."""
    a = as_tensor(a)
    mask = (a.data > c).astype(np.float64)
    out = primitive(np.maximum(a.data, c), "maximum", (a,), lambda g: (_masked(g, mask),))
    out._branch = mask
    return out


def minimum(a, c: float) -> Tensor:
    return neg(maximum(neg(a), -c))


def clip(a, lo: float, hi: float) -> Tensor:
    return minimum(maximum(a, lo), hi)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError(f"log: non-positive input (min {a.data.min()!r})")
    return primitive(np.log(a.data), "log", (a,), lambda g: (div(g, a),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = None

    def backward(g):
        return (mul(g, mul(out, sub(1.0, out))),)

    out = primitive(_kernels._sigmoid_np(a.data), "sigmoid", (a,), backward)
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = None

    def backward(g):
        return (mul(g, sub(1.0, square(out))),)

    out = primitive(np.tanh(a.data), "tanh", (a,), backward)
    return out


def leaky_relu(a, slope: float = LEAKY_SLOPE) -> Tensor:
    a = as_tensor(a)
    factor = np.where(a.data > 0, 1.0, slope)
    out = primitive(a.data * factor, "leaky_relu", (a,), lambda g: (_masked(g, factor),))
    out._branch = factor
    return out


def norm(a, axis=None, ord: float = 2, keepdims: bool = False) -> Tensor:
    """Vector p-norm over ``axis`` (all axes by default).

    The gradient at a zero vector is defined as zero. Only ``ord=2`` is
    twice differentiable.
    """
    a = as_tensor(a)
    p = float(ord)
    if p < 1:
        raise DomainError(f"norm: order must be >= 1, got {ord}")
    axes = _norm_axes(axis, a.data.ndim)
    if p == 2:
        out_data = np.sqrt(np.sum(a.data * a.data, axis=axes, keepdims=keepdims))
    else:
        out_data = np.sum(np.abs(a.data) ** p, axis=axes, keepdims=keepdims) ** (1.0 / p)
    out_data = np.asarray(out_data, dtype=np.float64)
    zero = (out_data == 0).astype(np.float64)
    out = None

    if p == 2:
        def backward(g):
            safe = add(out, zero)
            return (mul(a, _expand(div(g, safe), a.shape, axes, keepdims)),)
        double = True
    else:
        def backward(g):
            n = out_data + zero
            ratio = np.abs(a.data) / _expand_arr(n, a.shape, axes, keepdims)
            local = np.sign(a.data) * ratio ** (p - 1.0)
            return (mul(_expand(g, a.shape, axes, keepdims), local),)
        double = False

    out = primitive(out_data, "norm", (a,), backward, double=double)
    return out


def _expand_arr(x, shape, axes, keepdims):
    if not keepdims:
        x = x.reshape(tuple(1 if i in axes else s for i, s in enumerate(shape)))
    return np.broadcast_to(x, shape)


# ------------------------------------------------------------------ fused GRU step


def gru_cell(x, h, w_x, w_h, b) -> Tensor:
    """One batched GRU step as a single graph node.

    Gate blocks are laid out ``[update | reset | candidate]`` along the
    last axis of ``w_x`` (I, 3H), ``w_h`` (H, 3H) and ``b`` (3H,):

        u = sigmoid(x W_u + h U_u + b_u)
        r = sigmoid(x W_r + h U_r + b_r)
        c = tanh(x W_c + (r * h) U_c + b_c)
        h' = (1 - u) * h + u * c

    First-order only.
    """
    x, h, w_x, w_h, b = (as_tensor(t) for t in (x, h, w_x, w_h, b))
    B, I = x.shape
    H = h.shape[1]
    if w_x.shape != (I, 3 * H) or w_h.shape != (H, 3 * H) or b.shape != (3 * H,) or h.shape[0] != B:
        raise ShapeError(
            f"gru_cell: incompatible shapes x{x.shape} h{h.shape} "
            f"w_x{w_x.shape} w_h{w_h.shape} b{b.shape}"
        )
    k = _kernels.active
    xd, hd, wxd, whd = x.data, h.data, w_x.data, w_h.data
    gx = xd @ wxd + b.data
    u, r, rh = k.gru_gates(gx, hd @ whd[:, : 2 * H], hd)
    c, h_new = k.gru_candidate(gx, rh @ whd[:, 2 * H:], u, hd)

    def backward(g):
        gd = np.ascontiguousarray(g.data)
        dpre_c, dpre_u, dh = k.gru_backward_a(gd, u, c, hd)
        drh = dpre_c @ whd[:, 2 * H:].T
        dpre_r, dh = k.gru_backward_b(drh, r, hd, dh)
        dur = np.concatenate([dpre_u, dpre_r], axis=1)
        dh = dh + dur @ whd[:, : 2 * H].T
        dgx = np.concatenate([dur, dpre_c], axis=1)
        dwh = np.concatenate([hd.T @ dur, rh.T @ dpre_c], axis=1)
        return (
            Tensor(dgx @ wxd.T) if x.requires_grad else None,
            Tensor(dh) if h.requires_grad else None,
            Tensor(xd.T @ dgx) if w_x.requires_grad else None,
            Tensor(dwh) if w_h.requires_grad else None,
            Tensor(dgx.sum(axis=0)) if b.requires_grad else None,
        )

    return primitive(h_new, "gru_cell", (x, h, w_x, w_h, b), backward, double=False)


OPS: dict[str, Callable] = {
    "add": add,
    "subtract": sub,
    "multiply": mul,
    "scale": scale,
    "divide": div,
    "neg": neg,
    "matmul": matmul,
    "transpose": transpose,
    "concat": lambda *ts, axis=-1: concat(ts, axis),
    "slice": getitem,
    "reshape": reshape,
    "sum": sum_,
    "mean": mean,
    "sqrt": sqrt,
    "square": square,
    "abs": abs_,
    "maximum": maximum,
    "log": log,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "leaky_relu": leaky_relu,
    "norm": norm,
    "gru_cell": gru_cell,
}


def primitive_forward(op_tag: str, *inputs, **kwargs) -> Tensor:
    try:
        fn = OPS[op_tag]
    except KeyError:
        raise ValueError(f"unknown op {op_tag!r}") from None
    return fn(*inputs, **kwargs)


# ------------------------------------------------------------------ backward


def topological_order(root: Tensor) -> list:
    """Nodes reachable from ``root`` that require grad, inputs first."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def grad(root: Tensor, inputs: Sequence[Tensor], create_graph: bool = False) -> list:
    """Gradients of scalar ``root`` with respect to ``inputs``.

    Inputs absent from the graph get zero tensors. With ``create_graph`` the
    returned tensors are themselves graph nodes.
    """
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    grads: dict[int, Tensor] = {}
    if root.requires_grad:
        grads[id(root)] = Tensor(np.ones_like(root.data))
        with _grad_mode(create_graph):
            for node in reversed(topological_order(root)):
                g = grads.get(id(node))
                if g is None or node._backward is None:
                    continue
                if create_graph and not node._double:
                    raise SecondOrderError(
                        f"op {node.op!r} has no differentiable backward rule"
                    )
                for p, pg in zip(node._parents, node._backward(g)):
                    if pg is None or not p.requires_grad:
                        continue
                    prev = grads.get(id(p))
                    grads[id(p)] = pg if prev is None else add(prev, pg)
    out = []
    for t in inputs:
        g = grads.get(id(t))
        out.append(g if g is not None else Tensor(np.zeros_like(t.data)))
    return out


def backward(root: Tensor, wrt: Mapping[str, Tensor]) -> dict:
    """GradientMap: parameter name -> gradient array of the parameter's shape."""
    names = list(wrt)
    gs = grad(root, [wrt[k] for k in names])
    return {k: g.data for k, g in zip(names, gs)}


def input_gradient(root: Tensor, wrt_input: Tensor) -> Tensor:
    """Differentiable gradient of ``root`` with respect to an input tensor."""
    if not is_grad_enabled():
        raise SecondOrderError("input_gradient needs grad mode enabled (called under no_grad)")
    if not wrt_input.requires_grad:
        raise SecondOrderError("input_gradient: input is not tracked (requires_grad=False)")
    return grad(root, [wrt_input], create_graph=True)[0]


# ------------------------------------------------------------------ checks


def branch_signature(root: Tensor) -> list:
    """Branch masks of every piecewise node (abs, maximum, leaky-relu, and
    their backward products) in the graph of ``root``, in topological order."""
    if not root.requires_grad:
        return []
    return [n._branch for n in topological_order(root) if n._branch is not None]


def _same_branches(a: list, b: list) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def numeric_gradient(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-6,
                     stencil: int = 2, guard: bool = False) -> list:
    """Central differences of ``f()`` with respect to each parameter entry.

    ``stencil=2`` is the usual (f(p+h) - f(p-h)) / 2h. ``stencil=4`` adds the
    +-2h points for an O(h^4) estimate, which tolerates a larger h and so
    keeps rounding noise down on entries whose gradient is tiny.

    With ``guard`` a coordinate whose probes land on a different side of a
    kink than the base point is retried with half the step (up to 20 times).
    """
    if stencil == 2:
        taps = ((1.0, 1.0 / 2.0),)
    elif stencil == 4:
        taps = ((1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0))
    else:
        raise ValueError(f"stencil must be 2 or 4, got {stencil}")
    base_sig = branch_signature(f()) if guard else None
    out = []
    for p in params:
        base = p.data
        g = np.zeros_like(base)
        for i in range(base.size):
            step = h
            for _ in range(20):
                acc, clean = 0.0, True
                try:
                    for k, w in taps:
                        for sgn in (1.0, -1.0):
                            probe = base.copy()
                            probe.reshape(-1)[i] += sgn * k * step
                            p.data = probe
                            val = f()
                            acc += sgn * w * _scalar(val)
                            if guard and clean:
                                clean = _same_branches(base_sig, branch_signature(val))
                finally:
                    p.data = base
                if clean:
                    break
                step /= 2.0
            g.reshape(-1)[i] = acc / step
        out.append(g)
    return out


def _scalar(t: Tensor) -> float:
    if t.data.size != 1:
        raise ShapeError(f"finite difference: function must be scalar, got shape {t.shape}")
    return float(t.data.reshape(-1)[0])


def relative_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b) / denom))


def finite_difference_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-6,
                            stencil: int = 2, guard: bool = False) -> float:
    """Worst relative error between analytic and central-difference gradients."""
    if h <= 0:
        raise ValueError("h must be positive")
    root = f()
    _scalar(root)
    analytic = grad(root, params)
    numeric = numeric_gradient(f, params, h, stencil, guard)
    return max((relative_error(a.data, n) for a, n in zip(analytic, numeric)), default=0.0)


def first_nonfinite(root: Tensor):
    """First node in topological order whose value is NaN/Inf, else None."""
    if not root.requires_grad:
        return None if root.is_finite() else root
    for node in topological_order(root):
        if not node.is_finite():
            return node
    return None if root.is_finite() else root


def assert_finite(root: Tensor, what: str = "value") -> None:
    bad = first_nonfinite(root)
    if bad is not None:
        label = bad.name or bad.op
        raise NonFiniteError(f"non-finite {what}: first offending node {label!r} shape {bad.shape}")


def assert_finite_grads(grads: Mapping[str, np.ndarray], what: str = "gradient") -> None:
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite {what} for parameter {k!r}")
