"""Reverse-mode differentiation over the small fixed graphs used by the model.

Values carried by a node may be python floats or numpy arrays (one entry per
dataset row, or one per parameter of a weight vector), so a single tape node
stands for a whole row-vectorized quantity.  The graph is rebuilt on every
evaluation; nothing is cached between calls.

Subgradient conventions: relu'(0) = 0 and d|x|/dx at 0 is 0, so weights
sitting exactly at zero stay there under L1 pressure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Value = float | np.ndarray


class Node:
    """One entry of the tape: a value, its accumulated adjoint, and parents."""

    __slots__ = ("value", "grad", "op", "parents", "_backward")

    def __init__(self, value: Value, op: str = "input", parents: tuple = ()):
        self.value = value
        self.grad: Value = 0.0
        self.op = op
        self.parents = parents
        self._backward: Callable[[], None] | None = None

    def __repr__(self) -> str:
        return f"Node(op={self.op}, value={self.value!r})"


def _accumulate(node: Node, g: Value) -> None:
    """Add an upstream adjoint to `node.grad`, reducing broadcast axes."""
    v = node.value
    if np.isscalar(v) or np.ndim(v) == 0:
        node.grad = node.grad + float(np.sum(g))
    else:
        g = np.asarray(g)
        if g.shape != np.shape(v):
            # value was broadcast against a larger operand; fold back
            g = np.broadcast_to(g, np.broadcast_shapes(g.shape, np.shape(v)))
            extra = g.ndim - np.ndim(v)
            if extra > 0:
                g = g.sum(axis=tuple(range(extra)))
        node.grad = node.grad + g


def wrap(value: Value) -> Node:
    """Lift a constant or parameter value onto the tape as an input node."""
    if isinstance(value, np.ndarray):
        value = value.astype(np.float64, copy=True)
    else:
        value = float(value)
    return Node(value, op="input")


def add(a: Node, b: Node | Value) -> Node:
    if isinstance(b, Node):
        out = Node(a.value + b.value, op="add", parents=(a, b))

        def back() -> None:
            _accumulate(a, out.grad)
            _accumulate(b, out.grad)

    else:
        out = Node(a.value + b, op="add", parents=(a,))

        def back() -> None:
            _accumulate(a, out.grad)

    out._backward = back
    return out


def mul(a: Node, b: Node | Value) -> Node:
    if isinstance(b, Node):
        out = Node(a.value * b.value, op="mul", parents=(a, b))

        def back() -> None:
            _accumulate(a, out.grad * b.value)
            _accumulate(b, out.grad * a.value)

    else:
        out = Node(a.value * b, op="mul", parents=(a,))

        def back() -> None:
            _accumulate(a, out.grad * b)

    out._backward = back
    return out


def sub(a: Node, b: Node | Value) -> Node:
    if isinstance(b, Node):
        return add(a, mul(b, -1.0))
    return add(a, -b)


def relu(a: Node) -> Node:
    mask = np.greater(a.value, 0.0)
    out = Node(np.where(mask, a.value, 0.0) if np.ndim(a.value) else (a.value if a.value > 0 else 0.0),
               op="relu", parents=(a,))

    def back() -> None:
        _accumulate(a, out.grad * mask)

    out._backward = back
    return out


def _sigmoid_value(x: Value) -> Value:
    # branch-stable: never exponentiates a large positive argument
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def sigmoid(a: Node) -> Node:
    sv = _sigmoid_value(a.value)
    out = Node(sv, op="sigmoid", parents=(a,))

    def back() -> None:
        _accumulate(a, out.grad * sv * (1.0 - sv))

    out._backward = back
    return out


def absval(a: Node) -> Node:
    out = Node(np.abs(a.value) if np.ndim(a.value) else abs(a.value), op="abs", parents=(a,))

    def back() -> None:
        _accumulate(a, out.grad * np.sign(a.value))

    out._backward = back
    return out


def log(a: Node, floor: float | None = None) -> Node:
    """Natural log; with `floor` set, the argument is clipped from below.

    The clipped region contributes zero gradient (the clip is flat there).
    """
    v = a.value
    if floor is not None:
        clipped = np.maximum(v, floor)
        out = Node(np.log(clipped), op="log", parents=(a,))

        def back() -> None:
            inside = np.greater_equal(v, floor)
            _accumulate(a, out.grad * inside / clipped)

    else:
        out = Node(np.log(v), op="log", parents=(a,))

        def back() -> None:
            _accumulate(a, out.grad / v)

    out._backward = back
    return out


def vsum(a: Node) -> Node:
    out = Node(float(np.sum(a.value)), op="sum", parents=(a,))

    def back() -> None:
        _accumulate(a, out.grad * np.ones_like(a.value))

    out._backward = back
    return out


def vmean(a: Node) -> Node:
    n = np.size(a.value)
    out = Node(float(np.mean(a.value)), op="mean", parents=(a,))

    def back() -> None:
        _accumulate(a, out.grad * np.full_like(a.value, 1.0 / n))

    out._backward = back
    return out


def dot(matrix: np.ndarray, w: Node) -> Node:
    """Fused affine read: constant (n, k) matrix times a length-k weight node.

    Equivalent to summing k mul nodes; fused so a whole layer is one tape entry.
    """
    out = Node(matrix @ w.value, op="dot", parents=(w,))

    def back() -> None:
        _accumulate(w, matrix.T @ np.asarray(out.grad))

    out._backward = back
    return out


def backward(root: Node) -> None:
    """Accumulate adjoints of every node reachable from a scalar root."""
    if np.ndim(root.value) != 0:
        raise ValueError("backward root must be scalar")
    topo: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    root.grad = 1.0
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()


def _kink_signature(root: Node) -> list[np.ndarray]:
    """Sign pattern of every relu/abs argument in the graph, in topo order."""
    signature = []
    visited: set[int] = set()
    stack = [root]
    order: list[Node] = []
    while stack:
        node = stack.pop()
        if id(node) in visited:
            continue
        visited.add(id(node))
        order.append(node)
        stack.extend(node.parents)
    for node in order:
        if node.op in ("relu", "abs"):
            signature.append(np.sign(np.atleast_1d(node.parents[0].value)))
    return signature


def _same_signature(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


@dataclass
class GradCheckReport:
    max_rel_error: float
    rel_errors: np.ndarray
    skipped: list[int] = field(default_factory=list)

    def __str__(self) -> str:
        return (f"max_rel_error={self.max_rel_error:.3e} over "
                f"{self.rel_errors.size} coords, skipped={self.skipped}")


def grad_check(build: Callable[[np.ndarray], tuple[Node, Sequence[Node]]],
               theta: np.ndarray, h: float = 1e-5) -> GradCheckReport:
    """Compare the tape gradient of a scalar graph against central differences.

    `build(theta)` must construct the graph and return (root, leaves) where the
    leaves are the input nodes whose concatenated values equal `theta` in
    order.  Coordinates whose +-h perturbation flips any relu/abs sign pattern
    sit on a kink and are reported as skipped rather than compared.
    """
    theta = np.asarray(theta, dtype=np.float64)
    root, leaves = build(theta)
    backward(root)
    base_sig = _kink_signature(root)
    auto = np.concatenate([np.atleast_1d(np.asarray(leaf.grad, dtype=np.float64))
                           for leaf in leaves])
    if auto.size != theta.size:
        raise ValueError("leaf gradients do not cover theta")

    rel = np.zeros(theta.size)
    skipped: list[int] = []
    for i in range(theta.size):
        tp = theta.copy()
        tp[i] += h
        tm = theta.copy()
        tm[i] -= h
        root_p, _ = build(tp)
        root_m, _ = build(tm)
        if not (_same_signature(base_sig, _kink_signature(root_p))
                and _same_signature(base_sig, _kink_signature(root_m))):
            skipped.append(i)
            continue
        central = (float(root_p.value) - float(root_m.value)) / (2.0 * h)
        rel[i] = abs(auto[i] - central) / (abs(central) + 1e-8)
    return GradCheckReport(float(np.max(rel)) if rel.size else 0.0, rel, skipped)


# plain-value helpers shared across the package

def sigmoid_value(x):
    """Numerically stable sigmoid on floats or arrays."""
    return _sigmoid_value(x)


def logit_value(p):
    """Inverse sigmoid; domain error outside (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("logit requires 0 < p < 1")
    out = np.log(p / (1.0 - p))
    if out.ndim == 0:
        return float(out)
    return out


def relu_value(x):
    return np.maximum(x, 0.0)
