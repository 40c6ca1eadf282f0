"""Reverse-mode automatic differentiation over dense 2-D float64 arrays.

Values are immutable `Tensor`s.  One forward pass is recorded on a `Tape` as
a topologically ordered list of `Node`s; `backward` walks the tape in reverse
and accumulates gradients through each node's local rule.

`input_gradient` builds the gradient of a scalar with respect to a chosen
leaf *as new tape nodes*, so a scalar derived from that gradient (the
feature-gradient penalty) can itself be backpropagated into parameters.
Only the operations that appear on a dense-network feature path support this
symbolic second pass; everything else raises `UnsupportedDoubleBackward`.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "UnsupportedDoubleBackward",
    "Tensor",
    "Node",
    "Tape",
    "matmul",
    "add",
    "sub",
    "add_bias",
    "leaky_relu",
    "abs",
    "log1p_abs",
    "square",
    "sqrt",
    "sqrt_shift",
    "mean_rows",
    "sum",
    "scale",
    "transpose",
    "mul_const",
    "broadcast_scalar",
    "broadcast_rowvec",
    "column",
    "bce_with_logits",
    "backward",
    "input_gradient",
    "grad_norm_sq_wrt_input",
]

_abs = abs
_sum = sum


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class UnsupportedDoubleBackward(RuntimeError):
    """The requested gradient path crosses an op without a symbolic rule."""


class Tensor:
    """Immutable (rows, cols) matrix of 64-bit floats."""

    __slots__ = ("data",)

    def __init__(self, data, validate: bool = True):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise ShapeError(f"tensor data must be 2-D, got ndim={arr.ndim}")
        if validate and not np.isfinite(arr).all():
            raise ValueError("tensor contains NaN or Inf entries")
        arr.flags.writeable = False
        self.data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Trusted path for op outputs: takes ownership, skips copy/validation.
        t = object.__new__(cls)
        arr.flags.writeable = False
        t.data = arr
        return t

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


class Node:
    """One value in the computation graph.

    `grad` accumulates d(root)/d(self) during `backward`.  `vjp` is the
    optional symbolic rule used by `input_gradient`: given a parent index and
    the upstream gradient *node*, it returns the contribution node.
    """

    __slots__ = ("tape", "id", "op", "value", "grad", "parents", "backward_rule", "vjp", "is_param")

    def __init__(self, tape, nid, op, value, parents, backward_rule, vjp=None, is_param=False):
        self.tape = tape
        self.id = nid
        self.op = op
        self.value = value
        self.grad = np.zeros(value.shape)
        self.parents = parents
        self.backward_rule = backward_rule
        self.vjp = vjp
        self.is_param = is_param

    def __repr__(self) -> str:
        return f"Node(id={self.id}, op={self.op}, shape={self.value.shape})"


class Tape:
    """Ordered record of one forward pass. Not thread-safe; one tape per step."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._consumed = False

    def _record(self, op, value, parents, backward_rule, vjp=None, is_param=False) -> Node:
        node = Node(self, len(self.nodes), op, value, parents, backward_rule, vjp, is_param)
        self.nodes.append(node)
        return node

    def leaf(self, value, param: bool = False) -> Node:
        """Add an input node. `value` is a Tensor or any 2-D array-like."""
        if not isinstance(value, Tensor):
            value = Tensor(value)
        return self._record("leaf", value, (), None, is_param=param)

    def constant(self, value) -> Node:
        return self.leaf(value, param=False)

    def reset(self) -> None:
        """Zero every gradient so the tape can be backpropagated again."""
        for node in self.nodes:
            node.grad[:] = 0.0
        self._consumed = False


def _same_tape(*nodes: Node) -> Tape:
    tape = nodes[0].tape
    for n in nodes[1:]:
        if n.tape is not tape:
            raise ValueError("operands recorded on different tapes")
    return tape


def matmul(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    if a.value.cols != b.value.rows:
        raise ShapeError(f"matmul: inner dims differ, {a.value.shape} @ {b.value.shape}")
    out_arr = a.value.data @ b.value.data

    def rule(g):
        a.grad += g @ b.value.data.T
        b.grad += a.value.data.T @ g

    def vjp(i, gnode):
        if i == 0:
            return matmul(gnode, transpose(b))
        return matmul(transpose(a), gnode)

    return tape._record("matmul", Tensor._wrap(out_arr), (a, b), rule, vjp)


def add(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: shapes differ, {a.value.shape} vs {b.value.shape}")
    out_arr = a.value.data + b.value.data

    def rule(g):
        a.grad += g
        b.grad += g

    def vjp(i, gnode):
        return gnode

    return tape._record("add", Tensor._wrap(out_arr), (a, b), rule, vjp)


def sub(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"sub: shapes differ, {a.value.shape} vs {b.value.shape}")
    out_arr = a.value.data - b.value.data

    def rule(g):
        a.grad += g
        b.grad -= g

    def vjp(i, gnode):
        return gnode if i == 0 else scale(gnode, -1.0)

    return tape._record("sub", Tensor._wrap(out_arr), (a, b), rule, vjp)


def add_bias(a: Node, bias: Node) -> Node:
    """Broadcast a 1-row bias over the rows of `a`."""
    tape = _same_tape(a, bias)
    if bias.value.rows != 1 or bias.value.cols != a.value.cols:
        raise ShapeError(f"add_bias: bias {bias.value.shape} does not broadcast over {a.value.shape}")
    out_arr = a.value.data + bias.value.data

    def rule(g):
        a.grad += g
        bias.grad += g.sum(axis=0, keepdims=True)

    def vjp(i, gnode):
        if i == 0:
            return gnode
        # column sums of the upstream gradient
        return scale(mean_rows(gnode), float(gnode.value.rows))

    return tape._record("add_bias", Tensor._wrap(out_arr), (a, bias), rule, vjp)


def leaky_relu(a: Node, slope: float) -> Node:
    v = a.value.data
    mask = np.where(v > 0.0, 1.0, slope)
    out_arr = v * mask

    def rule(g):
        a.grad += g * mask

    def vjp(i, gnode):
        # d/dv is piecewise constant; the mask is treated as data.
        return mul_const(gnode, mask)

    return a.tape._record("leaky_relu", Tensor._wrap(out_arr), (a,), rule, vjp)


def abs(a: Node) -> Node:  # noqa: A001 - mirrors np.abs on nodes
    v = a.value.data
    sign = np.sign(v)
    out_arr = np.abs(v)

    def rule(g):
        a.grad += g * sign

    return a.tape._record("abs", Tensor._wrap(out_arr), (a,), rule)


def log1p_abs(a: Node) -> Node:
    """Elementwise log(|a| + 1)."""
    v = a.value.data
    out_arr = np.log1p(np.abs(v))

    def rule(g):
        a.grad += g * (np.sign(v) / (1.0 + np.abs(v)))

    return a.tape._record("log1p_abs", Tensor._wrap(out_arr), (a,), rule)


def square(a: Node) -> Node:
    v = a.value.data
    out_arr = v * v

    def rule(g):
        a.grad += g * (2.0 * v)

    return a.tape._record("square", Tensor._wrap(out_arr), (a,), rule)


def sqrt(a: Node) -> Node:
    """Elementwise square root; entries must be >= 0 (gradient blows up at 0)."""
    v = a.value.data
    if np.any(v < 0.0):
        raise ValueError("sqrt: negative entries")
    out_arr = np.sqrt(v)

    def rule(g):
        a.grad += g / (2.0 * out_arr)

    return a.tape._record("sqrt", Tensor._wrap(out_arr), (a,), rule)


def sqrt_shift(a: Node) -> Node:
    """Elementwise sqrt(|a| + 1)."""
    v = a.value.data
    out_arr = np.sqrt(np.abs(v) + 1.0)

    def rule(g):
        a.grad += g * (np.sign(v) / (2.0 * out_arr))

    return a.tape._record("sqrt_shift", Tensor._wrap(out_arr), (a,), rule)


def mean_rows(a: Node) -> Node:
    """Column-wise mean over the batch rows: (n, m) -> (1, m)."""
    v = a.value.data
    n = v.shape[0]
    out_arr = v.mean(axis=0, keepdims=True)

    def rule(g):
        a.grad += g / n

    def vjp(i, gnode):
        return broadcast_rowvec(scale(gnode, 1.0 / n), n)

    return a.tape._record("mean_rows", Tensor._wrap(out_arr), (a,), rule, vjp)


def sum(a: Node) -> Node:  # noqa: A001 - mirrors np.sum on nodes
    """Sum of all entries: (n, m) -> (1, 1)."""
    v = a.value.data
    out_arr = np.array([[v.sum()]])
    shape = v.shape

    def rule(g):
        a.grad += g[0, 0]

    def vjp(i, gnode):
        return broadcast_scalar(gnode, shape[0], shape[1])

    return a.tape._record("sum", Tensor._wrap(out_arr), (a,), rule, vjp)


def scale(a: Node, c: float) -> Node:
    c = float(c)
    out_arr = a.value.data * c

    def rule(g):
        a.grad += g * c

    def vjp(i, gnode):
        return scale(gnode, c)

    return a.tape._record("scale", Tensor._wrap(out_arr), (a,), rule, vjp)


def transpose(a: Node) -> Node:
    out_arr = np.ascontiguousarray(a.value.data.T)

    def rule(g):
        a.grad += g.T

    return a.tape._record("transpose", Tensor._wrap(out_arr), (a,), rule)


def mul_const(a: Node, c: np.ndarray) -> Node:
    """Elementwise multiply by a constant array (not differentiated through)."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != a.value.shape:
        raise ShapeError(f"mul_const: shapes differ, {a.value.shape} vs {c.shape}")
    out_arr = a.value.data * c

    def rule(g):
        a.grad += g * c

    def vjp(i, gnode):
        return mul_const(gnode, c)

    return a.tape._record("mul_const", Tensor._wrap(out_arr), (a,), rule, vjp)


def broadcast_scalar(a: Node, rows: int, cols: int) -> Node:
    if a.value.shape != (1, 1):
        raise ShapeError(f"broadcast_scalar: expected (1, 1), got {a.value.shape}")
    out_arr = np.full((rows, cols), a.value.data[0, 0])

    def rule(g):
        a.grad += g.sum()

    return a.tape._record("broadcast_scalar", Tensor._wrap(out_arr), (a,), rule)


def broadcast_rowvec(a: Node, rows: int) -> Node:
    if a.value.rows != 1:
        raise ShapeError(f"broadcast_rowvec: expected a row vector, got {a.value.shape}")
    out_arr = np.repeat(a.value.data, rows, axis=0)

    def rule(g):
        a.grad += g.sum(axis=0, keepdims=True)

    return a.tape._record("broadcast_rowvec", Tensor._wrap(out_arr), (a,), rule)


def column(a: Node, j: int) -> Node:
    """Select one column: (n, m) -> (n, 1)."""
    if not 0 <= j < a.value.cols:
        raise ShapeError(f"column: index {j} out of range for {a.value.shape}")
    out_arr = a.value.data[:, j : j + 1].copy()

    def rule(g):
        a.grad[:, j : j + 1] += g

    return a.tape._record("column", Tensor._wrap(out_arr), (a,), rule)


def bce_with_logits(z: Node, targets: np.ndarray, weights: Optional[np.ndarray] = None) -> Node:
    """Weighted-mean binary cross-entropy from logits, numerically stable.

    Per row: max(z, 0) - z*t + log(1 + exp(-|z|)); gradient sigmoid(z) - t.
    `weights` selects/weights rows; the result is the weighted mean.
    """
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != z.value.shape:
        raise ShapeError(f"bce_with_logits: targets {t.shape} vs logits {z.value.shape}")
    if weights is None:
        w = np.ones_like(t)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != t.shape:
            raise ShapeError(f"bce_with_logits: weights {w.shape} vs logits {z.value.shape}")
    wsum = w.sum()
    if wsum <= 0.0:
        raise ValueError("bce_with_logits: weights sum to zero")
    v = z.value.data
    per_row = np.maximum(v, 0.0) - v * t + np.log1p(np.exp(-np.abs(v)))
    out_arr = np.array([[float((w * per_row).sum() / wsum)]])

    def rule(g):
        sig = 1.0 / (1.0 + np.exp(-v))
        z.grad += g[0, 0] * w * (sig - t) / wsum

    return z.tape._record("bce_with_logits", Tensor._wrap(out_arr), (z,), rule)


def backward(tape: Tape, root: Node) -> dict[int, Tensor]:
    """Backpropagate from a scalar root; returns {param node id: gradient}.

    After the call every node's `grad` holds d(root)/d(node).  The tape must
    be `reset()` before it can be backpropagated again.
    """
    if root.tape is not tape:
        raise ValueError("root was not recorded on this tape")
    if root.value.shape != (1, 1):
        raise ShapeError(f"backward root must be scalar (1, 1), got {root.value.shape}")
    if tape._consumed:
        raise RuntimeError("tape already backpropagated; call reset() first")
    tape._consumed = True
    root.grad[0, 0] = 1.0
    for node in reversed(tape.nodes[: root.id + 1]):
        if node.backward_rule is not None:
            node.backward_rule(node.grad)
    return {n.id: Tensor(n.grad) for n in tape.nodes if n.is_param}


def input_gradient(tape: Tape, root: Node, leaf: Node) -> Node:
    """Build d(root)/d(leaf) as tape nodes (root scalar, leaf an input node).

    The returned node has the leaf's shape and is itself differentiable, so a
    penalty computed from it reaches the parameters via the ordinary
    `backward` pass.
    """
    if root.tape is not tape or leaf.tape is not tape:
        raise ValueError("root/leaf not recorded on this tape")
    if root.value.shape != (1, 1):
        raise ShapeError(f"input_gradient root must be scalar, got {root.value.shape}")

    # Forward reachability from the leaf, over the tape prefix ending at root.
    depends = np.zeros(root.id + 1, dtype=bool)
    depends[leaf.id] = True
    for node in tape.nodes[leaf.id + 1 : root.id + 1]:
        for p in node.parents:
            if depends[p.id]:
                depends[node.id] = True
                break
    if not depends[root.id]:
        return tape.constant(np.zeros(leaf.value.shape))

    gmap: dict[int, Node] = {root.id: tape.constant([[1.0]])}
    for nid in range(root.id, leaf.id, -1):
        node = tape.nodes[nid]
        gnode = gmap.get(nid)
        if gnode is None:
            continue
        for i, p in enumerate(node.parents):
            if not depends[p.id]:
                continue
            if node.vjp is None:
                raise UnsupportedDoubleBackward(
                    f"op '{node.op}' has no symbolic gradient rule; "
                    "double-backward supports dense feature paths only"
                )
            contrib = node.vjp(i, gnode)
            prev = gmap.get(p.id)
            gmap[p.id] = contrib if prev is None else add(prev, contrib)
    return gmap[leaf.id]


def grad_norm_sq_wrt_input(tape: Tape, feature_mean: Node, input: Node) -> Node:  # noqa: A002
    """Squared L2 norm of the input-gradient of the summed mean feature vector.

    The mean feature vector (1, F) is reduced to a scalar by summing its
    components; the gradient of that scalar with respect to every entry of
    `input` is built symbolically, then squared and summed.  For the identity
    feature map on a single row this equals the input dimensionality.
    """
    if feature_mean.value.rows != 1:
        raise ShapeError(f"feature_mean must be a row vector, got {feature_mean.value.shape}")
    s = sum(feature_mean)
    g = input_gradient(tape, s, input)
    return sum(square(g))
