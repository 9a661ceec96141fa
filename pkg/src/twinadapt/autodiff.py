"""Reverse-mode automatic differentiation on float64 numpy arrays.

The engine is a define-by-run tape: each forward pass records the operations
it executes, ``Tape.backward`` replays them in reverse and accumulates
vector-Jacobian products into per-node gradient buffers.  The operator set
is exactly what the sequence models in this package need.  Everything is
computed in float64; arrays are made contiguous on entry so BLAS-backed
matmuls run at full speed.

The one unusual operator is :func:`grad_reverse`, the hinge of adversarial
feature alignment: identity on the forward pass, multiplication of the
upstream gradient by ``-lam`` on the backward pass.  Its backward is a
single elementwise multiply so the sign flip is exact in floating point
(bitwise so for lam values like 0, 0.25 and 1 whose product path does not
round).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor",
    "Tape",
    "Parameter",
    "set_debug_checks",
    "add",
    "add_channel_bias",
    "concat_rows",
    "slice_rows",
    "pad1d",
    "linear",
    "conv1d",
    "relu",
    "global_avg_pool",
    "cross_entropy",
    "scale",
    "grad_reverse",
    "finite_diff_check",
]

# When enabled every op asserts its output is finite.  Off by default, the
# test suite switches it on; training code never pays the scan.
_DEBUG_CHECKS = False


def set_debug_checks(enabled: bool) -> None:
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


class Tensor:
    """A float64 array plus an optional link to the tape node that made it.

    Tensors without a tape are constants: ops accept them, fold them into
    the forward computation, and propagate no gradient to them.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: "Tape | None" = None, node_id: int | None = None):
        # asarray with order="C", not ascontiguousarray: the latter would
        # silently promote scalar (0-d) results to shape (1,).
        arr = np.asarray(data, dtype=np.float64, order="C")
        self.data = arr
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tracked = "tracked" if self.tape is not None else "constant"
        return f"Tensor(shape={self.data.shape}, {tracked})"


class Parameter:
    """A trainable tensor with a persistent gradient buffer.

    ``value`` is a constant Tensor (re-attached to a fresh tape each step by
    the training loop), ``grad`` is plain storage the loop writes into after
    backward and the optimizer reads from.
    """

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, data):
        self.name = name
        self.value = Tensor(data)
        self.grad = np.zeros_like(self.value.data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.data.shape

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class _Node:
    __slots__ = ("parents", "vjp", "shape")

    def __init__(self, parents, vjp, shape):
        self.parents = parents  # tuple of node ids, aligned with vjp output
        self.vjp = vjp  # upstream grad -> tuple of parent grads (or None per parent)
        self.shape = shape


class Tape:
    """Record of one forward pass, replayed in reverse by ``backward``."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._grads: list[np.ndarray | None] | None = None

    def __len__(self) -> int:
        return len(self._nodes)

    def variable(self, data) -> Tensor:
        """Register a leaf the tape will differentiate with respect to."""
        t = Tensor(data, self, len(self._nodes))
        self._nodes.append(_Node((), None, t.data.shape))
        return t

    def _record(self, parents: tuple[int, ...], vjp, out: np.ndarray) -> Tensor:
        t = Tensor(out, self, len(self._nodes))
        self._nodes.append(_Node(parents, vjp, t.data.shape))
        return t

    def backward(self, root: Tensor) -> None:
        """Accumulate d(root)/d(node) for every node reachable from root.

        Gradient buffers add across fan-out: a tensor consumed by several
        downstream ops receives the sum of their contributions.
        """
        if root.tape is not self:
            raise ValueError("backward root does not belong to this tape")
        if root.data.shape != ():
            raise ValueError(
                f"backward requires a scalar root, got shape {root.data.shape}"
            )
        grads: list[np.ndarray | None] = [None] * len(self._nodes)
        grads[root.node_id] = np.ones((), dtype=np.float64)
        for nid in range(root.node_id, -1, -1):
            g = grads[nid]
            if g is None:
                continue
            node = self._nodes[nid]
            if node.vjp is None:  # leaf
                continue
            parent_grads = node.vjp(g)
            for pid, pg in zip(node.parents, parent_grads):
                if pg is None:
                    continue
                if grads[pid] is None:
                    # Copy so later += never mutates an array an op returned
                    # by reference (identity-style backwards alias upstream).
                    grads[pid] = np.array(pg)
                else:
                    grads[pid] += pg
        self._grads = grads

    def grad(self, t: Tensor) -> np.ndarray | None:
        """Gradient buffer for ``t``, or None if backward never reached it."""
        if self._grads is None:
            raise ValueError("grad() called before backward()")
        if t.tape is not self:
            raise ValueError("tensor does not belong to this tape")
        return self._grads[t.node_id]


def _finish(out: np.ndarray, op: str) -> np.ndarray:
    if _DEBUG_CHECKS and not np.all(np.isfinite(out)):
        raise FloatingPointError(f"{op} produced a non-finite value")
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise ValueError("inputs were recorded on different tapes")
            tape = t.tape
    return tape


def _result(tape: Tape | None, inputs: tuple[Tensor, ...], out: np.ndarray, vjp) -> Tensor:
    """Wrap an op result, recording it when any input is tracked.

    ``vjp`` receives the upstream gradient plus a per-input needs mask and
    returns one gradient (or None) per input; untracked inputs are dropped.
    """
    if tape is None:
        return Tensor(out)
    tracked = tuple(t.node_id for t in inputs if t.tape is not None)
    needs = tuple(t.tape is not None for t in inputs)

    def node_vjp(g, _needs=needs, _vjp=vjp):
        full = _vjp(g, _needs)
        return tuple(fg for fg, n in zip(full, _needs) if n)

    return tape._record(tracked, node_vjp, out)


def add(a, b) -> Tensor:
    """Elementwise sum of two same-shape tensors (residual connections)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = _finish(a.data + b.data, "add")

    def vjp(g, needs):
        return (g if needs[0] else None, g if needs[1] else None)

    return _result(_tape_of(a, b), (a, b), out, vjp)


def add_channel_bias(x, b) -> Tensor:
    """Add a per-channel bias to a [batch, channels, len] tensor."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.ndim != 3 or b.ndim != 1 or b.data.shape[0] != x.data.shape[1]:
        raise ValueError(
            f"add_channel_bias shape mismatch: {x.data.shape} vs {b.data.shape}"
        )
    out = _finish(x.data + b.data[None, :, None], "add_channel_bias")

    def vjp(g, needs):
        gx = g if needs[0] else None
        gb = g.sum(axis=(0, 2)) if needs[1] else None
        return (gx, gb)

    return _result(_tape_of(x, b), (x, b), out, vjp)


def concat_rows(a, b) -> Tensor:
    """Stack two tensors along the leading (batch) axis."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[1:] != b.data.shape[1:]:
        raise ValueError(
            f"concat_rows trailing-shape mismatch: {a.data.shape} vs {b.data.shape}"
        )
    out = _finish(np.concatenate([a.data, b.data], axis=0), "concat_rows")
    n_a = a.data.shape[0]

    def vjp(g, needs):
        ga = g[:n_a] if needs[0] else None
        gb = g[n_a:] if needs[1] else None
        return (ga, gb)

    return _result(_tape_of(a, b), (a, b), out, vjp)


def slice_rows(x, start: int, stop: int) -> Tensor:
    """Contiguous slice along the leading (batch) axis."""
    x = _as_tensor(x)
    n = x.data.shape[0]
    if not (0 <= start < stop <= n):
        raise IndexError(f"slice_rows [{start}:{stop}] out of range for {n} rows")
    out = _finish(x.data[start:stop].copy(), "slice_rows")
    in_shape = x.data.shape

    def vjp(g, needs):
        gx = np.zeros(in_shape, dtype=np.float64)
        gx[start:stop] = g
        return (gx,)

    return _result(_tape_of(x), (x,), out, vjp)


def pad1d(x, left: int, right: int) -> Tensor:
    """Zero-pad the last axis of a [batch, channels, len] tensor.

    Left-only padding is how the temporal conv stays causal.
    """
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"pad1d expects a 3-d tensor, got shape {x.data.shape}")
    if left < 0 or right < 0:
        raise ValueError(f"pad1d amounts must be non-negative, got ({left}, {right})")
    out = _finish(np.pad(x.data, ((0, 0), (0, 0), (left, right))), "pad1d")
    length = x.data.shape[2]

    def vjp(g, needs):
        return (g[:, :, left:left + length],)

    return _result(_tape_of(x), (x,), out, vjp)


def linear(x, w, b) -> Tensor:
    """Affine map: out[i, j] = sum_k x[i, k] * w[j, k] + b[j]."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.ndim != 2 or w.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear shape mismatch: {x.data.shape} vs {w.data.shape}")
    if b.ndim != 1 or b.data.shape[0] != w.data.shape[0]:
        raise ValueError(f"linear bias mismatch: {w.data.shape} vs {b.data.shape}")
    out = _finish(x.data @ w.data.T + b.data, "linear")
    xd, wd = x.data, w.data

    def vjp(g, needs):
        gx = g @ wd if needs[0] else None
        gw = g.T @ xd if needs[1] else None
        gb = g.sum(axis=0) if needs[2] else None
        return (gx, gw, gb)

    return _result(_tape_of(x, w, b), (x, w, b), out, vjp)


def conv1d(x, kernel, stride: int = 1, padding: int = 0, dilation: int = 1) -> Tensor:
    """1-d cross-correlation of [batch, c_in, len] with [c_out, c_in, k].

    out[b, o, t] = sum_{c, j} x[b, c, t*stride + j*dilation - padding] * kernel[o, c, j]
    with out-of-range x treated as zero.  Implemented as a strided window
    view reshaped into one matmul per pass so the heavy lifting is BLAS.
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 3 or x.data.shape[1] != kernel.data.shape[1]:
        raise ValueError(
            f"conv1d shape mismatch: {x.data.shape} vs {kernel.data.shape}"
        )
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValueError(
            f"conv1d needs stride>=1, dilation>=1, padding>=0, got "
            f"({stride}, {padding}, {dilation})"
        )
    batch, c_in, length = x.data.shape
    c_out, _, k = kernel.data.shape
    span = dilation * (k - 1) + 1
    len_out = (length + 2 * padding - span) // stride + 1
    if len_out < 1:
        raise ValueError(
            f"conv1d output would be empty: len={length}, kernel={k}, "
            f"stride={stride}, padding={padding}, dilation={dilation}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    win = sliding_window_view(xp, span, axis=2)[:, :, ::stride, ::dilation]
    # [batch, c_in, len_out, k] -> [batch * len_out, c_in * k]
    cols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(
        batch * len_out, c_in * k
    )
    kmat = kernel.data.reshape(c_out, c_in * k)
    out = (cols @ kmat.T).reshape(batch, len_out, c_out).transpose(0, 2, 1)
    out = _finish(np.ascontiguousarray(out), "conv1d")
    len_padded = xp.shape[2]

    def vjp(g, needs):
        gmat = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(
            batch * len_out, c_out
        )
        gk = None
        if needs[1]:
            gk = (gmat.T @ cols).reshape(c_out, c_in, k)
        gx = None
        if needs[0]:
            gcols = (gmat @ kmat).reshape(batch, len_out, c_in, k)
            gxp = np.zeros((batch, c_in, len_padded), dtype=np.float64)
            last = (len_out - 1) * stride
            for j in range(k):
                off = j * dilation
                gxp[:, :, off:off + last + 1:stride] += gcols[:, :, :, j].transpose(
                    0, 2, 1
                )
            gx = gxp[:, :, padding:padding + length] if padding else gxp
        return (gx, gk)

    return _result(_tape_of(x, kernel), (x, kernel), out, vjp)


def relu(x) -> Tensor:
    """max(x, 0); the gradient at exactly 0 is 0."""
    x = _as_tensor(x)
    out = _finish(np.maximum(x.data, 0.0), "relu")
    mask = x.data > 0.0

    def vjp(g, needs):
        return (g * mask,)

    return _result(_tape_of(x), (x,), out, vjp)


def global_avg_pool(x) -> Tensor:
    """Mean over the time axis: [batch, channels, len] -> [batch, channels]."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"global_avg_pool expects a 3-d tensor, got {x.data.shape}")
    length = x.data.shape[2]
    out = _finish(x.data.mean(axis=2), "global_avg_pool")

    def vjp(g, needs):
        return (np.repeat(g[:, :, None] / length, length, axis=2),)

    return _result(_tape_of(x), (x,), out, vjp)


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits).

    Computed as log-sum-exp minus the true logit with the row max
    subtracted first, so large logits cannot overflow.
    """
    logits = _as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy expects 2-d logits, got {logits.data.shape}")
    if labels.ndim != 1 or labels.shape[0] != logits.data.shape[0]:
        raise ValueError(
            f"cross_entropy label mismatch: {logits.data.shape} vs {labels.shape}"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"cross_entropy labels must be integers, got {labels.dtype}")
    n, c = logits.data.shape
    if labels.min() < 0 or labels.max() >= c:
        raise IndexError(
            f"cross_entropy label out of range [0, {c}): "
            f"min={labels.min()}, max={labels.max()}"
        )
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    out = _finish(np.asarray((lse - shifted[rows, labels]).mean()), "cross_entropy")
    softmax = np.exp(shifted)
    softmax /= softmax.sum(axis=1, keepdims=True)

    def vjp(g, needs):
        gz = softmax.copy()
        gz[rows, labels] -= 1.0
        gz *= float(g) / n
        return (gz,)

    return _result(_tape_of(logits), (logits,), out, vjp)


def scale(x, c: float) -> Tensor:
    """Multiply by a python float constant.

    Backward multiplies the upstream gradient by the same constant, with
    the same floating-point operation as grad_reverse's backward; tests
    lean on that equivalence because scale(s, -lam) has a value finite
    differences can probe while gradient reversal does not.
    """
    x = _as_tensor(x)
    c = float(c)
    out = _finish(c * x.data, "scale")

    def vjp(g, needs):
        return (c * g,)

    return _result(_tape_of(x), (x,), out, vjp)


def grad_reverse(x, lam: float) -> Tensor:
    """Identity forward; backward multiplies the upstream gradient by -lam.

    lam = 0 blocks the gradient entirely, lam = 1 is a pure sign flip.  The
    forward pass returns the input array unchanged (no copy, no rounding).
    """
    x = _as_tensor(x)
    lam = float(lam)
    out = _finish(x.data, "grad_reverse")
    neg_lam = -lam

    def vjp(g, needs):
        return (neg_lam * g,)

    return _result(_tape_of(x), (x,), out, vjp)


def finite_diff_check(fn, x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` maps a Tensor to a scalar Tensor.  Every element of ``x`` is
    perturbed by +/-eps; the relative error of coordinate i is
    |num - ana| / max(|num|, |ana|, 1e-8).
    """
    if not (0.0 < eps <= 1e-2):
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    x = np.asarray(x, dtype=np.float64)
    tape = Tape()
    xt = tape.variable(x)
    y = fn(xt)
    tape.backward(y)
    analytic = tape.grad(xt)
    if analytic is None:
        analytic = np.zeros_like(x)

    numeric = np.empty_like(x)
    flat = x.ravel()
    num_flat = numeric.ravel()
    probe = flat.copy()
    for i in range(flat.size):
        orig = probe[i]
        probe[i] = orig + eps
        f_plus = float(fn(Tensor(probe.reshape(x.shape))).data)
        probe[i] = orig - eps
        f_minus = float(fn(Tensor(probe.reshape(x.shape))).data)
        probe[i] = orig
        num_flat[i] = (f_plus - f_minus) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), 1e-8)
    return float((np.abs(numeric - analytic) / denom).max())
