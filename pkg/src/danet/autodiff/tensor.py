"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation returns a new :class:`Tensor` that remembers its parents and
a closure propagating the upstream gradient to them.  :func:`backward` walks
the recorded graph in reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from danet.errors import ContractError, NumericError, ShapeError

__all__ = [
    "Tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "affine",
    "relu",
    "sigmoid",
    "absolute",
    "sum",
    "mean",
    "reshape",
    "concat",
    "conv2d_valid",
    "conv2d_relu_mean",
    "backward",
]


def _check_finite(arr: np.ndarray, op: str) -> None:
    # a finite sum rules out NaN/Inf without a full boolean pass
    if arr.dtype.kind == "f" and np.isfinite(arr.sum()):
        return
    if not np.isfinite(arr).all():
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NumericError(f"{op}: {bad} non-finite value(s) in tensor of shape {arr.shape}")


class Tensor:
    """A node of the computation graph holding a float64 array.

    Leaves are created directly; interior nodes come out of the op functions
    in this module.  ``grad`` is populated by :func:`backward` for nodes with
    ``requires_grad`` set (directly or through a parent).
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf",
                 parents: tuple = (), backward_fn: Callable | None = None):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, op)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float("nan")

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division by a tensor is not supported")
        return scale(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, op: str, parents: tuple, backward_fn: Callable) -> Tensor:
    out = Tensor(data, op=op)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    # never mutate in place: the same array may be handed to several parents
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", a, b)

    def back(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(a.data + b.data, "add", (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", a, b)

    def back(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _node(a.data - b.data, "sub", (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", a, b)

    def back(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, "mul", (a, b), back)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a constant scalar."""
    factor = float(factor)

    def back(g):
        _accumulate(a, g * factor)

    return _node(a.data * factor, "scale", (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of ``(..., n, k)`` with a 2-D ``(k, m)`` matrix."""
    a, b = _as_tensor(a), _as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")

    def back(g):
        _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            a2 = a.data.reshape(-1, a.shape[-1])
            _accumulate(b, a2.T @ g.reshape(-1, b.shape[1]))

    return _node(a.data @ b.data, "matmul", (a, b), back)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``x @ weight + bias`` fused into a single graph node."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"affine: input {x.shape} does not match weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"affine: bias {bias.shape} does not match weight {weight.shape}")

    def back(g):
        _accumulate(x, g @ weight.data.T)
        if weight.requires_grad:
            x2 = x.data.reshape(-1, x.shape[-1])
            _accumulate(weight, x2.T @ g.reshape(-1, weight.shape[1]))
        if bias.requires_grad:
            _accumulate(bias, g.reshape(-1, weight.shape[1]).sum(axis=0))

    return _node(x.data @ weight.data + bias.data, "affine", (x, weight, bias), back)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def back(g):
        _accumulate(x, g * mask)

    return _node(np.where(mask, x.data, 0.0), "relu", (x,), back)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form avoids overflow in exp for large |x|
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def back(g):
        _accumulate(x, g * s * (1.0 - s))

    return _node(s, "sigmoid", (x,), back)


def absolute(x: Tensor) -> Tensor:
    """Elementwise ``|x|``; the subgradient at exactly 0 is taken as 0."""
    sign = np.sign(x.data)

    def back(g):
        _accumulate(x, g * sign)

    return _node(np.abs(x.data), "abs", (x,), back)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _node(np.sum(x.data, axis=axis, keepdims=keepdims), "sum", (x,), back)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g / count, x.shape))

    return _node(np.mean(x.data, axis=axis, keepdims=keepdims), "mean", (x,), back)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None

    def back(g):
        _accumulate(x, g.reshape(x.shape))

    return _node(out, "reshape", (x,), back)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis`` in the given order."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat along axis {axis}: incompatible shapes {shapes}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            _accumulate(t, piece)

    return _node(out, "concat", tuple(tensors), back)


def conv2d_valid(x: Tensor, kernels: Tensor) -> Tensor:
    """Stride-1 cross-correlation without padding.

    ``x`` is ``(H, W, Cin)`` or batched ``(N, H, W, Cin)``; ``kernels`` is
    ``(kh, kw, Cin, Cout)``.  The result has spatial extent
    ``(H - kh + 1, W - kw + 1)`` and ``Cout`` channels.
    """
    if x.ndim == 3:
        return reshape(conv2d_valid(reshape(x, (1,) + x.shape), kernels), _conv_out_shape(x.shape, kernels.shape))
    if x.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d_valid: expected NHWC input and 4-D kernels, got {x.shape} and {kernels.shape}")
    n, h, w, cin = x.shape
    kh, kw, kcin, cout = kernels.shape
    if kcin != cin:
        raise ShapeError(f"conv2d_valid: input channels of {x.shape} differ from kernels {kernels.shape}")
    if kh > h or kw > w:
        raise ShapeError(f"conv2d_valid: kernel {kernels.shape} larger than input {x.shape}")
    ho, wo = h - kh + 1, w - kw + 1
    # (N, Ho, Wo, Cin, kh, kw)
    patches = sliding_window_view(x.data, (kh, kw), axis=(1, 2))
    k_t = kernels.data.transpose(2, 0, 1, 3)  # (Cin, kh, kw, Cout)
    out = np.tensordot(patches, k_t, axes=([3, 4, 5], [0, 1, 2]))

    def back(g):
        if kernels.requires_grad:
            gk = np.tensordot(patches, g, axes=([0, 1, 2], [0, 1, 2]))  # (Cin, kh, kw, Cout)
            _accumulate(kernels, gk.transpose(1, 2, 0, 3))
        if x.requires_grad:
            gx = np.zeros(x.shape)
            for i in range(kh):
                for j in range(kw):
                    gx[:, i:i + ho, j:j + wo, :] += g @ kernels.data[i, j].T
            _accumulate(x, gx)

    return _node(out, "conv2d_valid", (x, kernels), back)


def conv2d_relu_mean(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """``mean(relu(conv2d_valid(x, kernels) + bias), axis=(1, 2))`` as one node.

    The full-size feature map is never kept on the graph; only the rectified
    map needed for the backward mask is held.  ``x`` must be NHWC; returns
    ``(N, Cout)``.
    """
    if x.ndim != 4 or kernels.ndim != 4 or x.shape[3] != kernels.shape[2]:
        raise ShapeError(f"conv2d_relu_mean: incompatible input {x.shape} and kernels {kernels.shape}")
    if bias.shape != (kernels.shape[3],):
        raise ShapeError(f"conv2d_relu_mean: bias {bias.shape} does not match kernels {kernels.shape}")
    n, h, w, cin = x.shape
    kh, kw, _, cout = kernels.shape
    if kh > h or kw > w:
        raise ShapeError(f"conv2d_relu_mean: kernel {kernels.shape} larger than input {x.shape}")
    ho, wo = h - kh + 1, w - kw + 1
    patches = sliding_window_view(x.data, (kh, kw), axis=(1, 2))
    maps = np.tensordot(patches, kernels.data.transpose(2, 0, 1, 3), axes=([3, 4, 5], [0, 1, 2]))
    maps += bias.data
    np.maximum(maps, 0.0, out=maps)
    count = ho * wo

    def back(g):
        g_maps = (maps > 0) * (g[:, None, None, :] / count)
        if kernels.requires_grad:
            gk = np.tensordot(patches, g_maps, axes=([0, 1, 2], [0, 1, 2]))
            _accumulate(kernels, gk.transpose(1, 2, 0, 3))
        if bias.requires_grad:
            _accumulate(bias, g_maps.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            gx = np.zeros(x.shape)
            for i in range(kh):
                for j in range(kw):
                    gx[:, i:i + ho, j:j + wo, :] += g_maps @ kernels.data[i, j].T
            _accumulate(x, gx)

    return _node(maps.mean(axis=(1, 2)), "conv2d_relu_mean", (x, kernels, bias), back)


def _conv_out_shape(xshape, kshape):
    if kshape[0] > xshape[0] or kshape[1] > xshape[1]:
        raise ShapeError(f"conv2d_valid: kernel {tuple(kshape)} larger than input {tuple(xshape)}")
    return (xshape[0] - kshape[0] + 1, xshape[1] - kshape[1] + 1, kshape[3])


def _topological_order(root: Tensor) -> list[Tensor]:
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, params: Sequence[Tensor] = ()) -> list[np.ndarray]:
    """Back-propagate from a scalar ``loss``.

    Gradients of all reachable nodes are left in their ``grad`` attribute.
    Returns the gradients of ``params`` in the order given, with zeros for
    parameters the loss does not depend on.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    for p in params:
        p.grad = None
    order = _topological_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones(loss.shape)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return [np.zeros(p.shape) if p.grad is None else p.grad for p in params]
