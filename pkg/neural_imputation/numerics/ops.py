"""
Differentiable primitives.

Each op computes its value with numpy and registers a closure that maps the
output gradient to parent gradients. Only the ops the autoencoders need are
provided: elementwise arithmetic with broadcasting, the rectifier and gate
nonlinearities, reductions, channel concatenation, strided / dilated / causal
1-D convolution, repeat upsampling and the Gaussian negative log-likelihood.
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import NonFiniteError, ShapeMismatchError
from .tensor import Tensor, as_tensor, make_node

VAR_MIN = 1e-3
VAR_MAX = 1e3
LOG_2PI = math.log(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _push(parent: Tensor, grad: np.ndarray) -> None:
    if parent.requires_grad:
        parent.accumulate(_unbroadcast(grad, parent.shape))


# --- elementwise ----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        _push(a, grad)
        _push(b, grad)

    return make_node(a.data + b.data, (a, b), backward, 'add')


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        _push(a, grad)
        _push(b, -grad)

    return make_node(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        _push(a, grad * b.data)
        _push(b, grad * a.data)

    return make_node(a.data * b.data, (a, b), backward, 'mul')


def square(a: Tensor) -> Tensor:
    def backward(grad):
        _push(a, 2.0 * a.data * grad)

    return make_node(a.data * a.data, (a,), backward, 'square')


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def backward(grad):
        _push(a, grad * (a.data > 0))

    return make_node(out, (a,), backward, 'relu')


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(grad):
        _push(a, grad * (1.0 - out * out))

    return make_node(out, (a,), backward, 'tanh')


def sigmoid(a: Tensor) -> Tensor:
    # exp of a non-positive argument only, to avoid overflow
    positive = a.data >= 0
    z = np.exp(-np.abs(a.data))
    out = np.where(positive, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(grad):
        _push(a, grad * out * (1.0 - out))

    return make_node(out, (a,), backward, 'sigmoid')


# --- reductions and layout ------------------------------------------------

def sum(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        g = grad if keepdims or axis is None else np.expand_dims(grad, axis)
        _push(a, np.broadcast_to(g, a.shape).copy())

    return make_node(np.asarray(out), (a,), backward, 'sum')


def mean(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(grad):
        for t, start, stop in zip(tensors, bounds[:-1], bounds[1:]):
            index = [slice(None)] * grad.ndim
            index[axis] = slice(start, stop)
            _push(t, grad[tuple(index)])

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, 'concat')


def temporal_difference(a: Tensor) -> Tensor:
    """x[..., 1:] - x[..., :-1] along the last axis."""
    def backward(grad):
        g = np.zeros_like(a.data)
        g[..., 1:] += grad
        g[..., :-1] -= grad
        _push(a, g)

    return make_node(a.data[..., 1:] - a.data[..., :-1], (a,), backward, 'temporal_difference')


# --- convolution and upsampling -------------------------------------------

def _padding(padding, kernel_size: int, dilation: int, causal: bool) -> Tuple[int, int]:
    if causal:
        return (kernel_size - 1) * dilation, 0
    if isinstance(padding, int):
        return padding, padding
    left, right = padding
    return int(left), int(right)


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    dilation: int = 1,
    causal: bool = False,
    padding: Union[int, Tuple[int, int]] = 0,
) -> Tensor:
    """
    1-D cross-correlation over the last axis.

    Args:
        x: (C_in, T) or (batch, C_in, T)
        weight: (C_out, C_in, k)
        bias: Optional (C_out,)
        stride: Step between output positions
        dilation: Spacing between kernel taps
        causal: Left-pad (k-1)*dilation zeros so output t sees inputs <= t
        padding: Zeros added (left, right) in non-causal mode; 0 is valid mode

    Returns:
        (C_out, T') or (batch, C_out, T')
    """
    x, weight = as_tensor(x), as_tensor(weight)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3 or weight.ndim != 3 or xd.shape[1] != weight.shape[1]:
        raise ShapeMismatchError(
            f"conv1d expects input (batch, {weight.shape[1] if weight.ndim == 3 else '?'}, T) "
            f"and kernel (C_out, C_in, k); got {x.shape} and {weight.shape}"
        )
    if stride < 1 or dilation < 1:
        raise ShapeMismatchError("stride and dilation must be positive")

    c_out, _, k = weight.shape
    left, right = _padding(padding, k, dilation, causal)
    xp = np.pad(xd, ((0, 0), (0, 0), (left, right))) if left or right else xd
    span = (k - 1) * dilation + 1
    if xp.shape[2] < span:
        raise ShapeMismatchError(f"Input length {xd.shape[2]} is shorter than the kernel span {span}")
    t_out = (xp.shape[2] - span) // stride + 1
    reach = stride * (t_out - 1) + 1

    out = np.zeros((xp.shape[0], c_out, t_out))
    for j in range(k):
        start = j * dilation
        out += np.matmul(weight.data[:, :, j], xp[:, :, start:start + reach:stride])
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[None, :, None]

    def backward(grad):
        g = grad[None] if squeeze else grad
        if weight.requires_grad:
            dw = np.empty_like(weight.data)
            for j in range(k):
                start = j * dilation
                dw[:, :, j] = np.tensordot(g, xp[:, :, start:start + reach:stride], axes=([0, 2], [0, 2]))
            weight.accumulate(dw)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for j in range(k):
                start = j * dilation
                dxp[:, :, start:start + reach:stride] += np.matmul(weight.data[:, :, j].T, g)
            dx = dxp[:, :, left:left + xd.shape[2]]
            x.accumulate(dx[0] if squeeze else dx)
        if bias is not None and bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 2)))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out[0] if squeeze else out, parents, backward, 'conv1d')


def upsample_repeat(x: Tensor, factor: int = 8) -> Tensor:
    """Nearest-neighbor repetition along time: [a, b] -> [a]*factor + [b]*factor."""
    if factor < 1:
        raise ShapeMismatchError("Upsampling factor must be at least 1")

    def backward(grad):
        _push(x, grad.reshape(grad.shape[:-1] + (x.shape[-1], factor)).sum(axis=-1))

    return make_node(np.repeat(x.data, factor, axis=-1), (x,), backward, 'upsample_repeat')


# --- likelihood -----------------------------------------------------------

def variance_from_raw(raw: np.ndarray) -> np.ndarray:
    """exp(raw) clamped to [VAR_MIN, VAR_MAX]."""
    return np.exp(np.clip(raw, math.log(VAR_MIN), math.log(VAR_MAX)))


def gaussian_nll(x, mean: Tensor, raw_var: Tensor, weights: Optional[np.ndarray] = None) -> Tensor:
    """
    Mean Gaussian negative log-likelihood 0.5 * [ln(2 pi s2) + (x - mu)^2 / s2].

    Args:
        x: Targets (array or tensor)
        mean: Predicted means
        raw_var: Unconstrained variance head; s2 = clamp(exp(raw), 1e-3, 1e3)
        weights: Optional 0/1 (or non-negative) weights broadcastable to the
            element shape; the mean is taken over weighted elements

    Returns:
        Scalar tensor
    """
    x, mean, raw_var = as_tensor(x), as_tensor(mean), as_tensor(raw_var)
    if not (x.shape == mean.shape == raw_var.shape):
        raise ShapeMismatchError(
            f"gaussian_nll shapes differ: x {x.shape}, mean {mean.shape}, raw variance {raw_var.shape}"
        )
    for name, t in (('target', x), ('mean', mean), ('raw variance', raw_var)):
        if not np.all(np.isfinite(t.data)):
            raise NonFiniteError(f"gaussian_nll received non-finite {name}")

    var = variance_from_raw(raw_var.data)
    inside = (raw_var.data > math.log(VAR_MIN)) & (raw_var.data < math.log(VAR_MAX))
    residual = x.data - mean.data
    elements = 0.5 * (LOG_2PI + np.log(var) + residual * residual / var)

    if weights is None:
        w = np.ones_like(elements)
    else:
        w = np.broadcast_to(np.asarray(weights, dtype=np.float64), elements.shape)
    total = float(w.sum())
    scale = 1.0 / total if total > 0 else 0.0
    loss = np.asarray((w * elements).sum() * scale)

    def backward(grad):
        g = float(grad) * scale * w
        d_mean = -g * residual / var
        _push(mean, d_mean)
        _push(x, -d_mean)
        _push(raw_var, g * 0.5 * (1.0 - residual * residual / var) * inside)

    return make_node(loss, (x, mean, raw_var), backward, 'gaussian_nll')
