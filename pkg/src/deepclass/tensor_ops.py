"""Dense tensor kernels: forward and backward ops for every layer type.

Tensors are numpy arrays in batch x channels x height x width layout,
float32 at rest.  Every kernel accumulates in float64 and casts the result
back to the input dtype, so calling an op on float64 inputs yields the
64-bit shadow computation the gradient checks run against.

All ops are pure and deterministic: identical inputs give bit-identical
outputs (fixed reduction order via im2col + matmul).
"""

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are inconsistent with each other or the op."""


class GeometryError(ValueError):
    """Layer geometry produces an empty or invalid output."""


@dataclass(frozen=True)
class ConvParams:
    kernel: np.ndarray  # outC x inC x kH x kW
    bias: np.ndarray    # outC
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kernel.ndim != 4:
            raise DimensionError(f"conv kernel must be rank 4, got rank {self.kernel.ndim}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise DimensionError(
                f"conv bias shape {self.bias.shape} does not match outC {self.kernel.shape[0]}")
        if self.stride < 1:
            raise GeometryError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise GeometryError(f"padding must be >= 0, got {self.padding}")


@dataclass(frozen=True)
class PoolParams:
    window: int
    stride: int

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise GeometryError(f"pool window/stride must be >= 1, got {self.window}/{self.stride}")


def conv_out_extent(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _check_conv_geometry(input: np.ndarray, p: ConvParams):
    if input.ndim != 4:
        raise DimensionError(f"conv input must be rank 4, got rank {input.ndim}")
    _, in_c, h, w = input.shape
    out_c, k_in_c, k_h, k_w = p.kernel.shape
    if in_c != k_in_c:
        raise DimensionError(f"input has {in_c} channels but kernel expects {k_in_c}")
    out_h = conv_out_extent(h, k_h, p.stride, p.padding)
    out_w = conv_out_extent(w, k_w, p.stride, p.padding)
    if out_h < 1 or out_w < 1:
        raise GeometryError(
            f"conv output extent {out_h}x{out_w} from input {h}x{w}, "
            f"kernel {k_h}x{k_w}, stride {p.stride}, pad {p.padding}")
    return out_c, out_h, out_w


def _im2col(x: np.ndarray, k_h: int, k_w: int, stride: int, pad: int,
            out_h: int, out_w: int) -> np.ndarray:
    """Gather conv windows into a (B*outH*outW, C*kH*kW) float64 matrix."""
    b, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((b, c, k_h, k_w, out_h, out_w), dtype=np.float64)
    for i in range(k_h):
        for j in range(k_w):
            cols[:, :, i, j] = x[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride]
    return cols.transpose(0, 4, 5, 1, 2, 3).reshape(b * out_h * out_w, c * k_h * k_w)


def _col2im(cols: np.ndarray, shape, k_h: int, k_w: int, stride: int, pad: int,
            out_h: int, out_w: int) -> np.ndarray:
    """Scatter-add the inverse of _im2col back onto the input shape."""
    b, c, h, w = shape
    x = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    cols = cols.reshape(b, out_h, out_w, c, k_h, k_w).transpose(0, 3, 4, 5, 1, 2)
    for i in range(k_h):
        for j in range(k_w):
            x[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += cols[:, :, i, j]
    if pad:
        x = x[:, :, pad:pad + h, pad:pad + w]
    return x


def conv2d(input: np.ndarray, p: ConvParams) -> np.ndarray:
    """Direct cross-correlation (no kernel flip), zero-padded."""
    out_c, out_h, out_w = _check_conv_geometry(input, p)
    b = input.shape[0]
    _, in_c, k_h, k_w = p.kernel.shape
    cols = _im2col(input.astype(np.float64, copy=False), k_h, k_w,
                   p.stride, p.padding, out_h, out_w)
    w_mat = p.kernel.astype(np.float64).reshape(out_c, in_c * k_h * k_w)
    out = cols @ w_mat.T + p.bias.astype(np.float64)
    out = out.reshape(b, out_h, out_w, out_c).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out.astype(input.dtype))


def conv2d_grad(input: np.ndarray, p: ConvParams, d_out: np.ndarray):
    """Gradients of sum(d_out * conv2d(input, p)) w.r.t. input, kernel, bias."""
    out_c, out_h, out_w = _check_conv_geometry(input, p)
    b = input.shape[0]
    if d_out.shape != (b, out_c, out_h, out_w):
        raise DimensionError(
            f"d_out shape {d_out.shape} does not match conv output {(b, out_c, out_h, out_w)}")
    _, in_c, k_h, k_w = p.kernel.shape
    cols = _im2col(input.astype(np.float64, copy=False), k_h, k_w,
                   p.stride, p.padding, out_h, out_w)
    d_out64 = d_out.astype(np.float64, copy=False)
    d_flat = d_out64.transpose(0, 2, 3, 1).reshape(b * out_h * out_w, out_c)
    d_kernel = (d_flat.T @ cols).reshape(p.kernel.shape)
    d_bias = d_out64.sum(axis=(0, 2, 3))
    w_mat = p.kernel.astype(np.float64).reshape(out_c, in_c * k_h * k_w)
    d_cols = d_flat @ w_mat
    d_input = _col2im(d_cols, input.shape, k_h, k_w, p.stride, p.padding, out_h, out_w)
    dt = input.dtype
    return d_input.astype(dt), d_kernel.astype(dt), d_bias.astype(dt)


def maxpool2d(input: np.ndarray, p: PoolParams):
    """Max pooling; argmax holds the flat input index of each winner.

    Ties break to the lowest flat index (row-major first occurrence).
    """
    if input.ndim != 4:
        raise DimensionError(f"pool input must be rank 4, got rank {input.ndim}")
    b, c, h, w = input.shape
    if p.window > h or p.window > w:
        raise GeometryError(f"pool window {p.window} exceeds input {h}x{w}")
    out_h = (h - p.window) // p.stride + 1
    out_w = (w - p.window) // p.stride + 1
    k = p.window
    windows = np.empty((b, c, out_h, out_w, k * k), dtype=input.dtype)
    flat_idx = np.empty((out_h, out_w, k * k), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            windows[..., i * k + j] = input[:, :, i:i + p.stride * out_h:p.stride,
                                            j:j + p.stride * out_w:p.stride]
            ys = np.arange(out_h) * p.stride + i
            xs = np.arange(out_w) * p.stride + j
            flat_idx[:, :, i * k + j] = ys[:, None] * w + xs[None, :]
    # window slots are ordered by (i, j), which is increasing flat index,
    # so argmax's first-occurrence rule is exactly the tie-break we want
    win = np.argmax(windows, axis=-1)
    output = np.take_along_axis(windows, win[..., None], axis=-1)[..., 0]
    argmax = np.take_along_axis(np.broadcast_to(flat_idx, (b, c, out_h, out_w, k * k)),
                                win[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(output), np.ascontiguousarray(argmax)


def maxpool2d_grad(argmax: np.ndarray, d_out: np.ndarray, input_shape) -> np.ndarray:
    """Route d_out back to winner positions, accumulating on overlap."""
    b, c, h, w = input_shape
    if argmax.shape != d_out.shape:
        raise DimensionError(f"argmax shape {argmax.shape} != d_out shape {d_out.shape}")
    if argmax.shape[:2] != (b, c):
        raise DimensionError(f"argmax batch/channels {argmax.shape[:2]} != input {(b, c)}")
    d_input = np.zeros((b, c, h * w), dtype=np.float64)
    flat_d = d_out.astype(np.float64, copy=False).reshape(b, c, -1)
    flat_a = argmax.reshape(b, c, -1)
    bi = np.arange(b)[:, None, None]
    ci = np.arange(c)[None, :, None]
    np.add.at(d_input, (bi, ci, flat_a), flat_d)
    return d_input.reshape(b, c, h, w).astype(d_out.dtype)


def relu(input: np.ndarray) -> np.ndarray:
    return np.maximum(input, 0)


def relu_grad(input: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    if input.shape != d_out.shape:
        raise DimensionError(f"relu_grad shapes {input.shape} != {d_out.shape}")
    # subgradient at exactly 0 is 0
    return np.where(input > 0, d_out, 0).astype(d_out.dtype)


def dense(input: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out = input @ weight.T + bias, for input [B,N], weight [M,N], bias [M]."""
    if input.ndim != 2 or weight.ndim != 2:
        raise DimensionError("dense expects rank-2 input and weight")
    if input.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"dense inner extents disagree: input {input.shape} vs weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise DimensionError(f"dense bias shape {bias.shape} != ({weight.shape[0]},)")
    out = input.astype(np.float64, copy=False) @ weight.astype(np.float64).T \
        + bias.astype(np.float64)
    return out.astype(input.dtype)


def dense_grad(input: np.ndarray, weight: np.ndarray, d_out: np.ndarray):
    """Gradients of sum(d_out * dense(...)) w.r.t. input, weight, bias."""
    if d_out.shape != (input.shape[0], weight.shape[0]):
        raise DimensionError(
            f"d_out shape {d_out.shape} != {(input.shape[0], weight.shape[0])}")
    x64 = input.astype(np.float64, copy=False)
    w64 = weight.astype(np.float64, copy=False)
    d64 = d_out.astype(np.float64, copy=False)
    dt = input.dtype
    return (d64 @ w64).astype(dt), (d64.T @ x64).astype(dt), d64.sum(axis=0).astype(dt)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise shift-by-max softmax."""
    z = logits.astype(np.float64, copy=False)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=-1, keepdims=True)).astype(logits.dtype)


def softmax_xent(logits: np.ndarray, target: np.ndarray):
    """Mean cross-entropy over the batch with the softmax gradient fused.

    Returns (loss, probs, d_logits) with d_logits = (probs - target) / B.
    """
    if logits.shape != target.shape:
        raise DimensionError(f"logits {logits.shape} vs target {target.shape}")
    t64 = target.astype(np.float64, copy=False)
    if not (np.all((t64 == 0) | (t64 == 1)) and np.all(t64.sum(axis=-1) == 1)):
        raise ValueError("target rows must be one-hot")
    z = logits.astype(np.float64, copy=False)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    denom = e.sum(axis=-1, keepdims=True)
    probs = e / denom
    b = logits.shape[0]
    log_p = z - np.log(denom)
    loss = float(-(t64 * log_p).sum() / b)
    d_logits = ((probs - t64) / b).astype(logits.dtype)
    return loss, probs.astype(logits.dtype), d_logits
