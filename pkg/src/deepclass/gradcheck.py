"""Finite-difference verification of every analytic gradient.

Checks run on float64 inputs (the kernels follow their input dtype, so
this is a full 64-bit shadow of the float32 path) with central
differences at eps = 1e-3.  The pass bar is relative error below 1e-4.
"""

import numpy as np

from . import network as N
from . import tensor_ops as T
from .seeding import substream

EPS = 1e-3
TOLERANCE = 1e-4


def numerical_grad(f, x: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.abs(analytic).max(initial=0.0)),
                float(np.abs(numeric).max(initial=0.0)), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def _away_from_zero(rng, shape, low=0.1, high=1.0):
    """Uniform magnitudes in [low, high] with random sign; keeps finite
    differences valid across relu/max kinks."""
    mag = rng.uniform(low, high, size=shape)
    sign = rng.choice([-1.0, 1.0], size=shape)
    return mag * sign


def check_conv2d(rng) -> float:
    b, in_c, out_c = rng.integers(1, 3), int(rng.integers(1, 4)), int(rng.integers(1, 4))
    h = w = int(rng.integers(3, 7))
    k = int(rng.integers(1, min(4, h + 1)))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, 2))
    x = rng.standard_normal((b, in_c, h, w))
    kernel = rng.standard_normal((out_c, in_c, k, k))
    bias = rng.standard_normal(out_c)
    p = T.ConvParams(kernel, bias, stride, pad)
    d_out = rng.standard_normal(T.conv2d(x, p).shape)
    d_x, d_k, d_b = T.conv2d_grad(x, p, d_out)
    errs = [
        rel_error(d_x, numerical_grad(lambda: np.sum(d_out * T.conv2d(x, p)), x)),
        rel_error(d_k, numerical_grad(lambda: np.sum(d_out * T.conv2d(x, p)), kernel)),
        rel_error(d_b, numerical_grad(lambda: np.sum(d_out * T.conv2d(x, p)), bias)),
    ]
    return max(errs)


def check_maxpool2d(rng) -> float:
    b, c = int(rng.integers(1, 3)), int(rng.integers(1, 4))
    h = w = int(rng.integers(3, 7))
    window = int(rng.integers(1, min(4, h + 1)))
    stride = int(rng.integers(1, 3))
    p = T.PoolParams(window, stride)
    # continuous random values make window ties measure-zero, so the
    # finite difference is valid everywhere
    x = rng.standard_normal((b, c, h, w))
    out, argmax = T.maxpool2d(x, p)
    d_out = rng.standard_normal(out.shape)
    d_x = T.maxpool2d_grad(argmax, d_out, x.shape)

    def loss():
        return np.sum(d_out * T.maxpool2d(x, p)[0])

    return rel_error(d_x, numerical_grad(loss, x))


def check_relu(rng) -> float:
    x = _away_from_zero(rng, (int(rng.integers(1, 5)), int(rng.integers(1, 9))))
    d_out = rng.standard_normal(x.shape)
    d_x = T.relu_grad(x, d_out)
    return rel_error(d_x, numerical_grad(lambda: np.sum(d_out * T.relu(x)), x))


def check_dense(rng) -> float:
    b, n, m = int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 6))
    x = rng.standard_normal((b, n))
    w = rng.standard_normal((m, n))
    bias = rng.standard_normal(m)
    d_out = rng.standard_normal((b, m))
    d_x, d_w, d_b = T.dense_grad(x, w, d_out)
    errs = [
        rel_error(d_x, numerical_grad(lambda: np.sum(d_out * T.dense(x, w, bias)), x)),
        rel_error(d_w, numerical_grad(lambda: np.sum(d_out * T.dense(x, w, bias)), w)),
        rel_error(d_b, numerical_grad(lambda: np.sum(d_out * T.dense(x, w, bias)), bias)),
    ]
    return max(errs)


def check_softmax_xent(rng) -> float:
    b, k = int(rng.integers(1, 5)), 7
    x = rng.standard_normal((b, k))
    target = np.eye(k)[rng.integers(0, k, size=b)]
    _, _, d_logits = T.softmax_xent(x, target)
    return rel_error(d_logits,
                     numerical_grad(lambda: T.softmax_xent(x, target)[0], x))


def reduced_spec() -> N.NetworkSpec:
    """Tiny 1-conv / 1-pool / 1-dense net on 8x8 input for whole-net checks."""
    layers = (
        N.conv_layer(3, kernel_size=3, stride=1, padding=1),
        N.LayerSpec("relu"),
        N.maxpool_layer(2, 2),
        N.LayerSpec("flatten"),
        N.dense_layer(3 * 4 * 4, 5),
    )
    return N.NetworkSpec((2, 8, 8), layers, 5)


def check_whole_network(seed: int) -> float:
    # smaller step than the per-op checks: the loss surface has relu/max
    # kinks at uncontrolled locations, and a narrow window avoids crossing
    # them while float64 keeps the difference quotient exact enough
    eps = 1e-5
    rng = substream(seed, "gradcheck", "network")
    net = N.build_deepclass(seed, spec=reduced_spec())
    for name in net.parameters:
        net.parameters[name] = net.parameters[name].astype(np.float64)
        if name.endswith("bias"):
            net.parameters[name] += 0.1 * rng.standard_normal(net.parameters[name].shape)
    batch = rng.standard_normal((2,) + net.spec.input_shape)
    target = np.eye(5)[rng.integers(0, 5, size=2)]

    def loss():
        return T.softmax_xent(N.forward(net, batch, train_mode=True), target)[0]

    logits = N.forward(net, batch, train_mode=True)
    _, _, d_logits = T.softmax_xent(logits, target)
    grads = N.backward(net, d_logits)
    worst = 0.0
    for name, param in net.parameters.items():
        worst = max(worst, rel_error(grads[name], numerical_grad(loss, param, eps)))
    return worst


OP_CHECKS = {
    "conv2d": check_conv2d,
    "maxpool2d": check_maxpool2d,
    "relu": check_relu,
    "dense": check_dense,
    "softmax_xent": check_softmax_xent,
}


def run_suite(seed: int = 42, cases_per_op: int = 50) -> dict:
    """Max relative error per op plus the whole-network check."""
    results = {}
    for op, check in OP_CHECKS.items():
        rng = substream(seed, "gradcheck", op)
        results[op] = max(check(rng) for _ in range(cases_per_op))
    results["network"] = check_whole_network(seed)
    return results
