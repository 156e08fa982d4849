"""The 19-layer classifier: architecture spec, forward/backward, checkpoints.

Layer census is fixed at 11 conv + 5 maxpool + 3 dense (14 counting only
conv and dense).  Input is 3x128x128, output 7 logits in the canonical
class order M, N, BCC, AK, PBK, D, VL.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor_ops as T
from .seeding import substream

CLASS_NAMES = ("M", "N", "BCC", "AK", "PBK", "D", "VL")
NUM_CLASSES = len(CLASS_NAMES)

CHECKPOINT_MAGIC = b"DCLS"
CHECKPOINT_VERSION = 1


class SpecError(ValueError):
    """Layer list violates the architecture contract."""


class CheckpointFormatError(ValueError):
    """Checkpoint bytes do not conform to the file format."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | maxpool | relu | flatten | dense
    out_channels: int = 0
    kernel_size: int = 0
    stride: int = 1
    padding: int = 0
    window: int = 0
    in_features: int = 0
    out_features: int = 0


def conv_layer(out_channels, kernel_size=3, stride=1, padding=1) -> LayerSpec:
    return LayerSpec("conv", out_channels=out_channels, kernel_size=kernel_size,
                     stride=stride, padding=padding)


def maxpool_layer(window=2, stride=2) -> LayerSpec:
    return LayerSpec("maxpool", window=window, stride=stride)


def dense_layer(in_features, out_features) -> LayerSpec:
    return LayerSpec("dense", in_features=in_features, out_features=out_features)


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple = (3, 128, 128)
    layers: tuple = ()
    class_count: int = NUM_CLASSES

    def census(self) -> dict:
        counts = {"conv": 0, "maxpool": 0, "dense": 0}
        for layer in self.layers:
            if layer.kind in counts:
                counts[layer.kind] += 1
        return counts

    def validate(self):
        census = self.census()
        if census != {"conv": 11, "maxpool": 5, "dense": 3}:
            raise SpecError(f"layer census {census} != conv:11, maxpool:5, dense:3")
        shape = self.shape_trace()[-1]
        if shape != (self.class_count,):
            raise SpecError(f"network output shape {shape} != ({self.class_count},)")

    def shape_trace(self):
        """Per-layer output shapes (channels-first, no batch axis)."""
        shapes = [self.input_shape]
        shape = self.input_shape
        for idx, layer in enumerate(self.layers):
            if layer.kind == "conv":
                if len(shape) != 3:
                    raise SpecError(f"layer {idx}: conv applied to shape {shape}")
                c, h, w = shape
                oh = T.conv_out_extent(h, layer.kernel_size, layer.stride, layer.padding)
                ow = T.conv_out_extent(w, layer.kernel_size, layer.stride, layer.padding)
                if oh < 1 or ow < 1:
                    raise SpecError(f"layer {idx}: conv output {oh}x{ow} is empty")
                shape = (layer.out_channels, oh, ow)
            elif layer.kind == "maxpool":
                if len(shape) != 3:
                    raise SpecError(f"layer {idx}: maxpool applied to shape {shape}")
                c, h, w = shape
                if layer.window > h or layer.window > w:
                    raise SpecError(f"layer {idx}: pool window {layer.window} exceeds {h}x{w}")
                shape = (c, (h - layer.window) // layer.stride + 1,
                         (w - layer.window) // layer.stride + 1)
            elif layer.kind == "relu":
                pass
            elif layer.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif layer.kind == "dense":
                if shape != (layer.in_features,):
                    raise SpecError(
                        f"layer {idx}: dense expects ({layer.in_features},), got {shape}")
                shape = (layer.out_features,)
            else:
                raise SpecError(f"layer {idx}: unknown kind {layer.kind!r}")
            shapes.append(shape)
        return shapes

    def to_text(self) -> str:
        lines = ["input %d %d %d" % self.input_shape, f"classes {self.class_count}"]
        for layer in self.layers:
            if layer.kind == "conv":
                lines.append(f"conv out={layer.out_channels} kernel={layer.kernel_size} "
                             f"stride={layer.stride} pad={layer.padding}")
            elif layer.kind == "maxpool":
                lines.append(f"maxpool window={layer.window} stride={layer.stride}")
            elif layer.kind == "dense":
                lines.append(f"dense in={layer.in_features} out={layer.out_features}")
            else:
                lines.append(layer.kind)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "NetworkSpec":
        input_shape = None
        class_count = None
        layers = []
        for line in text.splitlines():
            if not line.strip():
                continue
            tokens = line.split()
            kw = dict(t.split("=") for t in tokens[1:] if "=" in t)
            kind = tokens[0]
            if kind == "input":
                input_shape = tuple(int(t) for t in tokens[1:4])
            elif kind == "classes":
                class_count = int(tokens[1])
            elif kind == "conv":
                layers.append(conv_layer(int(kw["out"]), int(kw["kernel"]),
                                         int(kw["stride"]), int(kw["pad"])))
            elif kind == "maxpool":
                layers.append(maxpool_layer(int(kw["window"]), int(kw["stride"])))
            elif kind == "dense":
                layers.append(dense_layer(int(kw["in"]), int(kw["out"])))
            elif kind in ("relu", "flatten"):
                layers.append(LayerSpec(kind))
            else:
                raise SpecError(f"unknown spec line: {line!r}")
        if input_shape is None or class_count is None:
            raise SpecError("spec text missing input/classes lines")
        return NetworkSpec(input_shape, tuple(layers), class_count)


def deepclass_spec() -> NetworkSpec:
    """Canonical architecture: five VGG-style blocks then three dense layers.

    Conv counts per block [2, 2, 2, 2, 3], channels [32, 64, 128, 128, 256],
    all 3x3/stride-1/pad-1 with ReLU, a 2x2/stride-2 pool closing each block,
    then flatten (4*4*256) -> 512 -> 512 -> 7.
    """
    layers = []
    for block_convs, channels in zip((2, 2, 2, 2, 3), (32, 64, 128, 128, 256)):
        for _ in range(block_convs):
            layers.append(conv_layer(channels))
            layers.append(LayerSpec("relu"))
        layers.append(maxpool_layer())
    layers.append(LayerSpec("flatten"))
    layers.append(dense_layer(4 * 4 * 256, 512))
    layers.append(LayerSpec("relu"))
    layers.append(dense_layer(512, 512))
    layers.append(LayerSpec("relu"))
    layers.append(dense_layer(512, NUM_CLASSES))
    return NetworkSpec((3, 128, 128), tuple(layers), NUM_CLASSES)


def parameter_specs(spec: NetworkSpec):
    """Yield (name, shape, fan_in) for every parameter tensor, in layer order."""
    shapes = spec.shape_trace()
    conv_n = dense_n = 0
    for idx, layer in enumerate(spec.layers):
        if layer.kind == "conv":
            conv_n += 1
            in_c = shapes[idx][0]
            fan_in = in_c * layer.kernel_size * layer.kernel_size
            yield (f"conv{conv_n}.kernel",
                   (layer.out_channels, in_c, layer.kernel_size, layer.kernel_size), fan_in)
            yield f"conv{conv_n}.bias", (layer.out_channels,), fan_in
        elif layer.kind == "dense":
            dense_n += 1
            yield f"dense{dense_n}.weight", (layer.out_features, layer.in_features), layer.in_features
            yield f"dense{dense_n}.bias", (layer.out_features,), layer.in_features


@dataclass
class Network:
    spec: NetworkSpec
    parameters: dict  # name -> float32 ndarray
    _cache: list = field(default_factory=list, repr=False)

    def param_names_for_layer(self):
        """Map layer index -> (primary, bias) parameter names."""
        mapping = {}
        conv_n = dense_n = 0
        for idx, layer in enumerate(self.spec.layers):
            if layer.kind == "conv":
                conv_n += 1
                mapping[idx] = (f"conv{conv_n}.kernel", f"conv{conv_n}.bias")
            elif layer.kind == "dense":
                dense_n += 1
                mapping[idx] = (f"dense{dense_n}.weight", f"dense{dense_n}.bias")
        return mapping


def build_deepclass(seed: int, spec: NetworkSpec | None = None) -> Network:
    """He-uniform weights from a per-parameter seeded stream; zero biases."""
    spec = spec or deepclass_spec()
    params = {}
    for name, shape, fan_in in parameter_specs(spec):
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=np.float32)
        else:
            bound = np.sqrt(6.0 / fan_in)
            rng = substream(seed, "init", name)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return Network(spec, params)


def forward(net: Network, batch: np.ndarray, train_mode: bool = False) -> np.ndarray:
    expected = (batch.shape[0],) + net.spec.input_shape
    if batch.shape != expected:
        raise T.DimensionError(f"batch shape {batch.shape} != {expected}")
    names = net.param_names_for_layer()
    cache = []
    x = batch
    for idx, layer in enumerate(net.spec.layers):
        entry = {"input": x}
        if layer.kind == "conv":
            w_name, b_name = names[idx]
            p = T.ConvParams(net.parameters[w_name], net.parameters[b_name],
                             layer.stride, layer.padding)
            x = T.conv2d(x, p)
        elif layer.kind == "maxpool":
            x, argmax = T.maxpool2d(x, T.PoolParams(layer.window, layer.stride))
            entry["argmax"] = argmax
        elif layer.kind == "relu":
            x = T.relu(x)
        elif layer.kind == "flatten":
            x = x.reshape(x.shape[0], -1)
        elif layer.kind == "dense":
            w_name, b_name = names[idx]
            x = T.dense(x, net.parameters[w_name], net.parameters[b_name])
        if train_mode:
            cache.append(entry)
    net._cache = cache if train_mode else []
    return x


def backward(net: Network, d_logits: np.ndarray) -> dict:
    """Gradients for every parameter via reverse traversal of the cache."""
    if not net._cache:
        raise RuntimeError("backward called without a preceding train-mode forward")
    names = net.param_names_for_layer()
    grads = {}
    d = d_logits
    for idx in range(len(net.spec.layers) - 1, -1, -1):
        layer = net.spec.layers[idx]
        entry = net._cache[idx]
        x = entry["input"]
        if layer.kind == "conv":
            w_name, b_name = names[idx]
            p = T.ConvParams(net.parameters[w_name], net.parameters[b_name],
                             layer.stride, layer.padding)
            d, grads[w_name], grads[b_name] = T.conv2d_grad(x, p, d)
        elif layer.kind == "maxpool":
            d = T.maxpool2d_grad(entry["argmax"], d, x.shape)
        elif layer.kind == "relu":
            d = T.relu_grad(x, d)
        elif layer.kind == "flatten":
            d = d.reshape(x.shape)
        elif layer.kind == "dense":
            w_name, b_name = names[idx]
            d, grads[w_name], grads[b_name] = T.dense_grad(
                x, net.parameters[w_name], d)
    return grads


def predict(net: Network, batch: np.ndarray):
    """Softmax probabilities and per-row argmax class indices."""
    logits = forward(net, batch, train_mode=False)
    probs = T.softmax(logits)
    return probs, np.argmax(probs, axis=1)


def save_checkpoint(net: Network, path):
    spec_text = net.spec.to_text().encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<H", CHECKPOINT_VERSION),
              struct.pack("<I", len(spec_text)), spec_text]
    for name in sorted(net.parameters):
        data = np.ascontiguousarray(net.parameters[name], dtype="<f4")
        name_b = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def load_checkpoint(path) -> Network:
    with open(path, "rb") as f:
        buf = f.read()
    off = 0

    def need(n, what):
        nonlocal off
        if off + n > len(buf):
            raise CheckpointFormatError(f"truncated {what} at offset {off}")
        out = buf[off:off + n]
        off += n
        return out

    if need(4, "magic") != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad magic at offset 0")
    (version,) = struct.unpack("<H", need(2, "version"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported version {version} at offset 4")
    (spec_len,) = struct.unpack("<I", need(4, "spec length"))
    spec = NetworkSpec.from_text(need(spec_len, "spec text").decode("utf-8"))
    params = {}
    while off < len(buf):
        (name_len,) = struct.unpack("<H", need(2, "parameter name length"))
        name = need(name_len, "parameter name").decode("utf-8")
        (rank,) = struct.unpack("<B", need(1, "rank"))
        shape = struct.unpack(f"<{rank}I", need(4 * rank, "extents"))
        count = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(need(4 * count, f"data of {name}"), dtype="<f4")
        params[name] = data.reshape(shape).copy()
    expected = {name: shape for name, shape, _ in parameter_specs(spec)}
    got = {name: arr.shape for name, arr in params.items()}
    if expected != got:
        raise CheckpointFormatError("parameter set does not match spec")
    return Network(spec, params)
