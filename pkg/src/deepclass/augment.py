"""Deterministic rotation/flip augmentation: planning and transform kernels.

The transform vocabulary is 24 rotation angles (multiples of 15 degrees,
counter-clockwise) x 4 flip modes = 96 distinct transforms.  Right-angle
rotations and flips are exact index permutations; the remaining angles
use bilinear sampling with reflected borders.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import DatasetManifest, encode_packed, load_image_tensor
from .network import CLASS_NAMES

FLIP_MODES = ("none", "horizontal", "vertical", "both")

# per-class expansion targets for the offline augmentation pass
DEFAULT_TARGETS = {
    "M": 13350, "N": 26820, "BCC": 16440, "AK": 13050,
    "PBK": 13185, "D": 10212, "VL": 11300,
}


class CapacityError(ValueError):
    """A class needs more variants per image than the vocabulary offers."""


@dataclass(frozen=True)
class Transform:
    angle_index: int  # rotation by angle_index * 15 degrees, CCW
    flip: str         # applied before rotation

    def __post_init__(self):
        if not 0 <= self.angle_index < 24:
            raise ValueError(f"angle_index {self.angle_index} out of range 0..23")
        if self.flip not in FLIP_MODES:
            raise ValueError(f"unknown flip mode {self.flip!r}")

    @property
    def is_identity(self) -> bool:
        return self.angle_index == 0 and self.flip == "none"


def enumerate_transforms():
    """All 96 transforms in canonical order: angle major, flip minor."""
    return [Transform(a, f) for a in range(24) for f in FLIP_MODES]


TRANSFORMS = enumerate_transforms()


def plan_augmentation(class_counts: dict, targets: dict | None = None) -> dict:
    """Per-class, per-image transform lists hitting each target exactly.

    With n source images and target t, every image gets floor(t/n)
    transforms and the first t mod n images (manifest order) one extra,
    assigned in canonical enumeration order with the identity first.
    Returns {class: [transform list per image]}.
    """
    targets = dict(DEFAULT_TARGETS if targets is None else targets)
    plan = {}
    for cls in CLASS_NAMES:
        n = class_counts.get(cls, 0)
        t = targets[cls]
        if t <= 0:
            raise ValueError(f"target for {cls} must be positive, got {t}")
        if n < 1:
            raise ValueError(f"class {cls} has no source images")
        base, rem = divmod(t, n)
        if base + (1 if rem else 0) > len(TRANSFORMS):
            raise CapacityError(
                f"class {cls} needs {base + (1 if rem else 0)} variants per image, "
                f"only {len(TRANSFORMS)} available")
        plan[cls] = [TRANSFORMS[:base + (1 if i < rem else 0)] for i in range(n)]
    return plan


def _reflect_indices(idx: np.ndarray, size: int) -> np.ndarray:
    """Fold integer indices into [0, size) by symmetric (edge-repeating) reflection."""
    period = 2 * size
    idx = np.mod(idx, period)
    return np.where(idx >= size, period - 1 - idx, idx)


def _rotate_bilinear(image: np.ndarray, angle_deg: float) -> np.ndarray:
    c, h, w = image.shape
    theta = np.deg2rad(angle_deg)
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    # inverse map: rotate output coordinates by -theta about the center.
    # image y grows downward, so CCW in screen space is CW in (y, x) math
    dy, dx = ys - cy, xs - cx
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_y = cy + cos_t * dy + sin_t * dx
    src_x = cx - sin_t * dy + cos_t * dx
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    fy = src_y - y0
    fx = src_x - x0
    y0r, y1r = _reflect_indices(y0, h), _reflect_indices(y0 + 1, h)
    x0r, x1r = _reflect_indices(x0, w), _reflect_indices(x0 + 1, w)
    img = image.astype(np.float64)
    out = (img[:, y0r, x0r] * (1 - fy) * (1 - fx)
           + img[:, y0r, x1r] * (1 - fy) * fx
           + img[:, y1r, x0r] * fy * (1 - fx)
           + img[:, y1r, x1r] * fy * fx)
    return out.astype(image.dtype)


def apply_transform(image: np.ndarray, t: Transform) -> np.ndarray:
    """Flip first, then rotate CCW about the image center."""
    if image.ndim != 3 or image.shape[1] != image.shape[2]:
        raise ValueError(f"expected square [C,H,H] image, got shape {image.shape}")
    out = image
    if t.flip in ("horizontal", "both"):
        out = out[:, :, ::-1]
    if t.flip in ("vertical", "both"):
        out = out[:, ::-1, :]
    if t.angle_index % 6 == 0:
        # right angle: exact permutation of pixels
        out = np.rot90(out, k=t.angle_index // 6, axes=(1, 2))
    else:
        out = _rotate_bilinear(np.ascontiguousarray(out), t.angle_index * 15.0)
    return np.ascontiguousarray(out)


def worker_count() -> int:
    """Worker-pool size, capped by the DEEPCLASS_THREADS environment variable."""
    cap = os.environ.get("DEEPCLASS_THREADS", "")
    if cap.isdigit() and int(cap) > 0:
        return int(cap)
    return os.cpu_count() or 1


def run_augmentation(manifest: DatasetManifest, plan: dict, output_dir,
                     out_size: int = 128):
    """Write every planned variant and return the output manifest rows.

    Rows are `out_path<TAB>source_id<TAB>angle_index<TAB>flip<TAB>class`,
    emitted in plan order regardless of worker parallelism.
    """
    os.makedirs(output_dir, exist_ok=True)
    by_class = {cls: [s for s in manifest.samples if s.class_name == cls]
                for cls in CLASS_NAMES}
    rows = []
    pool = ThreadPoolExecutor(max_workers=worker_count())
    for cls in CLASS_NAMES:
        samples = by_class[cls]
        per_image = plan.get(cls, [])
        if len(per_image) != len(samples):
            raise ValueError(f"plan for {cls} covers {len(per_image)} images, "
                             f"manifest has {len(samples)}")
        for sample, transforms in zip(samples, per_image):
            source = load_image_tensor(sample.path, out_size)
            variants = pool.map(
                lambda t: source if t.is_identity else apply_transform(source, t),
                transforms)
            for t, out in zip(transforms, variants):
                out_name = f"{sample.image_id}_a{t.angle_index:02d}_{t.flip}.dcim"
                out_path = os.path.join(output_dir, out_name)
                with open(out_path, "wb") as f:
                    f.write(encode_packed(out))
                rows.append((out_path, sample.image_id, t.angle_index, t.flip, cls))
    pool.shutdown()
    manifest_text = "".join("\t".join(str(v) for v in row) + "\n" for row in rows)
    with open(os.path.join(output_dir, "augmented.tsv"), "w") as f:
        f.write(manifest_text)
    return rows
