"""Ground-truth ingestion, image codecs, bilinear resize, train/eval split.

Native codecs are binary PPM (P6, maxval 255) and a packed float tensor
format (magic "DCIM", u32 extents, little-endian float32).  Converting
from JPEG is left to external tooling so both codecs stay bit-exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .network import CLASS_NAMES
from .seeding import substream

# challenge CSV column codes, in the canonical class order
CSV_COLUMNS = ("MEL", "NV", "BCC", "AKIEC", "BKL", "DF", "VASC")
CSV_HEADER = "image," + ",".join(CSV_COLUMNS)

CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

PACKED_MAGIC = b"DCIM"


class ParseError(ValueError):
    """Ground-truth or manifest text deviates from the expected grammar."""


class ImageFormatError(ValueError):
    """Image bytes do not conform to PPM P6 or the packed tensor format."""


@dataclass(frozen=True)
class Sample:
    image_id: str
    path: str
    label: int  # canonical class index 0..6

    @property
    def class_name(self) -> str:
        return CLASS_NAMES[self.label]

    @property
    def onehot(self) -> np.ndarray:
        v = np.zeros(len(CLASS_NAMES), dtype=np.float32)
        v[self.label] = 1.0
        return v


@dataclass
class DatasetManifest:
    samples: list = field(default_factory=list)
    split: str = ""
    provenance: str = ""

    def __len__(self):
        return len(self.samples)

    def class_census(self) -> dict:
        counts = {name: 0 for name in CLASS_NAMES}
        for s in self.samples:
            counts[s.class_name] += 1
        return counts

    def to_tsv(self) -> str:
        return "".join(f"{s.image_id}\t{s.path}\t{s.class_name}\n" for s in self.samples)

    @staticmethod
    def from_tsv(text: str, split: str = "", provenance: str = "") -> "DatasetManifest":
        samples = []
        seen = set()
        for ln, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"line {ln}: expected 3 tab-separated fields, got {len(parts)}")
            image_id, path, cls = parts
            if cls not in CLASS_INDEX:
                raise ParseError(f"line {ln}: unknown class {cls!r}")
            if image_id in seen:
                raise ParseError(f"line {ln}: duplicate image id {image_id!r}")
            seen.add(image_id)
            samples.append(Sample(image_id, path, CLASS_INDEX[cls]))
        return DatasetManifest(samples, split, provenance)


def parse_groundtruth(csv_text: str, image_dir: str = "") -> DatasetManifest:
    """Parse the challenge ground-truth CSV into a manifest.

    Column codes map onto the canonical abbreviations here and nowhere else
    (MEL->M, NV->N, BCC->BCC, AKIEC->AK, BKL->PBK, DF->D, VASC->VL).
    """
    lines = [ln for ln in csv_text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ParseError(f"line 1: expected header {CSV_HEADER!r}")
    samples = []
    seen = set()
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.strip().split(",")
        if len(parts) != 8:
            raise ParseError(f"line {ln}: expected 8 fields, got {len(parts)}")
        image_id = parts[0]
        if image_id in seen:
            raise ParseError(f"line {ln}: duplicate image id {image_id!r}")
        seen.add(image_id)
        values = []
        for v in parts[1:]:
            if v not in ("0.0", "1.0"):
                raise ParseError(f"line {ln}: field {v!r} is not 0.0 or 1.0")
            values.append(float(v))
        if sum(values) != 1.0:
            raise ParseError(f"line {ln}: row is not one-hot")
        label = values.index(1.0)
        path = f"{image_dir}/{image_id}.ppm" if image_dir else f"{image_id}.ppm"
        samples.append(Sample(image_id, path, label))
    return DatasetManifest(samples, split="train", provenance="ground-truth csv")


def decode_image(data: bytes) -> np.ndarray:
    """Decode PPM P6 or packed tensor bytes into a [3,H,W] float32 array."""
    if data[:4] == PACKED_MAGIC:
        return decode_packed(data)
    if data[:2] == b"P6":
        return _decode_ppm(data)
    raise ImageFormatError(f"unrecognized magic {data[:4]!r}")


def _decode_ppm(data: bytes) -> np.ndarray:
    # header: "P6" then whitespace-separated width, height, maxval
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":  # comment runs to end of line
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PPM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise ImageFormatError(f"bad PPM header token {data[start:pos]!r}")
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"PPM maxval {maxval} != 255")
    need = width * height * 3
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise ImageFormatError(f"truncated PPM payload: {len(payload)} of {need} bytes")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(pixels.transpose(2, 0, 1).astype(np.float32) / 255.0)


def encode_ppm(image: np.ndarray) -> bytes:
    """Inverse of the P6 decoder: [3,H,W] floats in [0,1] to PPM bytes."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ImageFormatError(f"expected [3,H,W] image, got shape {image.shape}")
    c, h, w = image.shape
    pixels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.transpose(1, 2, 0).tobytes()


def decode_packed(data: bytes) -> np.ndarray:
    if data[:4] != PACKED_MAGIC:
        raise ImageFormatError(f"bad packed magic {data[:4]!r}")
    header = data[4:16]
    if len(header) < 12:
        raise ImageFormatError("truncated packed header")
    c, h, w = np.frombuffer(header, dtype="<u4")
    need = int(c) * int(h) * int(w)
    payload = data[16:16 + 4 * need]
    if len(payload) < 4 * need:
        raise ImageFormatError(f"truncated packed payload: {len(payload)} of {4 * need} bytes")
    return np.frombuffer(payload, dtype="<f4").reshape(int(c), int(h), int(w)).copy()


def encode_packed(image: np.ndarray) -> bytes:
    if image.ndim != 3:
        raise ImageFormatError(f"expected rank-3 tensor, got shape {image.shape}")
    data = np.ascontiguousarray(image, dtype="<f4")
    return PACKED_MAGIC + np.array(image.shape, dtype="<u4").tobytes() + data.tobytes()


def resize_bilinear(image: np.ndarray, out_size: int = 128) -> np.ndarray:
    """Align-corners bilinear resample to out_size x out_size.

    Output pixel i samples source coordinate i*(H-1)/(out_size-1), so the
    four corners are copied exactly and an identity-size resize is exact.
    """
    if image.ndim != 3:
        raise ValueError(f"expected [C,H,W] image, got shape {image.shape}")
    c, h, w = image.shape
    if h < 2 or w < 2:
        raise ValueError(f"image too small to resize: {h}x{w}")
    if h == out_size and w == out_size:
        return image.copy()

    def axis_weights(src, dst):
        coord = np.arange(dst) * (src - 1) / (dst - 1)
        lo = np.floor(coord).astype(np.int64)
        lo = np.minimum(lo, src - 2)
        frac = coord - lo
        return lo, frac

    y0, fy = axis_weights(h, out_size)
    x0, fx = axis_weights(w, out_size)
    img = image.astype(np.float64)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x0 + 1] * fx
    bot = img[:, y0 + 1][:, :, x0] * (1 - fx) + img[:, y0 + 1][:, :, x0 + 1] * fx
    out = top * (1 - fy[:, None]) + bot * (fy[:, None])
    return out.astype(image.dtype)


def split_eval(manifest: DatasetManifest, n: int = 161, seed: int = 42):
    """Seeded stratified split: n samples to eval, the rest to train.

    Per-class eval counts follow largest-remainder apportionment of n over
    the class census, so the eval set mirrors the class balance.
    """
    total = len(manifest)
    if n >= total:
        raise ValueError(f"eval size {n} must be < manifest size {total}")
    census = manifest.class_census()
    quotas = {cls: n * cnt / total for cls, cnt in census.items() if cnt}
    counts = {cls: int(q) for cls, q in quotas.items()}
    remainder = n - sum(counts.values())
    by_frac = sorted(quotas, key=lambda cls: (-(quotas[cls] - counts[cls]), CLASS_INDEX[cls]))
    for cls in by_frac[:remainder]:
        counts[cls] += 1
    eval_ids = set()
    for cls, k in counts.items():
        members = [s.image_id for s in manifest.samples if s.class_name == cls]
        rng = substream(seed, "split", cls)
        chosen = rng.choice(len(members), size=k, replace=False)
        eval_ids.update(members[int(i)] for i in chosen)
    train = DatasetManifest([s for s in manifest.samples if s.image_id not in eval_ids],
                            split="train", provenance=manifest.provenance)
    evals = DatasetManifest([s for s in manifest.samples if s.image_id in eval_ids],
                            split="eval", provenance=manifest.provenance)
    return train, evals


def load_image_tensor(path: str, out_size: int = 128) -> np.ndarray:
    """Decode and resize one image file to [3,out_size,out_size]."""
    with open(path, "rb") as f:
        image = decode_image(f.read())
    if image.shape[1:] != (out_size, out_size):
        image = resize_bilinear(image, out_size)
    return image.astype(np.float32)


def load_dataset(manifest: DatasetManifest, out_size: int = 128):
    """Stack manifest images and labels into arrays for training."""
    images = np.stack([load_image_tensor(s.path, out_size) for s in manifest.samples])
    labels = np.array([s.label for s in manifest.samples], dtype=np.int64)
    return images, labels
