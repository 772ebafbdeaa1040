"""Bit-exact binary file formats, palette handling, and model persistence.

All formats are explicitly little-endian:

* feature files  (``LFT1``): magic, u16 version, u32 C/H/W, then C*H*W f32
  channel-major values (widened to f64 in memory, narrowed round-to-nearest
  on save);
* label files    (``LLB1``): magic, u16 version, u32 H/W, then H*W u16 ids
  with 0xFFFF as the ignore sentinel;
* model files    (``LAMM``): magic, u16 version, u32 N/C/K, u8 guidance tag,
  then f64 adapter weights (C*N), bias (C), alphas (K), etas (K).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .optou import GuidanceMode, OptouParams
from .sca import ScaParams
from .tensor_core import IGNORE_ID, FeatureTensor, LabelMap
from .trainer import LamModel

FEATURE_MAGIC = b"LFT1"
LABEL_MAGIC = b"LLB1"
MODEL_MAGIC = b"LAMM"
FORMAT_VERSION = 1

_FEATURE_HEADER = struct.Struct("<4sHIII")
_LABEL_HEADER = struct.Struct("<4sHII")
_MODEL_HEADER = struct.Struct("<4sHIIIB")

_MODE_TAGS = {GuidanceMode.ORACLE: 0, GuidanceMode.SELF: 1, GuidanceMode.SCALE_ONLY: 2}
_TAG_MODES = {tag: mode for mode, tag in _MODE_TAGS.items()}


def _read_header(blob: bytes, header: struct.Struct, magic: bytes, path) -> tuple:
    if len(blob) < header.size:
        raise FormatError(
            f"{path}: truncated header: expected {header.size} bytes, got {len(blob)}"
        )
    fields = header.unpack_from(blob)
    if fields[0] != magic:
        raise FormatError(f"{path}: bad magic {fields[0]!r} at offset 0, expected {magic!r}")
    if fields[1] != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported version {fields[1]} at offset 4, expected {FORMAT_VERSION}"
        )
    return fields


def _check_payload(blob: bytes, offset: int, expected: int, path) -> None:
    actual = len(blob) - offset
    if actual != expected:
        raise FormatError(
            f"{path}: payload mismatch at offset {offset}: expected {expected} bytes, "
            f"got {actual}"
        )


def load_features(path) -> FeatureTensor:
    blob = Path(path).read_bytes()
    _, _, channels, height, width = _read_header(blob, _FEATURE_HEADER, FEATURE_MAGIC, path)
    if min(channels, height, width) < 1:
        raise FormatError(f"{path}: non-positive dimensions ({channels}, {height}, {width})")
    count = channels * height * width
    _check_payload(blob, _FEATURE_HEADER.size, count * 4, path)
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=_FEATURE_HEADER.size)
    if not np.isfinite(values).all():
        raise FormatError(f"{path}: payload contains non-finite values")
    data = values.astype(np.float64).reshape(channels, height, width)
    return FeatureTensor._from_owned(data)


def save_features(path, tensor: FeatureTensor) -> None:
    with np.errstate(over="ignore"):
        narrowed = tensor.data.astype("<f4")  # round-to-nearest-even
    if not np.isfinite(narrowed).all():
        raise InvalidInputError(f"{path}: values exceed the float32 on-disk range")
    header = _FEATURE_HEADER.pack(
        FEATURE_MAGIC, FORMAT_VERSION, tensor.channels, tensor.height, tensor.width
    )
    Path(path).write_bytes(header + narrowed.tobytes())


def load_labels(path) -> LabelMap:
    blob = Path(path).read_bytes()
    _, _, height, width = _read_header(blob, _LABEL_HEADER, LABEL_MAGIC, path)
    if min(height, width) < 1:
        raise FormatError(f"{path}: non-positive dimensions ({height}, {width})")
    _check_payload(blob, _LABEL_HEADER.size, height * width * 2, path)
    ids = np.frombuffer(blob, dtype="<u2", count=height * width, offset=_LABEL_HEADER.size)
    return LabelMap(ids.reshape(height, width))


def save_labels(path, labels: LabelMap) -> None:
    header = _LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, labels.height, labels.width)
    Path(path).write_bytes(header + labels.ids.astype("<u2").tobytes())


def load_model(path) -> LamModel:
    blob = Path(path).read_bytes()
    _, _, n_in, n_out, k, tag = _read_header(blob, _MODEL_HEADER, MODEL_MAGIC, path)
    if tag not in _TAG_MODES:
        raise FormatError(f"{path}: unknown guidance-mode tag {tag} at offset 18")
    if min(n_in, n_out, k) < 1:
        raise FormatError(f"{path}: non-positive dimensions (N={n_in}, C={n_out}, K={k})")
    count = n_out * n_in + n_out + 2 * k
    _check_payload(blob, _MODEL_HEADER.size, count * 8, path)
    vec = np.frombuffer(blob, dtype="<f8", count=count, offset=_MODEL_HEADER.size)
    w_end = n_out * n_in
    b_end = w_end + n_out
    a_end = b_end + k
    return LamModel(
        sca=ScaParams(vec[:w_end].reshape(n_out, n_in), vec[w_end:b_end]),
        optou=OptouParams(vec[b_end:a_end], vec[a_end:]),
        class_count=n_out,
        mode=_TAG_MODES[tag],
    )


def save_model(path, model: LamModel) -> None:
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC,
        FORMAT_VERSION,
        model.sca.n_in,
        model.sca.n_out,
        model.optou.k_layers,
        _MODE_TAGS[model.mode],
    )
    payload = np.concatenate(
        [
            model.sca.weights.ravel(),
            model.sca.bias,
            model.optou.alphas,
            model.optou.etas,
        ]
    ).astype("<f8")
    Path(path).write_bytes(header + payload.tobytes())


@dataclass(frozen=True)
class Palette:
    """Mapping class id -> (r, g, b, name); ids unique, components 8-bit."""

    entries: dict

    def __post_init__(self):
        for cid, (r, g, b, _name) in self.entries.items():
            if cid < 0 or cid > 0xFFFE:
                raise InvalidInputError(f"palette id {cid} out of range")
            for comp in (r, g, b):
                if not 0 <= comp <= 255:
                    raise InvalidInputError(f"palette color {comp} for id {cid} not 8-bit")

    def color(self, cid: int) -> tuple[int, int, int]:
        r, g, b, _ = self.entries[cid]
        return r, g, b


def load_palette(path) -> Palette:
    entries = {}
    lines = Path(path).read_text().splitlines()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.lower().startswith("class_id")):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise FormatError(f"{path}:{lineno}: expected class_id,r,g,b,name")
        try:
            cid, r, g, b = (int(p) for p in parts[:4])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-integer field: {exc}") from exc
        if cid in entries:
            raise FormatError(f"{path}:{lineno}: duplicate class id {cid}")
        entries[cid] = (r, g, b, parts[4])
    return Palette(entries)


def save_palette(path, palette: Palette) -> None:
    lines = ["class_id,r,g,b,name"]
    for cid in sorted(palette.entries):
        r, g, b, name = palette.entries[cid]
        lines.append(f"{cid},{r},{g},{b},{name}")
    Path(path).write_text("\n".join(lines) + "\n")


def make_palette(class_count: int) -> Palette:
    """Deterministic palette of visually distinct colors."""
    entries = {}
    for cid in range(class_count):
        hue = (cid * 0.6180339887498949) % 1.0  # golden-ratio spacing
        r, g, b = _hsv_to_rgb(hue, 0.65, 0.95)
        entries[cid] = (r, g, b, f"class_{cid}")
    return Palette(entries)


def _hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return tuple(int(round(255 * x)) for x in rgb)


def render_colorized(labels: LabelMap, palette: Palette) -> bytes:
    """Binary PPM (P6, 8-bit) with palette colors; ignore pixels are black."""
    ids = labels.ids
    present = np.unique(ids)
    missing = [int(i) for i in present if i != IGNORE_ID and int(i) not in palette.entries]
    if missing:
        raise InvalidInputError(f"palette is missing class ids {missing}")
    lut = np.zeros((IGNORE_ID + 1, 3), dtype=np.uint8)
    for cid in palette.entries:
        lut[cid] = palette.color(cid)
    rgb = lut[ids.astype(np.intp)]
    header = f"P6\n{labels.width} {labels.height}\n255\n".encode("ascii")
    return header + rgb.tobytes()


def save_ppm(path, labels: LabelMap, palette: Palette) -> None:
    Path(path).write_bytes(render_colorized(labels, palette))
