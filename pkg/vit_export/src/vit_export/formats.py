"""Writers for the annotator's exchange formats.

Implemented directly against the byte-level contract (little-endian headers,
f32 channel-major features, u16 label ids with 0xFFFF as the ignore id) so
this package stays decoupled from the consumer's code.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"LFT1"
LABEL_MAGIC = b"LLB1"
FORMAT_VERSION = 1
IGNORE_ID = 0xFFFF

_FEATURE_HEADER = struct.Struct("<4sHIII")
_LABEL_HEADER = struct.Struct("<4sHII")


def write_features(path, data: np.ndarray) -> None:
    """Write a (C, H, W) float array as an LFT1 file."""
    if data.ndim != 3:
        raise ValueError(f"features must be (C, H, W), got shape {data.shape}")
    values = np.ascontiguousarray(data, dtype="<f4")
    if not np.isfinite(values).all():
        raise ValueError("features contain non-finite values")
    c, h, w = values.shape
    header = _FEATURE_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, c, h, w)
    Path(path).write_bytes(header + values.tobytes())


def write_labels(path, ids: np.ndarray) -> None:
    """Write an (H, W) integer id map as an LLB1 file."""
    if ids.ndim != 2:
        raise ValueError(f"labels must be (H, W), got shape {ids.shape}")
    if ids.min() < 0 or ids.max() > IGNORE_ID:
        raise ValueError("label ids must lie in [0, 0xFFFF]")
    values = np.ascontiguousarray(ids, dtype="<u2")
    header = _LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, *values.shape)
    Path(path).write_bytes(header + values.tobytes())
