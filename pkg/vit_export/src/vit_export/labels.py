"""Ground-truth conversion: raw dataset id maps to LLB1 files.

Raw ids are remapped to the contiguous [0, C) range; ids listed as void (and
only those) become the 0xFFFF ignore sentinel. An id that is neither mapped
nor void is an error, so silent label corruption cannot slip through.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from . import formats


class UnmappedIdError(ValueError):
    def __init__(self, ids):
        self.ids = sorted(int(i) for i in ids)
        super().__init__(f"ground-truth ids {self.ids} have no remap entry or void rule")


def remap_ids(raw: np.ndarray, remap: dict, void_ids=()) -> np.ndarray:
    """Apply {raw id -> class id} with void ids routed to the ignore sentinel."""
    raw = np.asarray(raw)
    out = np.full(raw.shape, formats.IGNORE_ID, dtype=np.uint16)
    covered = np.isin(raw, list(void_ids)) if void_ids else np.zeros(raw.shape, bool)
    for src, dst in remap.items():
        hit = raw == int(src)
        out[hit] = int(dst)
        covered |= hit
    if not covered.all():
        raise UnmappedIdError(np.unique(raw[~covered]))
    return out


def load_raw_ids(path, target_hw=None) -> np.ndarray:
    """Read a single-channel id image; nearest-neighbor resize, never blended."""
    with Image.open(path) as img:
        if img.mode not in ("L", "I", "I;16", "P"):
            img = img.convert("L")
        if target_hw is not None and (img.height, img.width) != tuple(target_hw):
            img = img.resize((target_hw[1], target_hw[0]), Image.NEAREST)
        return np.asarray(img).astype(np.int64)


def convert_labels(gt_dir, out_dir, remap: dict, void_ids=(), target_hw=None) -> list[Path]:
    """Convert every id image in gt_dir; returns the written label files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in sorted(Path(gt_dir).iterdir()):
        if path.suffix.lower() not in (".png", ".bmp", ".ppm", ".pgm"):
            continue
        ids = remap_ids(load_raw_ids(path, target_hw), remap, void_ids)
        out_path = out_dir / (path.stem + ".llb")
        formats.write_labels(out_path, ids)
        written.append(out_path)
    return written
