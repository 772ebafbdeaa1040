"""Batch feature export: RGB images in, LFT1 files plus a manifest CSV out."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from . import formats
from .backbone import ViTFeatureSource

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".ppm")


@dataclass
class ExportConfig:
    images_dir: Path
    out_dir: Path
    backbone: str = "vit_b_16"
    weights: str = "pretrained"
    target_height: int = 224
    target_width: int = 224
    device: str = "cpu"
    seed: int = 0
    # label conversion (see labels.convert_labels)
    gt_dir: Path | None = None
    remap: dict = field(default_factory=dict)
    void_ids: tuple = ()


@dataclass
class ManifestEntry:
    image: Path
    ok: bool
    feature_file: Path | None = None
    channels: int = 0
    height: int = 0
    width: int = 0
    error: str = ""


def manifest_csv(entries: list[ManifestEntry]) -> str:
    lines = ["image,status,feature_file,channels,height,width,error"]
    for e in entries:
        err = e.error.replace(",", ";").replace("\n", " ")
        out = str(e.feature_file) if e.feature_file else ""
        lines.append(
            f"{e.image},{'ok' if e.ok else 'error'},{out},"
            f"{e.channels},{e.height},{e.width},{err}"
        )
    return "\n".join(lines) + "\n"


def export_features(config: ExportConfig) -> list[ManifestEntry]:
    """Run the frozen backbone over every image in the input directory.

    Every emitted file has the same channel count (the backbone width) and
    the configured target size. Unreadable images are recorded in the
    manifest and skipped. The manifest is also written to
    ``out_dir / manifest.csv``.
    """
    source = ViTFeatureSource(
        backbone=config.backbone,
        weights=config.weights,
        device=config.device,
        seed=config.seed,
    )
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = (config.target_height, config.target_width)
    entries = []
    images = sorted(
        p for p in Path(config.images_dir).iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES
    )
    for path in images:
        entry = ManifestEntry(image=path, ok=False)
        entries.append(entry)
        try:
            with Image.open(path) as img:
                dense = source.extract(img, target)
        except (OSError, UnidentifiedImageError) as exc:
            entry.error = str(exc)
            continue
        out_path = out_dir / (path.stem + ".lft")
        formats.write_features(out_path, dense)
        entry.ok = True
        entry.feature_file = out_path
        entry.channels, entry.height, entry.width = dense.shape
    (out_dir / "manifest.csv").write_text(manifest_csv(entries))
    return entries
