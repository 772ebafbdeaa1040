"""Labeling feature images with a trained model."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .errors import LamError
from .optou import GuidanceMode, cascade_forward
from .sca import sca_forward
from .tensor_core import FeatureTensor, LabelMap
from .trainer import LamModel


def annotate(
    features: FeatureTensor,
    model: LamModel,
    mode_override: GuidanceMode | None = None,
    oracle_gt: LabelMap | None = None,
) -> LabelMap:
    """Label one feature image: adapter, cascade, per-pixel argmax.

    Argmax ties break to the lowest channel index; the output never contains
    the ignore sentinel. ``oracle_gt`` is required exactly when the effective
    mode is ORACLE, in which case the output is guided by the very labels it
    would be scored against.
    """
    mode = mode_override if mode_override is not None else model.mode
    f_sca = sca_forward(features, model.sca)
    out, _ = cascade_forward(
        f_sca, model.optou, guidance=oracle_gt, mode=mode, want_trace=False
    )
    return LabelMap(np.argmax(out.data, axis=0).astype(np.uint16))


@dataclass
class ImageSummary:
    """Per-image record from a dataset annotation run."""

    source: Path
    ok: bool
    seconds: float = 0.0
    output: Path | None = None
    class_pixels: np.ndarray | None = None  # length-C counts
    error: str = ""


def annotate_dataset(
    feature_files: list[Path],
    model: LamModel,
    output_dir: Path,
    mode: GuidanceMode | None = None,
    gt_dir: Path | None = None,
    palette: "dataio.Palette | None" = None,
    emit_color: bool = False,
) -> list[ImageSummary]:
    """Annotate a list of feature files, writing one label file per input.

    A malformed input is recorded as a per-file error and processing
    continues. Summaries come back in input order. In ORACLE mode the ground
    truth for ``x.lft`` is read from ``gt_dir / x.llb``.
    """
    mode = mode if mode is not None else model.mode
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for src in [Path(f) for f in feature_files]:
        entry = ImageSummary(source=src, ok=False)
        summaries.append(entry)
        t0 = time.perf_counter()
        try:
            features = dataio.load_features(src)
            oracle_gt = None
            if mode is GuidanceMode.ORACLE:
                if gt_dir is None:
                    raise LamError("oracle mode needs a ground-truth directory")
                oracle_gt = dataio.load_labels(Path(gt_dir) / (src.stem + ".llb"))
            labels = annotate(features, model, mode_override=mode, oracle_gt=oracle_gt)
            out_path = output_dir / (src.stem + ".llb")
            dataio.save_labels(out_path, labels)
            if emit_color:
                if palette is None:
                    raise LamError("colorized output needs a palette")
                dataio.save_ppm(output_dir / (src.stem + ".ppm"), labels, palette)
            entry.ok = True
            entry.output = out_path
            entry.class_pixels = np.bincount(
                labels.ids.reshape(-1).astype(np.int64), minlength=model.class_count
            )
        except (LamError, OSError) as exc:
            entry.error = str(exc)
        entry.seconds = time.perf_counter() - t0
    return summaries
