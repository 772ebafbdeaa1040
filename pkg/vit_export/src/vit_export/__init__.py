"""Feature and ground-truth export for the single-seed annotator."""

from .backbone import ViTFeatureSource
from .export import ExportConfig, ManifestEntry, export_features, manifest_csv
from .labels import UnmappedIdError, convert_labels, remap_ids

__all__ = [
    "ExportConfig",
    "ManifestEntry",
    "UnmappedIdError",
    "ViTFeatureSource",
    "convert_labels",
    "export_features",
    "manifest_csv",
    "remap_ids",
]
