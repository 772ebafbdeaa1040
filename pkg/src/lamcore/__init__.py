"""Single-seed semantic annotation.

A per-pixel class adapter maps backbone features to class logits; a K-layer
unrolled gradient-descent cascade refines them against a guidance label. Both
are trained end to end from a single annotated seed image and then used to
label arbitrary feature images, with IoU/F1 evaluation alongside.
"""

from .annotator import ImageSummary, annotate, annotate_dataset
from .errors import (
    DegenerateInputError,
    FormatError,
    InvalidInputError,
    LamError,
    ShapeMismatchError,
    UndefinedMetricError,
)
from .metrics import ConfusionMatrix, confusion, metrics_report_csv, mf1, miou
from .optou import (
    CascadeTrace,
    GuidanceMode,
    OptouParams,
    cascade_backward,
    cascade_forward,
    closed_form_output,
    layer_forward,
)
from .sca import ScaParams, init_sca_params, sca_backward, sca_forward, sca_param_count
from .synth import generate_scene
from .tensor_core import (
    IGNORE_ID,
    FeatureTensor,
    LabelMap,
    ce_grad_logits,
    cross_entropy,
    softmax_channels,
)
from .trainer import AdamState, LamModel, TrainConfig, adam_step, loss_eval, train_from_seed

__all__ = [
    "IGNORE_ID",
    "AdamState",
    "CascadeTrace",
    "ConfusionMatrix",
    "DegenerateInputError",
    "FeatureTensor",
    "FormatError",
    "GuidanceMode",
    "ImageSummary",
    "InvalidInputError",
    "LabelMap",
    "LamError",
    "LamModel",
    "OptouParams",
    "ScaParams",
    "ShapeMismatchError",
    "TrainConfig",
    "UndefinedMetricError",
    "adam_step",
    "annotate",
    "annotate_dataset",
    "cascade_backward",
    "cascade_forward",
    "ce_grad_logits",
    "closed_form_output",
    "confusion",
    "cross_entropy",
    "generate_scene",
    "init_sca_params",
    "layer_forward",
    "loss_eval",
    "metrics_report_csv",
    "mf1",
    "miou",
    "sca_backward",
    "sca_forward",
    "sca_param_count",
    "softmax_channels",
    "train_from_seed",
]
