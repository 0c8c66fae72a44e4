"""Label engine for scale-balanced semi-supervised rotated-box detection."""

from .errors import (
    ConfigError,
    CovarianceError,
    EmptyGroupError,
    InvalidBoxError,
    PlacementError,
    QuadFormatError,
    SchemaError,
    SsodlabError,
)
from .geometry import (
    GaussianBox,
    RotatedBox,
    box_to_quad,
    canonicalize,
    is_small,
    quad_to_box,
    rotated_iou,
    to_gaussian,
    wasserstein_sq,
)
from .types import Detection

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CovarianceError",
    "Detection",
    "EmptyGroupError",
    "GaussianBox",
    "InvalidBoxError",
    "PlacementError",
    "QuadFormatError",
    "RotatedBox",
    "SchemaError",
    "SsodlabError",
    "box_to_quad",
    "canonicalize",
    "is_small",
    "quad_to_box",
    "rotated_iou",
    "to_gaussian",
    "wasserstein_sq",
    "__version__",
]
