"""Multiscale slope and curvature significance for 2-D images.

Smoothed derivative estimates at several bandwidths are standardized and
compared with extreme-value thresholds that bound the family-wise error
over the interior pixels and all tested directions.
"""

from .evt import ThresholdSpec, critical_value, make_threshold
from .grid import GridError, ImageGrid, InteriorRegion, interior, load_image
from .inference import (
    ANGLE_PRESETS,
    Category,
    CurvatureResult,
    SlopeResult,
    Streamline,
    classify_signs,
    curvature_analysis,
    slope_analysis,
    trace_streamlines,
)
from .kernel import LocalMoments, estimate_derivatives, estimate_sigma

__version__ = "0.1.0"

__all__ = [
    "ANGLE_PRESETS",
    "Category",
    "CurvatureResult",
    "GridError",
    "ImageGrid",
    "InteriorRegion",
    "LocalMoments",
    "SlopeResult",
    "Streamline",
    "ThresholdSpec",
    "classify_signs",
    "critical_value",
    "curvature_analysis",
    "estimate_derivatives",
    "estimate_sigma",
    "interior",
    "load_image",
    "make_threshold",
    "slope_analysis",
    "trace_streamlines",
]
