"""
Segmentation package.

Classical single-object segmentation: grayscale, threshold, opening,
connected components, largest component, contour, box and quality flags.
"""
from app.services.segmentation.components import (
    connected_components,
    label_components,
    largest_component,
)
from app.services.segmentation.contour import (
    bounding_box,
    polygon_area,
    rotated_box,
    simplify,
    trace_contour,
)
from app.services.segmentation.imaging import (
    between_class_variance,
    binarize,
    histogram,
    load_image,
    open_mask,
    otsu_threshold,
    to_grayscale,
)
from app.services.segmentation.segmenter import Segmenter, segment, touches_border
from app.services.segmentation.types import (
    BoundingBox,
    Component,
    Contour,
    Degenerate,
    EmptyForeground,
    NoComponents,
    QualityFlag,
    RotatedBox,
    SegmentationError,
    SegmentationOptions,
    SegmentationResult,
    UnsupportedDepth,
)

__all__ = [
    "BoundingBox",
    "Component",
    "Contour",
    "Degenerate",
    "EmptyForeground",
    "NoComponents",
    "QualityFlag",
    "RotatedBox",
    "SegmentationError",
    "SegmentationOptions",
    "SegmentationResult",
    "Segmenter",
    "UnsupportedDepth",
    "between_class_variance",
    "binarize",
    "bounding_box",
    "connected_components",
    "histogram",
    "label_components",
    "largest_component",
    "load_image",
    "open_mask",
    "otsu_threshold",
    "polygon_area",
    "rotated_box",
    "segment",
    "simplify",
    "to_grayscale",
    "touches_border",
    "trace_contour",
]
