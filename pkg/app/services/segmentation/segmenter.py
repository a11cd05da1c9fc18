"""
Single-object segmentation pipeline.

One artifact is assumed per image, bright on a dark background: the largest
bright region after thresholding and opening is taken as the object.
"""
import logging
from typing import FrozenSet, List, Optional, Set

import numpy as np

from app.config import ThresholdMode
from app.services.segmentation.components import label_components, largest_component
from app.services.segmentation.contour import (
    bounding_box,
    rotated_box,
    simplify,
    trace_contour,
)
from app.services.segmentation.imaging import (
    between_class_variance,
    binarize,
    histogram,
    open_mask,
    otsu_threshold,
    to_grayscale,
)
from app.services.segmentation.types import (
    BinaryMask,
    Component,
    Degenerate,
    EmptyForeground,
    QualityFlag,
    SegmentationOptions,
    SegmentationResult,
)

logger = logging.getLogger(__name__)


def touches_border(mask: BinaryMask) -> bool:
    """True when any set pixel lies on the first/last row or column."""
    return bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())


class Segmenter:
    """Classical threshold-and-label segmenter."""

    def __init__(self, options: Optional[SegmentationOptions] = None) -> None:
        self.options = options or SegmentationOptions()

    def _threshold(self, hist: np.ndarray) -> tuple:
        if self.options.threshold_mode == ThresholdMode.FIXED:
            level = self.options.threshold_level
            return level, between_class_variance(hist, level)
        try:
            return otsu_threshold(hist)
        except Degenerate as e:
            raise EmptyForeground(f"Uniform image: {e}") from e

    def _flags(
        self,
        mask: BinaryMask,
        variance: float,
        largest: Component,
        components: List[Component],
    ) -> FrozenSet[QualityFlag]:
        flags: Set[QualityFlag] = set()
        if touches_border(mask):
            flags.add(QualityFlag.TOUCHES_BORDER)
        if variance < self.options.low_contrast_floor:
            flags.add(QualityFlag.LOW_CONTRAST)
        others = [c.area_px for c in components if c.label != largest.label]
        if others and max(others) > self.options.large_component_ratio * largest.area_px:
            flags.add(QualityFlag.MULTIPLE_LARGE_COMPONENTS)
        return frozenset(flags)

    def segment(self, image: np.ndarray) -> SegmentationResult:
        """
        Segment the single object of an image.

        Args:
            image: uint8 array, gray (h, w), RGB or RGBA (h, w, 3|4)

        Returns:
            SegmentationResult: Mask of the largest bright component with
            its contour, box, area and quality flags

        Raises:
            UnsupportedDepth: If the array is not 8-bit gray/RGB/RGBA
            EmptyForeground: If no pixel survives thresholding and opening
        """
        gray = to_grayscale(image)
        hist = histogram(gray)
        level, variance = self._threshold(hist)

        mask = binarize(gray, level)
        if self.options.morph_opening:
            mask = open_mask(mask)

        labels, components = label_components(mask, self.options.connectivity)
        if not components:
            raise EmptyForeground(f"No foreground above level {level}")
        largest = largest_component(components)
        object_mask = labels == largest.label

        contour = simplify(trace_contour(object_mask), self.options.polygon_epsilon_px)
        flags = self._flags(object_mask, variance, largest, components)
        if flags:
            logger.debug(f"Segmentation flags: {sorted(flag.value for flag in flags)}")

        return SegmentationResult(
            mask=object_mask,
            contour=contour,
            bbox=bounding_box(object_mask),
            area_px=largest.area_px,
            flags=flags,
            threshold_level=int(level),
            between_class_variance=float(variance),
            rotated_bbox=rotated_box(contour),
        )


def segment(image: np.ndarray, options: Optional[SegmentationOptions] = None) -> SegmentationResult:
    """Segment `image` with `options` (see Segmenter.segment)."""
    return Segmenter(options).segment(image)
