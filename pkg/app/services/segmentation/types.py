"""
Segmentation data types and errors.

Images are numpy arrays indexed [row, column]; coordinates exposed by the
result types are (x, y) with x rightward and y downward.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from app.config import RunConfig, ThresholdMode

# 2-D uint8 luminance, shape (height, width).
GrayImage = np.ndarray
# 2-D bool, shape (height, width).
BinaryMask = np.ndarray

Point = Tuple[int, int]


class SegmentationError(Exception):
    """Base exception for segmentation errors."""

    pass


class UnsupportedDepth(SegmentationError):
    """Raised when the input is not an 8-bit gray, RGB or RGBA image."""

    pass


class Degenerate(SegmentationError):
    """Raised when a histogram holds a single populated level."""

    pass


class NoComponents(SegmentationError):
    """Raised when largest_component receives no components."""

    pass


class EmptyForeground(SegmentationError):
    """Raised when no pixel survives thresholding and opening."""

    pass


class QualityFlag(str, Enum):
    """Review flags attached to a segmentation result."""

    TOUCHES_BORDER = "touches_border"
    LOW_CONTRAST = "low_contrast"
    MULTIPLE_LARGE_COMPONENTS = "multiple_large_components"


@dataclass(frozen=True)
class Component:
    """
    One connected region of a binary mask.

    Attributes:
        label: Value of the region in the label image
        area_px: Pixel count
        seed_pixel: (x, y) of the region's first pixel in raster order
    """

    label: int
    area_px: int
    seed_pixel: Point

    @property
    def raster_key(self) -> Tuple[int, int]:
        return self.seed_pixel[1], self.seed_pixel[0]


@dataclass(frozen=True)
class Contour:
    """Closed ring of (x, y) points; the last point connects to the first."""

    points: List[Point]

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left origin, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def as_list(self) -> List[int]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class RotatedBox:
    """Minimum-area rotated rectangle around the contour."""

    center_x: float
    center_y: float
    width: float
    height: float
    angle_deg: float


@dataclass
class SegmentationResult:
    """
    Single-object segmentation of one image.

    Attributes:
        mask: The selected component only
        contour: Outer boundary of the mask, clockwise, possibly simplified
        bbox: Tight bounding box of the mask
        area_px: Number of set mask pixels
        flags: Quality flags for human review
        threshold_level: Level used for binarization
        between_class_variance: Otsu separation of the histogram at that level
        rotated_bbox: Minimum-area rectangle of the contour
    """

    mask: BinaryMask
    contour: Contour
    bbox: BoundingBox
    area_px: int
    flags: FrozenSet[QualityFlag] = field(default_factory=frozenset)
    threshold_level: int = 0
    between_class_variance: float = 0.0
    rotated_bbox: Optional[RotatedBox] = None

    @property
    def flag_names(self) -> List[str]:
        return sorted(flag.value for flag in self.flags)


@dataclass(frozen=True)
class SegmentationOptions:
    """Tunables of the segmentation pipeline."""

    threshold_mode: ThresholdMode = ThresholdMode.OTSU
    threshold_level: int = 128
    connectivity: int = 8
    morph_opening: bool = True
    polygon_epsilon_px: float = 0.0
    low_contrast_floor: float = 100.0
    large_component_ratio: float = 0.25

    @classmethod
    def from_config(cls, config: RunConfig) -> "SegmentationOptions":
        return cls(
            threshold_mode=config.threshold_mode,
            threshold_level=config.threshold_level,
            connectivity=config.connectivity,
            morph_opening=config.morph_opening,
            polygon_epsilon_px=config.polygon_epsilon_px,
            low_contrast_floor=config.low_contrast_floor,
            large_component_ratio=config.large_component_ratio,
        )
