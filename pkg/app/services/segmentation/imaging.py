"""
Pixel-level steps: image loading, grayscale conversion, Otsu thresholding,
binarization and morphological opening.
"""
import logging
from pathlib import Path
from typing import Sequence, Tuple, Union

import cv2
import numpy as np
from PIL import Image

from app.services.segmentation.types import (
    BinaryMask,
    Degenerate,
    GrayImage,
    UnsupportedDepth,
)

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
HISTOGRAM_BINS = 256

_DIRECT_MODES = {"L", "RGB", "RGBA"}
_CONVERTIBLE_MODES = {"P", "PA", "CMYK", "LA", "1", "YCbCr", "LAB", "HSV"}

# 3x3 cross structuring element.
CROSS_KERNEL = cv2.getStructuringElement(cv2.MORPH_CROSS, (3, 3))


def load_image(source: Union[Path, str, Image.Image]) -> np.ndarray:
    """
    Decode an image into an 8-bit array.

    Gray, RGB and RGBA are returned as decoded; palette, CMYK and similar
    8-bit modes are converted to RGB.

    Returns:
        Array of shape (h, w), (h, w, 3) or (h, w, 4), dtype uint8

    Raises:
        UnsupportedDepth: For 16-bit, 32-bit integer or float images
    """
    image = source if isinstance(source, Image.Image) else Image.open(source)
    try:
        image.load()
        if image.mode in _DIRECT_MODES:
            return np.asarray(image, dtype=np.uint8).copy()
        if image.mode in _CONVERTIBLE_MODES:
            return np.asarray(image.convert("RGB"), dtype=np.uint8).copy()
        raise UnsupportedDepth(f"Unsupported image mode {image.mode!r}")
    finally:
        if not isinstance(source, Image.Image):
            image.close()


def to_grayscale(image: np.ndarray) -> GrayImage:
    """
    Convert to 8-bit luminance.

    luma = round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]; a 2-D
    input passes through and an alpha channel is ignored.

    Raises:
        UnsupportedDepth: If the array is not uint8 gray, RGB or RGBA
    """
    if image.dtype != np.uint8:
        raise UnsupportedDepth(f"Expected 8-bit samples, got {image.dtype}")
    if image.ndim == 2:
        return image
    if image.ndim != 3 or image.shape[2] not in (3, 4):
        raise UnsupportedDepth(f"Expected gray, RGB or RGBA, got shape {image.shape}")
    rgb = image[:, :, :3].astype(np.float64)
    luma = rgb @ np.asarray(LUMA_WEIGHTS)
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def histogram(gray: GrayImage) -> np.ndarray:
    """256-bin count of luminance values."""
    return np.bincount(gray.ravel(), minlength=HISTOGRAM_BINS)


def _class_sums(hist: Sequence[int]) -> Tuple[int, int]:
    total = sum(int(count) for count in hist)
    weighted = sum(level * int(count) for level, count in enumerate(hist))
    return total, weighted


def between_class_variance(hist: Sequence[int], level: int) -> float:
    """
    Between-class variance when splitting at `level` (class 0 is <= level).

    Returns:
        The variance, or 0.0 when one class is empty
    """
    total, weighted = _class_sums(hist)
    n0 = sum(int(count) for count in hist[: level + 1])
    s0 = sum(index * int(count) for index, count in enumerate(hist[: level + 1]))
    n1 = total - n0
    if n0 == 0 or n1 == 0:
        return 0.0
    return (total * s0 - n0 * weighted) ** 2 / (n0 * n1) / total**2


def otsu_threshold(hist: Sequence[int]) -> Tuple[int, float]:
    """
    Otsu's threshold over a 256-bin histogram.

    Scores are compared exactly in integer arithmetic, so ties resolve to
    the lowest level deterministically.

    Args:
        hist: Pixel counts per level

    Returns:
        (level, between-class variance); foreground is pixels > level

    Raises:
        Degenerate: If fewer than two levels are populated
    """
    if len(hist) != HISTOGRAM_BINS:
        raise ValueError(f"Histogram must have {HISTOGRAM_BINS} bins, got {len(hist)}")
    total, weighted = _class_sums(hist)
    if total <= 0:
        raise Degenerate("Empty histogram")

    best_level = -1
    best_num, best_den = 0, 1
    n0 = s0 = 0
    for level in range(HISTOGRAM_BINS - 1):
        count = int(hist[level])
        n0 += count
        s0 += level * count
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (total * s0 - n0 * weighted) ** 2
        den = n0 * n1
        if best_level < 0 or num * best_den > best_num * den:
            best_level, best_num, best_den = level, num, den

    if best_level < 0:
        raise Degenerate("All pixels share one level")
    return best_level, best_num / best_den / total**2


def binarize(gray: GrayImage, level: int) -> BinaryMask:
    """Mask of pixels strictly brighter than `level`."""
    return gray > level


def open_mask(mask: BinaryMask) -> BinaryMask:
    """
    One morphological opening with a 3x3 cross.

    Erosion treats pixels beyond the image edge as set and dilation treats
    them as unset, so objects touching the border are not eaten away.
    """
    opened = cv2.morphologyEx(mask.astype(np.uint8), cv2.MORPH_OPEN, CROSS_KERNEL)
    return opened.astype(bool)
