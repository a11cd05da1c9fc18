"""
Overlay rendering service.

This module draws diagnostic images: the segmentation mask blended in
purple, the bounding box stroked in red, and the original placed beside the
overlay.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image

from app.config import RunConfig
from app.services.segmentation.imaging import to_grayscale
from app.services.segmentation.types import SegmentationResult
from app.utils.helpers import ensure_dir

logger = logging.getLogger(__name__)

Color = Tuple[int, int, int]


class OverlayError(Exception):
    """Base exception for overlay errors."""

    pass


class DimensionMismatch(OverlayError):
    """Raised when a result's mask does not match the image size."""

    pass


@dataclass(frozen=True)
class OverlayOptions:
    """
    Overlay styling.

    Attributes:
        mask_color: Blend color of mask pixels
        opacity: Weight of mask_color in the blend (0 leaves pixels unchanged)
        box_color: Stroke color of the bounding box
        box_width: Stroke width in pixels, drawn just outside the box
        background: Fill used to pad side-by-side panels
    """

    mask_color: Color = (128, 0, 128)
    opacity: float = 0.5
    box_color: Color = (255, 0, 0)
    box_width: int = 2
    background: Color = (0, 0, 0)

    @classmethod
    def from_config(cls, config: RunConfig) -> "OverlayOptions":
        return cls(opacity=config.overlay_opacity)


def _to_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.repeat(image[:, :, None], 3, axis=2)
    if image.ndim == 3 and image.shape[2] == 4:
        return image[:, :, :3].copy()
    if image.ndim == 3 and image.shape[2] == 3:
        return image.copy()
    # Reject anything else the same way segmentation does.
    return np.repeat(to_grayscale(image)[:, :, None], 3, axis=2)


def _blend(pixels: np.ndarray, color: Color, opacity: float) -> np.ndarray:
    overlay = np.asarray(color, dtype=np.float64)
    mixed = opacity * overlay + (1.0 - opacity) * pixels.astype(np.float64)
    return np.clip(np.floor(mixed + 0.5), 0, 255).astype(np.uint8)


def box_ring(shape: Tuple[int, int], x: int, y: int, w: int, h: int, width: int) -> np.ndarray:
    """
    Mask of a stroke `width` pixels wide surrounding a box, clipped to the image.

    The box itself is not part of the ring.
    """
    height, img_width = shape
    ring = np.zeros((height, img_width), dtype=bool)
    top, left = max(0, y - width), max(0, x - width)
    bottom, right = min(height, y + h + width), min(img_width, x + w + width)
    ring[top:bottom, left:right] = True
    ring[y:y + h, x:x + w] = False
    return ring


def render_overlay(
    image: np.ndarray,
    result: Optional[SegmentationResult],
    options: Optional[OverlayOptions] = None,
) -> np.ndarray:
    """
    Draw a segmentation result over its image.

    Mask pixels become round(opacity * mask_color + (1 - opacity) * pixel);
    the box is stroked outside its edges. Other pixels are unchanged, and
    opacity 0 returns the image as given.

    Args:
        image: uint8 gray, RGB or RGBA image
        result: Segmentation of `image`; None returns a copy unchanged
        options: Styling

    Returns:
        RGB uint8 image

    Raises:
        DimensionMismatch: If the result mask size differs from the image
    """
    options = options or OverlayOptions()
    canvas = _to_rgb(image)
    if result is None:
        logger.warning("No segmentation to draw; returning the image unchanged")
        return canvas
    if result.mask.shape != canvas.shape[:2]:
        raise DimensionMismatch(
            f"Mask {result.mask.shape[1]}x{result.mask.shape[0]} does not match "
            f"image {canvas.shape[1]}x{canvas.shape[0]}"
        )

    # Opacity 0 disables the whole overlay, stroke included.
    if options.opacity <= 0:
        return canvas
    canvas[result.mask] = _blend(canvas[result.mask], options.mask_color, options.opacity)
    if options.box_width > 0:
        box = result.bbox
        ring = box_ring(canvas.shape[:2], box.x, box.y, box.w, box.h, options.box_width)
        canvas[ring] = np.asarray(options.box_color, dtype=np.uint8)
    return canvas


def render_side_by_side(
    original: np.ndarray,
    overlay: np.ndarray,
    background: Color = (0, 0, 0),
) -> np.ndarray:
    """
    Place the original left of the overlay.

    The shorter panel is padded at the bottom with `background`.

    Returns:
        RGB uint8 image of width w1 + w2 and the larger height
    """
    left, right = _to_rgb(original), _to_rgb(overlay)
    height = max(left.shape[0], right.shape[0])

    def pad(panel: np.ndarray) -> np.ndarray:
        if panel.shape[0] == height:
            return panel
        filler = np.empty((height - panel.shape[0], panel.shape[1], 3), dtype=np.uint8)
        filler[:] = np.asarray(background, dtype=np.uint8)
        return np.vstack([panel, filler])

    return np.hstack([pad(left), pad(right)])


def save_png(image: np.ndarray, path: Path) -> Path:
    """Write an RGB or gray array as PNG."""
    ensure_dir(path.parent)
    Image.fromarray(image).save(path, format="PNG")
    return path


def save_mask(mask: np.ndarray, path: Path) -> Path:
    """Write a binary mask as a 0/255 gray PNG."""
    return save_png(np.where(mask, 255, 0).astype(np.uint8), path)
