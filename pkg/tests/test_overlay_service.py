"""
Tests for overlay rendering.
"""
import numpy as np
import pytest
from PIL import Image

from app.services.overlay_service import (
    DimensionMismatch,
    OverlayOptions,
    box_ring,
    render_overlay,
    render_side_by_side,
    save_mask,
    save_png,
)
from app.services.segmentation import BoundingBox, Contour, SegmentationResult


def centre_square_result(size=5):
    mask = np.zeros((size, size), dtype=bool)
    mask[1:4, 1:4] = True
    return SegmentationResult(
        mask=mask,
        contour=Contour(points=[(1, 1), (3, 1), (3, 3), (1, 3)]),
        bbox=BoundingBox(x=1, y=1, w=3, h=3),
        area_px=9,
    )


def test_overlay_blends_mask_and_strokes_box():
    """Mask pixels are blended purple; the surrounding ring is red."""
    image = np.full((5, 5), 100, dtype=np.uint8)
    overlay = render_overlay(image, centre_square_result())

    assert overlay.shape == (5, 5, 3)
    assert overlay.dtype == np.uint8
    inside = overlay[1:4, 1:4].reshape(-1, 3)
    assert (inside == [114, 50, 114]).all()
    ring = np.ones((5, 5), dtype=bool)
    ring[1:4, 1:4] = False
    assert (overlay[ring] == [255, 0, 0]).all()
    assert ring.sum() == 16


def test_overlay_leaves_other_pixels_alone():
    """Pixels outside the mask and the ring keep their values."""
    image = np.full((9, 9), 40, dtype=np.uint8)
    result = centre_square_result(9)
    overlay = render_overlay(image, result, OverlayOptions(box_width=1))
    assert (overlay[6:, 6:] == 40).all()
    assert (overlay[0, 5:] == 40).all()
    assert (overlay[0, :5] == [255, 0, 0]).all()


def test_zero_opacity_returns_input_unchanged():
    """Opacity 0 leaves every byte of the image as it was, box included."""
    rng = np.random.default_rng(5)
    image = rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
    overlay = render_overlay(image, centre_square_result(), OverlayOptions(opacity=0.0))
    assert overlay.tobytes() == image.tobytes()
    assert overlay.shape == image.shape


def test_red_stroke_changes_ring_area_only():
    """The stroke changes exactly the 2 px ring around an axis-aligned box."""
    image = np.full((20, 20, 3), 10, dtype=np.uint8)
    mask = np.zeros((20, 20), dtype=bool)
    mask[6:12, 5:15] = True
    result = SegmentationResult(
        mask=mask,
        contour=Contour(points=[(5, 6), (14, 6), (14, 11), (5, 11)]),
        bbox=BoundingBox(x=5, y=6, w=10, h=6),
        area_px=60,
    )
    overlay = render_overlay(image, result)

    changed = (overlay != image).any(axis=2)
    ring_area = (10 + 4) * (6 + 4) - 10 * 6
    assert (changed & ~mask).sum() == ring_area
    assert (overlay[changed & ~mask] == [255, 0, 0]).all()


def test_overlay_without_result_returns_copy():
    """No segmentation gives the image back unchanged."""
    image = np.full((4, 4, 3), 9, dtype=np.uint8)
    overlay = render_overlay(image, None)
    assert np.array_equal(overlay, image)
    assert overlay is not image


def test_overlay_dimension_mismatch():
    """A mask of another size is refused."""
    with pytest.raises(DimensionMismatch):
        render_overlay(np.zeros((6, 6), dtype=np.uint8), centre_square_result(5))


def test_box_ring_is_clipped():
    """The ring stops at the image edge."""
    ring = box_ring((4, 4), 0, 0, 2, 2, 2)
    assert not ring[:2, :2].any()
    assert ring[2:, :].any()
    assert ring.shape == (4, 4)


def test_side_by_side_pads_shorter_panel():
    """Panels sit left to right, the shorter padded with background at the bottom."""
    left = np.full((4, 3), 200, dtype=np.uint8)
    right = np.full((6, 2, 3), 50, dtype=np.uint8)
    combined = render_side_by_side(left, right, background=(1, 2, 3))

    assert combined.shape == (6, 5, 3)
    assert (combined[:4, :3] == 200).all()
    assert (combined[4:, :3] == [1, 2, 3]).all()
    assert (combined[:, 3:] == 50).all()


def test_save_png_and_mask(tmp_path):
    """Images and masks are written as PNG."""
    image = render_overlay(np.full((5, 5), 100, dtype=np.uint8), centre_square_result())
    path = save_png(image, tmp_path / "overlays" / "x.png")
    with Image.open(path) as reopened:
        assert reopened.size == (5, 5)
        assert np.array_equal(np.asarray(reopened), image)

    mask_path = save_mask(centre_square_result().mask, tmp_path / "masks" / "x.png")
    with Image.open(mask_path) as reopened:
        assert sorted(np.unique(np.asarray(reopened)).tolist()) == [0, 255]
