"""
Tests for classical segmentation.

Otsu, opening and labelling are checked against brute-force oracles written
here; the full pipeline is checked against the mock archive's ground truth.
"""
import io
from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from PIL import Image

from app.config import ThresholdMode
from app.services.mock_site import MockSpec, generate_site, load_ground_truth, open_cross, render_view
from app.services.segmentation import (
    BoundingBox,
    Component,
    Contour,
    Degenerate,
    EmptyForeground,
    NoComponents,
    QualityFlag,
    SegmentationOptions,
    UnsupportedDepth,
    between_class_variance,
    binarize,
    bounding_box,
    connected_components,
    histogram,
    largest_component,
    load_image,
    open_mask,
    otsu_threshold,
    polygon_area,
    segment,
    simplify,
    to_grayscale,
    touches_border,
    trace_contour,
)


def disc(shape, cx, cy, r):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def flood_fill_areas(mask, connectivity):
    """Component areas by breadth-first search."""
    if connectivity == 4:
        steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    else:
        steps = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)]
    seen = np.zeros_like(mask, dtype=bool)
    areas = []
    height, width = mask.shape
    for y in range(height):
        for x in range(width):
            if not mask[y, x] or seen[y, x]:
                continue
            seen[y, x] = True
            queue, area = deque([(x, y)]), 0
            while queue:
                px, py = queue.popleft()
                area += 1
                for dx, dy in steps:
                    nx, ny = px + dx, py + dy
                    if 0 <= nx < width and 0 <= ny < height and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((nx, ny))
            areas.append(area)
    return areas


def brute_force_otsu(hist):
    """Lowest level with the largest between-class variance."""
    scores = [between_class_variance(hist, level) for level in range(255)]
    best = max(scores)
    return next(level for level, score in enumerate(scores) if score >= best * (1 - 1e-12))


def iou(a, b):
    return np.logical_and(a, b).sum() / np.logical_or(a, b).sum()


# Pixel steps


def test_to_grayscale_weights():
    """Pure primaries map to the rounded luma weights."""
    image = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]]], dtype=np.uint8)
    assert to_grayscale(image).tolist() == [[76, 150, 29, 255]]


def test_to_grayscale_ignores_alpha_and_passes_gray():
    """RGBA drops alpha; 2-D input is returned as is."""
    rgba = np.zeros((2, 2, 4), dtype=np.uint8)
    rgba[..., 1] = 100
    rgba[..., 3] = 7
    assert to_grayscale(rgba).tolist() == [[59, 59], [59, 59]]
    gray = np.arange(4, dtype=np.uint8).reshape(2, 2)
    assert to_grayscale(gray) is gray


def test_to_grayscale_rejects_16_bit():
    """Non-8-bit samples are refused."""
    with pytest.raises(UnsupportedDepth):
        to_grayscale(np.zeros((2, 2), dtype=np.uint16))


def test_otsu_bimodal_ties_go_low():
    """Two spikes split at the top of the lower spike."""
    hist = np.zeros(256, dtype=np.int64)
    hist[10] = 100
    hist[200] = 100
    level, variance = otsu_threshold(hist)
    assert level == 10
    assert variance == pytest.approx(95.0**2)


@pytest.mark.parametrize("seed", range(8))
def test_otsu_matches_brute_force(seed):
    """Exact search agrees with scoring every level."""
    rng = np.random.default_rng(seed)
    gray = np.concatenate(
        [rng.normal(40, 12, 3000), rng.normal(170, 25, 1500)]
    ).clip(0, 255).astype(np.uint8)
    hist = histogram(gray)
    level, variance = otsu_threshold(hist)
    assert level == brute_force_otsu(hist)
    assert variance == pytest.approx(between_class_variance(hist, level))


def exact_otsu(hist):
    """Lowest level with the largest between-class variance, scored in exact fractions."""
    hist = [int(count) for count in hist]
    total = sum(hist)
    weighted = sum(level * count for level, count in enumerate(hist))
    best_level, best_score = None, None
    n0 = s0 = 0
    for level in range(255):
        n0 += hist[level]
        s0 += level * hist[level]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        score = Fraction((total * s0 - n0 * weighted) ** 2, n0 * n1)
        if best_score is None or score > best_score:
            best_level, best_score = level, score
    return best_level


@pytest.mark.parametrize("seed", range(100))
def test_otsu_matches_exact_search_on_random_histograms(seed):
    """Random sparse histograms, whose empty bins tie neighbouring levels, agree with the exact oracle."""
    rng = np.random.default_rng(1000 + seed)
    hist = rng.integers(0, 500, size=256)
    hist[rng.random(256) < 0.6] = 0
    if np.count_nonzero(hist) < 2:
        hist[[3, 250]] = 1
    level, variance = otsu_threshold(hist)
    assert level == exact_otsu(hist)
    assert variance == pytest.approx(between_class_variance(hist, level))


def test_otsu_tie_between_separate_gaps_goes_low():
    """Three equal spikes score the same at both gaps; the lower gap wins."""
    hist = np.zeros(256, dtype=np.int64)
    hist[[20, 120, 220]] = 50
    level, _ = otsu_threshold(hist)
    assert between_class_variance(hist, 20) == pytest.approx(between_class_variance(hist, 120))
    assert level == 20
    assert exact_otsu(hist) == 20


def test_otsu_single_level_is_degenerate():
    """A uniform histogram cannot be split."""
    hist = np.zeros(256, dtype=np.int64)
    hist[77] = 500
    with pytest.raises(Degenerate):
        otsu_threshold(hist)


def test_binarize_is_strict():
    """Pixels equal to the level are background."""
    gray = np.array([[9, 10, 11]], dtype=np.uint8)
    assert binarize(gray, 10).tolist() == [[False, False, True]]


def test_open_mask_removes_specks_keeps_bodies():
    """Isolated pixels vanish; a square keeps all but its corners."""
    mask = np.zeros((12, 12), dtype=bool)
    mask[1, 1] = True
    mask[4:9, 4:9] = True
    opened = open_mask(mask)
    assert not opened[1, 1]
    assert opened.sum() == 25 - 4
    assert opened[4, 5] and not opened[4, 4]


@pytest.mark.parametrize("seed", range(5))
def test_open_mask_matches_reference(seed):
    """Opening agrees with a shift-based cross opening, borders included."""
    mask = np.random.default_rng(seed).random((30, 40)) > 0.4
    assert np.array_equal(open_mask(mask), open_cross(mask))


def test_open_mask_keeps_object_on_border():
    """Pixels beyond the edge do not erode an object touching it."""
    mask = np.zeros((10, 10), dtype=bool)
    mask[0:4, 0:4] = True
    assert open_mask(mask)[0, 0]


# Components


def test_components_connectivity():
    """Diagonal neighbours join under 8-connectivity only."""
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 0] = mask[1, 1] = True
    assert len(connected_components(mask, 4)) == 2
    assert len(connected_components(mask, 8)) == 1


@pytest.mark.parametrize("connectivity", [4, 8])
@pytest.mark.parametrize("seed", range(4))
def test_components_match_flood_fill(connectivity, seed):
    """Areas agree with a breadth-first oracle and partition the mask."""
    mask = np.random.default_rng(seed).random((25, 35)) > 0.55
    components = connected_components(mask, connectivity)
    assert sorted(c.area_px for c in components) == sorted(flood_fill_areas(mask, connectivity))
    assert sum(c.area_px for c in components) == int(mask.sum())
    assert [c.raster_key for c in components] == sorted(c.raster_key for c in components)


def test_components_empty_mask():
    """No set pixels means no components."""
    assert connected_components(np.zeros((5, 5), dtype=bool)) == []


def test_largest_component_ties_to_earliest_seed():
    """Equal areas resolve to the raster-first component."""
    a = Component(label=1, area_px=10, seed_pixel=(5, 2))
    b = Component(label=2, area_px=10, seed_pixel=(1, 3))
    c = Component(label=3, area_px=4, seed_pixel=(0, 0))
    assert largest_component([b, c, a]) == a


def test_largest_component_of_nothing():
    """An empty list is an error."""
    with pytest.raises(NoComponents):
        largest_component([])


# Geometry


def test_bounding_box():
    """The box is tight around set pixels."""
    mask = np.zeros((10, 12), dtype=bool)
    mask[2:5, 3:9] = True
    mask[7, 4] = True
    assert bounding_box(mask) == BoundingBox(x=3, y=2, w=6, h=6)


def test_trace_rectangle():
    """A rectangle's trace is its ring of edge pixels, clockwise from top-left."""
    mask = np.zeros((8, 8), dtype=bool)
    mask[1:5, 2:5] = True
    contour = trace_contour(mask)

    expected = {(x, y) for y, x in zip(*np.nonzero(mask)) if x in (2, 4) or y in (1, 4)}
    assert set(contour.points) == expected
    assert len(contour.points) == len(expected) == 10
    assert contour.points[0] == (2, 1)
    assert contour.points[1] == (3, 1)


def test_trace_disc_stays_on_boundary():
    """Every traced point is a foreground pixel next to the background."""
    mask = disc((60, 60), 30, 30, 20)
    contour = trace_contour(mask)
    padded = np.pad(mask, 1)
    for x, y in contour.points:
        assert mask[y, x]
        assert not padded[y : y + 3, x : x + 3].all()
    assert contour.points[0] == (30, 10)


def test_trace_single_pixel_gives_box_corners():
    """A one-pixel object yields its four corner lattice points."""
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 3] = True
    assert trace_contour(mask).points == [(3, 2), (4, 2), (4, 3), (3, 3)]


def test_trace_thin_line_terminates(caplog):
    """A one-pixel-thin segment is traced out and back once."""
    mask = np.zeros((5, 8), dtype=bool)
    mask[2, 1:6] = True
    contour = trace_contour(mask)
    assert contour.points == [(1, 2), (2, 2), (3, 2), (4, 2), (5, 2), (4, 2), (3, 2), (2, 2)]
    assert "stopped after" not in caplog.text


def test_polygon_area():
    """Shoelace area of a square ring."""
    square = Contour(points=[(0, 0), (4, 0), (4, 4), (0, 4)])
    assert polygon_area(square) == 16.0


def test_simplify_zero_epsilon_is_identity():
    """Epsilon 0 leaves the contour unchanged."""
    contour = trace_contour(disc((40, 40), 20, 20, 10))
    assert simplify(contour, 0.0) == contour


def test_simplify_keeps_area_within_two_percent():
    """Simplification reduces points, keeps originals, and preserves area."""
    contour = trace_contour(disc((120, 120), 60, 60, 50))
    simplified = simplify(contour, 1.0)

    assert 3 <= len(simplified) < len(contour)
    assert set(simplified.points) <= set(contour.points)
    assert abs(polygon_area(simplified) - polygon_area(contour)) <= 0.02 * polygon_area(contour)


def test_simplify_rejects_negative_epsilon():
    """Negative tolerances are invalid."""
    with pytest.raises(ValueError):
        simplify(Contour(points=[(0, 0), (1, 0), (1, 1), (0, 1)]), -1.0)


# Pipeline


def synthetic(shape=(100, 140), background=12, foreground=200):
    image = np.full(shape, background, dtype=np.uint8)
    image[disc(shape, 70, 50, 25)] = foreground
    return image


def test_segment_synthetic_disc():
    """The disc is found with a tight box and no flags."""
    image = synthetic()
    result = segment(image)

    expected = open_cross(disc(image.shape, 70, 50, 25))
    assert np.array_equal(result.mask, expected)
    assert result.area_px == int(expected.sum())
    assert result.bbox == bounding_box(expected)
    assert result.flags == frozenset()
    assert result.threshold_level == 12
    assert len(result.contour) >= 3
    assert result.rotated_bbox is not None


def test_segment_picks_largest_object():
    """A smaller bright region is ignored."""
    image = synthetic()
    image[5:12, 5:12] = 220
    result = segment(image)
    assert not result.mask[8, 8]
    assert result.mask[50, 70]
    assert QualityFlag.MULTIPLE_LARGE_COMPONENTS not in result.flags


def test_segment_flags_touching_border():
    """An object on the image edge is flagged."""
    image = np.full((60, 60), 10, dtype=np.uint8)
    image[disc(image.shape, 0, 30, 15)] = 200
    assert QualityFlag.TOUCHES_BORDER in segment(image).flags


def test_segment_flags_low_contrast():
    """A faint object is flagged for review."""
    result = segment(synthetic(background=10, foreground=16))
    assert QualityFlag.LOW_CONTRAST in result.flags


def test_segment_flags_multiple_large_components():
    """Two comparable objects are flagged."""
    image = np.full((80, 160), 10, dtype=np.uint8)
    image[disc(image.shape, 40, 40, 20)] = 200
    image[disc(image.shape, 120, 40, 18)] = 200
    result = segment(image)
    assert QualityFlag.MULTIPLE_LARGE_COMPONENTS in result.flags
    assert result.mask[40, 40]


def test_segment_uniform_image_is_empty():
    """A uniform image has no foreground."""
    with pytest.raises(EmptyForeground):
        segment(np.full((20, 20), 128, dtype=np.uint8))


def test_segment_speckle_only_is_empty():
    """Foreground removed entirely by opening is empty."""
    image = np.full((20, 20), 10, dtype=np.uint8)
    image[5, 5] = image[12, 14] = 250
    with pytest.raises(EmptyForeground):
        segment(image)


def test_segment_fixed_threshold():
    """Fixed mode uses the configured level."""
    options = SegmentationOptions(threshold_mode=ThresholdMode.FIXED, threshold_level=100)
    result = segment(synthetic(), options)
    assert result.threshold_level == 100


def test_segment_four_connectivity_and_no_opening():
    """Options reach the pipeline."""
    options = SegmentationOptions(connectivity=4, morph_opening=False)
    image = synthetic()
    result = segment(image, options)
    assert np.array_equal(result.mask, disc(image.shape, 70, 50, 25))


def test_touches_border():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    assert not touches_border(mask)
    mask[4, 2] = True
    assert touches_border(mask)


def test_load_image_modes(tmp_path):
    """Palette images become RGB; 16-bit images are refused."""
    palette = Image.fromarray(synthetic()).convert("P")
    assert load_image(palette).shape == (100, 140, 3)

    path = tmp_path / "deep.png"
    Image.fromarray(np.full((10, 10), 40000, dtype=np.uint16)).save(path)
    with pytest.raises(UnsupportedDepth):
        load_image(path)


@pytest.mark.parametrize("name", ["1f", "2r", "7s", "13f", "25s"])
def test_segment_mock_archive_matches_ground_truth(mock_site, name):
    """Mock JPEGs segment to their ground-truth masks."""
    image = load_image(mock_site / "images" / "full" / f"{name}.jpg")
    truth = load_ground_truth(mock_site, f"{name}.png")

    result = segment(image)

    assert iou(result.mask, truth) >= 0.99
    assert result.flags == frozenset()
    assert abs(result.area_px - int(truth.sum())) <= 0.01 * truth.sum()


def test_segment_adversarial_scale_bar(tmp_path):
    """A scale bar half the blob's size is not chosen, but it is flagged."""
    site = tmp_path / "adversarial"
    generate_site(MockSpec(record_count=2, seed=3, adversarial=True), site)
    for name in ("1f", "2r"):
        result = segment(load_image(site / "images" / "full" / f"{name}.jpg"))
        assert iou(result.mask, load_ground_truth(site, f"{name}.png")) >= 0.99
        assert QualityFlag.MULTIPLE_LARGE_COMPONENTS in result.flags


def seeded_mock_views(count, seed):
    """First `count` views of a seeded mock archive, with their ground truth."""
    spec = MockSpec(record_count=(count + 2) // 3, seed=seed)
    views = [
        (record_id, view_index)
        for record_id in range(1, spec.record_count + 1)
        for view_index in range(len(spec.views))
    ]
    for record_id, view_index in views[:count]:
        yield render_view(spec, record_id, view_index)


def lossless(pixels):
    """Round-trip a gray array through PNG and back through load_image."""
    buffer = io.BytesIO()
    Image.fromarray(pixels).save(buffer, format="PNG")
    buffer.seek(0)
    return load_image(Image.open(buffer))


def test_segment_two_hundred_mock_views_exactly():
    """Losslessly stored mock views segment to exactly their ground truth, box and area."""
    checked = 0
    for pixels, truth in seeded_mock_views(200, seed=2024):
        result = segment(lossless(pixels))

        assert np.array_equal(result.mask, truth)
        assert result.flags == frozenset()
        assert result.area_px == int(truth.sum())
        assert result.bbox == bounding_box(truth)
        box = result.bbox
        assert truth[box.y, box.x:box.x + box.w].any()
        assert truth[box.y + box.h - 1, box.x:box.x + box.w].any()
        assert truth[box.y:box.y + box.h, box.x].any()
        assert truth[box.y:box.y + box.h, box.x + box.w - 1].any()
        area = int(truth.sum())
        assert abs(polygon_area(result.contour) - area) <= max(16, 0.02 * area)
        checked += 1
    assert checked == 200
