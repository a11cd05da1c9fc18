"""
Boundary tracing and polygon geometry.

Contours are traced with the Moore-neighbour algorithm and Jacob's stopping
criterion; simplification is Douglas-Peucker on the closed ring.
"""
import logging
from typing import List, Optional

import cv2
import numpy as np

from app.services.segmentation.types import BinaryMask, BoundingBox, Contour, Point, RotatedBox

logger = logging.getLogger(__name__)

# Clockwise in image coordinates (y down), starting west.
MOORE_OFFSETS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_OFFSET_INDEX = {offset: index for index, offset in enumerate(MOORE_OFFSETS)}
WEST = 0

# Largest relative area change simplify() accepts.
AREA_TOLERANCE = 0.02


def _is_set(mask: BinaryMask, x: int, y: int) -> bool:
    height, width = mask.shape
    return 0 <= x < width and 0 <= y < height and bool(mask[y, x])


def bounding_box(mask: BinaryMask) -> BoundingBox:
    """
    Tight axis-aligned box of the set pixels.

    Raises:
        ValueError: If the mask is empty
    """
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("bounding_box of an empty mask")
    return BoundingBox(
        x=int(cols[0]),
        y=int(rows[0]),
        w=int(cols[-1] - cols[0] + 1),
        h=int(rows[-1] - rows[0] + 1),
    )


def _corner_ring(bbox: BoundingBox) -> List[Point]:
    return [
        (bbox.x, bbox.y),
        (bbox.x + bbox.w, bbox.y),
        (bbox.x + bbox.w, bbox.y + bbox.h),
        (bbox.x, bbox.y + bbox.h),
    ]


def trace_contour(mask: BinaryMask) -> Contour:
    """
    Trace the outer boundary of a single-component mask.

    Starts at the raster-first set pixel with the backtrack to its west and
    walks clockwise until the start is re-entered from the same direction.
    A component too small to give a three-point ring (one pixel, or a
    one-pixel-thin segment) yields the corner lattice points of its box.

    Args:
        mask: Mask holding one component with at least one pixel

    Returns:
        Contour: Clockwise ring of boundary pixels

    Raises:
        ValueError: If the mask is empty
    """
    flat = np.flatnonzero(mask.ravel())
    if flat.size == 0:
        raise ValueError("trace_contour of an empty mask")
    width = mask.shape[1]
    start = (int(flat[0] % width), int(flat[0] // width))

    points: List[Point] = [start]
    current = start
    backtrack = WEST
    # Each boundary pixel is entered at most four times.
    limit = 4 * int(flat.size) + 8

    for _ in range(limit):
        found: Optional[Point] = None
        previous_neighbour = current
        for step in range(1, 9):
            direction = (backtrack + step) % 8
            dx, dy = MOORE_OFFSETS[direction]
            neighbour = (current[0] + dx, current[1] + dy)
            if _is_set(mask, *neighbour):
                found = neighbour
                previous_neighbour = (
                    current[0] + MOORE_OFFSETS[(direction - 1) % 8][0],
                    current[1] + MOORE_OFFSETS[(direction - 1) % 8][1],
                )
                break
        if found is None:
            break
        # Leaving the start along the first edge again closes the ring; thin
        # parts can bring the trace back to the start from another side.
        if current == start and len(points) > 1 and found == points[1]:
            points.pop()
            break
        backtrack = _OFFSET_INDEX.get(
            (previous_neighbour[0] - found[0], previous_neighbour[1] - found[1]), WEST
        )
        current = found
        if current == start and backtrack == WEST:
            break
        points.append(current)
    else:
        logger.warning(f"Contour trace stopped after {limit} steps at {current}")

    if len(points) < 3:
        return Contour(points=_corner_ring(bounding_box(mask)))
    return Contour(points=points)


def polygon_area(contour: Contour) -> float:
    """Absolute shoelace area of the closed ring."""
    if len(contour) < 3:
        return 0.0
    xy = contour.as_array()
    x, y = xy[:, 0], xy[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def _segment_distances(points: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    delta = end - start
    length = float(np.hypot(*delta))
    if length == 0.0:
        return np.hypot(points[:, 0] - start[0], points[:, 1] - start[1])
    cross = delta[0] * (points[:, 1] - start[1]) - delta[1] * (points[:, 0] - start[0])
    return np.abs(cross) / length


def _douglas_peucker(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices of the points kept from an open polyline."""
    keep = np.zeros(len(points), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(points) - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        distances = _segment_distances(points[first + 1:last], points[first], points[last])
        index = int(np.argmax(distances))
        if distances[index] > epsilon:
            split = first + 1 + index
            keep[split] = True
            stack.append((first, split))
            stack.append((split, last))
    return np.flatnonzero(keep)


def _simplify_ring(points: np.ndarray, epsilon: float) -> List[int]:
    """Indices of the ring points kept, in ring order."""
    # Split the ring at the first point and the point farthest from it.
    far = int(np.argmax(np.hypot(points[:, 0] - points[0, 0], points[:, 1] - points[0, 1])))
    if far == 0:
        return list(range(len(points)))
    first_half = points[: far + 1]
    second_half = np.vstack([points[far:], points[:1]])
    kept_first = _douglas_peucker(first_half, epsilon)
    kept_second = _douglas_peucker(second_half, epsilon) + far
    return [int(i) for i in kept_first[:-1]] + [int(i) for i in kept_second[:-1]]


def simplify(contour: Contour, epsilon_px: float) -> Contour:
    """
    Douglas-Peucker simplification of a closed contour.

    The tolerance is halved until the simplified area is within 2% of the
    input area; a result with fewer than three points is discarded.

    Args:
        contour: Ring to simplify
        epsilon_px: Maximum distance of a dropped point from the kept outline

    Returns:
        Contour: The simplified ring, or the input when epsilon_px is 0

    Raises:
        ValueError: If epsilon_px is negative
    """
    if epsilon_px < 0:
        raise ValueError(f"epsilon_px must be >= 0, got {epsilon_px}")
    if epsilon_px == 0 or len(contour) <= 3:
        return contour

    points = contour.as_array()
    original_area = polygon_area(contour)
    epsilon = epsilon_px
    while epsilon >= 1e-3:
        kept = _simplify_ring(points, epsilon)
        if len(kept) < 3:
            return contour
        candidate = Contour(points=[contour.points[i] for i in kept])
        if original_area == 0.0 or abs(polygon_area(candidate) - original_area) <= AREA_TOLERANCE * original_area:
            return candidate
        epsilon /= 2
    return contour


def rotated_box(contour: Contour) -> RotatedBox:
    """Minimum-area rectangle enclosing the contour points."""
    (cx, cy), (width, height), angle = cv2.minAreaRect(contour.as_array().astype(np.float32))
    return RotatedBox(
        center_x=float(cx),
        center_y=float(cy),
        width=float(width),
        height=float(height),
        angle_deg=float(angle),
    )
