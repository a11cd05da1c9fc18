"""
Connected-component labelling and largest-component selection.
"""
from typing import List, Sequence, Tuple

import cv2
import numpy as np

from app.services.segmentation.types import BinaryMask, Component, NoComponents


def label_components(mask: BinaryMask, connectivity: int = 8) -> Tuple[np.ndarray, List[Component]]:
    """
    Label the set pixels of a mask.

    Args:
        mask: Binary mask
        connectivity: 4 or 8

    Returns:
        (label image, components ordered by the raster position of their
        first pixel); background is label 0
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    count, labels, stats, _ = cv2.connectedComponentsWithStats(
        mask.astype(np.uint8), connectivity=connectivity, ltype=cv2.CV_32S
    )
    if count <= 1:
        return labels, []

    width = mask.shape[1]
    found, first_index = np.unique(labels.ravel(), return_index=True)
    components = [
        Component(
            label=int(label),
            area_px=int(stats[label, cv2.CC_STAT_AREA]),
            seed_pixel=(int(index % width), int(index // width)),
        )
        for label, index in zip(found, first_index)
        if label != 0
    ]
    components.sort(key=lambda component: component.raster_key)
    return labels, components


def connected_components(mask: BinaryMask, connectivity: int = 8) -> List[Component]:
    """
    Connected regions of a mask.

    Every set pixel belongs to exactly one component; the areas sum to the
    mask population. An empty mask gives an empty list.
    """
    return label_components(mask, connectivity)[1]


def largest_component(components: Sequence[Component]) -> Component:
    """
    The component with the most pixels; ties go to the raster-earliest seed.

    Raises:
        NoComponents: If components is empty
    """
    if not components:
        raise NoComponents("No connected components")
    return min(components, key=lambda c: (-c.area_px, c.raster_key))
