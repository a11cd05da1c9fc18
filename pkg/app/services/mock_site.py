"""
Mock archive generator.

This module writes a deterministic synthetic copy of the collection's web
layout: record pages using the collection's field vocabulary, three view
images per record (a bright blob and a small bright scale bar on a dark
noisy background), thumbnails, ground-truth masks and robots.txt. The same
MockSpec always produces byte-identical files.
"""
import html
import io
import json
import logging
import math
import random
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw
from pydantic import BaseModel, Field, field_validator

from app.config import MAX_SEED
from app.schemas.record import RECORD_FIELD_LABELS
from app.utils.helpers import atomic_write, ensure_dir

logger = logging.getLogger(__name__)

SPEC_FILENAME = "mock_spec.json"
RECORDS_DIR = "records"
FULL_IMAGES_DIR = "images/full"
THUMB_IMAGES_DIR = "images/thumbs"
GROUND_TRUTH_DIR = "ground_truth"
RECORD_PATH = "/bf_record.cfm"

DEFAULT_ROBOTS = "User-agent: *\nDisallow: /private/\n"

BACKGROUND_RANGE = (10, 20)
BLOB_RANGE = (190, 210)
BAR_RANGE = (230, 250)
BAR_SIZE = (30, 6)
EDGE_MARGIN = 8
THUMB_SIZE = (100, 75)

VIEW_NAMES = {"f": "Front", "r": "Rear", "s": "Side"}

SITES = [
    ("WARREN HILL", "ENGLAND", "EUROPE"),
    ("BOXGROVE", "ENGLAND", "EUROPE"),
    ("SWANSCOMBE", "ENGLAND", "EUROPE"),
    ("FURZE PLATT", "ENGLAND", "EUROPE"),
    ("HOXNE", "ENGLAND", "EUROPE"),
    ("ST ACHEUL", "FRANCE", "EUROPE"),
    ("ATAPUERCA", "SPAIN", "EUROPE"),
    ("OLDUVAI GORGE", "TANZANIA", "AFRICA"),
    ("KALAMBO FALLS", "ZAMBIA", "AFRICA"),
    ("OLORGESAILIE", "KENYA", "AFRICA"),
    ("GESHER BENOT YA'AQOV", "ISRAEL", "NEAR EAST"),
    ("UBEIDIYA", "ISRAEL", "NEAR EAST"),
]
BIFACE_TYPES = ["HANDAXE", "CLEAVER", "PICK"]
SHAPES = ["IRREGULAR", "LINEAR", "OVATE", "CORDATE", "POINTED"]
MATERIALS = ["FLINT", "QUARTZITE", "BASALT", "CHERT"]
COMPLETENESS = ["COMPLETE", "BROKEN TIP", "BROKEN BUTT", "UNCLEAR"]
FINDERS = ["STURGE", "EVANS", "SMITH", "WYMER", "ROE", "UNCLEAR"]
MUSEUMS = [
    "BRITISH MUSEUM, LONDON, ENGLAND",
    "PITT RIVERS MUSEUM, OXFORD, ENGLAND",
    "MUSEE DES ANTIQUITES NATIONALES, ST GERMAIN-EN-LAYE, FRANCE",
    "NATIONAL MUSEUM OF TANZANIA, DAR ES SALAAM, TANZANIA",
    "UNCLEAR",
]
DESCRIPTIONS = ["POSSIBLE ROUGHOUT", "WELL MADE", "ROLLED", "FRESH CONDITION", ""]
UNCLEAR = "UNCLEAR"


class MockArchiveError(Exception):
    """Base exception for mock archive errors."""

    pass


class PortInUse(MockArchiveError):
    """Raised when the mock server port is already bound."""

    pass


class MockSpec(BaseModel):
    """
    Parameters of a synthetic archive.

    Attributes:
        record_count: Number of records (ids 1..record_count)
        seed: Generator seed
        views: View codes per record
        failure_script: Request target (path plus query) -> statuses to
            return, in order, before serving normally
        robots_text: Contents of robots.txt
        adversarial: Make the scale bar about half the blob's size
        width: Image width in pixels
        height: Image height in pixels
    """

    record_count: int = Field(25, ge=0)
    seed: int = Field(1, ge=0, le=MAX_SEED)
    views: List[str] = Field(default_factory=lambda: ["f", "r", "s"])
    failure_script: Dict[str, List[int]] = Field(default_factory=dict)
    robots_text: str = DEFAULT_ROBOTS
    adversarial: bool = False
    width: int = Field(400, ge=120)
    height: int = Field(300, ge=120)

    @field_validator("views")
    @classmethod
    def _check_views(cls, value: List[str]) -> List[str]:
        if any(len(code) != 1 for code in value) or len(set(value)) != len(value):
            raise ValueError("views must be distinct single characters")
        return value


class GeneratedImage(BaseModel):
    """Names of the files written for one view."""

    record_id: int
    view_code: str
    filename: str
    ground_truth: str


def record_metadata(spec: MockSpec, record_id: int) -> Tuple[str, Dict[str, str]]:
    """
    Deterministic (description, fields) of a mock record.

    Fields use the collection's label vocabulary in page order.
    """
    rng = random.Random(f"{spec.seed}:record:{record_id}")
    site, country, continent = rng.choice(SITES)
    biface_type = rng.choice(BIFACE_TYPES)
    values = {
        "Sitename": site,
        "Country": country,
        "Continent": continent,
        "Biface type": biface_type,
        "Completeness": rng.choice(COMPLETENESS),
        "Finder": rng.choice(FINDERS),
        "Finder's number": rng.choice([UNCLEAR, str(rng.randint(1, 999))]),
        "Site subdivision": rng.choice([UNCLEAR, f"AREA {rng.choice('ABCD')}"]),
        "Context or level": rng.choice([UNCLEAR, "GRAVEL", "BRICKEARTH", f"LEVEL {rng.randint(1, 9)}"]),
        "Date found": rng.choice([UNCLEAR, str(rng.randint(1860, 1990))]),
        "Museum or holder": rng.choice(MUSEUMS),
        "Museum accession number": str(rng.randint(1, 9999)),
        "Museum accession date": rng.choice(["", str(rng.randint(1880, 1995))]),
    }
    fields = {label: values[label] for label in RECORD_FIELD_LABELS}
    description = rng.choice(DESCRIPTIONS)
    if not description:
        description = f"{rng.choice(SHAPES)} {rng.choice(MATERIALS)} {biface_type} ({rng.randint(150, 1200)}g)"
    return description, fields


def image_filename(record_id: int, view_code: str) -> str:
    return f"{record_id}{view_code}.jpg"


def render_record_page(spec: MockSpec, record_id: int) -> str:
    """HTML of one record page."""
    description, fields = record_metadata(spec, record_id)
    esc = html.escape
    thumbs = "\n".join(
        f'    <a href="/{FULL_IMAGES_DIR}/{image_filename(record_id, view)}">'
        f'<img src="/{THUMB_IMAGES_DIR}/{image_filename(record_id, view)}" '
        f'alt="{esc(VIEW_NAMES.get(view, view))} view of biface {record_id}"></a>'
        for view in spec.views
    )
    rows = "\n".join(
        f"    <tr><th>{esc(label)}</th><td>{esc(value)}</td></tr>" for label, value in fields.items()
    )
    return (
        "<!DOCTYPE html>\n"
        "<html>\n<head><meta charset=\"utf-8\">"
        f"<title>Biface record {record_id}</title></head>\n<body>\n"
        f'  <h2 class="record-number">Full Record - No. {record_id}</h2>\n'
        "  <h3>Views</h3>\n"
        "  <p>Click on the thumbnails to view and download larger versions:</p>\n"
        f'  <div class="views">\n{thumbs}\n  </div>\n'
        f'  <p class="description"><strong>Description</strong> {esc(description)}</p>\n'
        "  <h3>Details</h3>\n"
        f'  <table class="details">\n{rows}\n  </table>\n'
        "</body>\n</html>\n"
    )


def render_index(spec: MockSpec) -> str:
    """Index page listing every record."""
    items = "\n".join(
        f'    <li><a href="{RECORD_PATH}?id={record_id}">Record {record_id}</a></li>'
        for record_id in range(1, spec.record_count + 1)
    )
    return (
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>Mock biface archive</title></head>\n"
        f"<body>\n  <h1>Mock biface archive</h1>\n  <ul>\n{items}\n  </ul>\n</body>\n</html>\n"
    )


def _erode_cross(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, constant_values=True)
    return (
        padded[1:-1, 1:-1]
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )


def _dilate_cross(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, constant_values=False)
    return (
        padded[1:-1, 1:-1]
        | padded[:-2, 1:-1]
        | padded[2:, 1:-1]
        | padded[1:-1, :-2]
        | padded[1:-1, 2:]
    )


def open_cross(mask: np.ndarray) -> np.ndarray:
    """Opening with a 3x3 cross; outside the image counts as set for erosion."""
    return _dilate_cross(_erode_cross(mask))


def _ellipse_polygon(cx: float, cy: float, rx: float, ry: float, angle: float) -> List[Tuple[float, float]]:
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    points = []
    for step in range(360):
        phi = math.radians(step)
        ex, ey = rx * math.cos(phi), ry * math.sin(phi)
        points.append((cx + ex * cos_a - ey * sin_a, cy + ex * sin_a + ey * cos_a))
    return points


def render_view(spec: MockSpec, record_id: int, view_index: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Synthesize one view image and its ground-truth mask.

    Returns:
        (gray uint8 image, bool mask of the blob after a cross opening)
    """
    width, height = spec.width, spec.height
    rng = np.random.default_rng([spec.seed, record_id, view_index])
    short_side = min(width, height)

    rx = float(rng.uniform(0.2, 0.3) * short_side)
    ry = float(rng.uniform(0.2, 0.3) * short_side)
    angle = float(rng.uniform(0.0, math.pi))
    reach = max(rx, ry)

    if spec.adversarial:
        bar_area = 0.5 * math.pi * rx * ry
        bar_w = int(min(width - 2 * EDGE_MARGIN, bar_area / 20))
        bar_h = int(math.ceil(bar_area / bar_w))
    else:
        bar_w, bar_h = BAR_SIZE
    bar_x = int(rng.integers(EDGE_MARGIN, width - bar_w - EDGE_MARGIN + 1))
    bar_y = int(rng.integers(4, 11))

    top = bar_y + bar_h + EDGE_MARGIN + reach
    bottom = height - EDGE_MARGIN - reach
    cy = float(rng.uniform(top, max(top, bottom)))
    cx = float(rng.uniform(EDGE_MARGIN + reach, width - EDGE_MARGIN - reach))

    canvas = Image.new("1", (width, height), 0)
    ImageDraw.Draw(canvas).polygon(_ellipse_polygon(cx, cy, rx, ry, angle), fill=1)
    blob = np.asarray(canvas, dtype=bool)

    pixels = rng.integers(BACKGROUND_RANGE[0], BACKGROUND_RANGE[1] + 1, size=(height, width))
    blob_values = rng.integers(BLOB_RANGE[0], BLOB_RANGE[1] + 1, size=(height, width))
    pixels = np.where(blob, blob_values, pixels)
    bar_values = rng.integers(BAR_RANGE[0], BAR_RANGE[1] + 1, size=(bar_h, bar_w))
    pixels[bar_y:bar_y + bar_h, bar_x:bar_x + bar_w] = bar_values

    return pixels.astype(np.uint8), open_cross(blob)


def _encode_jpeg(image: Image.Image) -> bytes:
    buffer = io.BytesIO()
    image.save(buffer, format="JPEG", quality=100)
    return buffer.getvalue()


def _encode_png(image: Image.Image) -> bytes:
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def generate_site(spec: MockSpec, output_dir: Path) -> List[GeneratedImage]:
    """
    Write the mock archive tree.

    Layout: robots.txt, index.html, mock_spec.json, records/<id>.html,
    images/full/<id><view>.jpg, images/thumbs/<id><view>.jpg and
    ground_truth/<id><view>.png.

    Args:
        spec: Archive parameters
        output_dir: Destination directory

    Returns:
        The generated images in record then view order

    Raises:
        MockArchiveError: If the tree cannot be written
    """
    try:
        ensure_dir(output_dir)
        atomic_write(output_dir / "robots.txt", spec.robots_text)
        atomic_write(output_dir / "index.html", render_index(spec))
        atomic_write(output_dir / SPEC_FILENAME, json.dumps(spec.model_dump(mode="json"), indent=2) + "\n")

        generated: List[GeneratedImage] = []
        for record_id in range(1, spec.record_count + 1):
            atomic_write(output_dir / RECORDS_DIR / f"{record_id}.html", render_record_page(spec, record_id))
            for view_index, view in enumerate(spec.views):
                pixels, truth = render_view(spec, record_id, view_index)
                name = image_filename(record_id, view)
                image = Image.fromarray(pixels, mode="L")
                atomic_write(output_dir / FULL_IMAGES_DIR / name, _encode_jpeg(image))
                atomic_write(
                    output_dir / THUMB_IMAGES_DIR / name,
                    _encode_jpeg(image.resize(THUMB_SIZE, Image.Resampling.BILINEAR)),
                )
                truth_name = f"{record_id}{view}.png"
                atomic_write(
                    output_dir / GROUND_TRUTH_DIR / truth_name,
                    _encode_png(Image.fromarray(np.where(truth, 255, 0).astype(np.uint8), mode="L")),
                )
                generated.append(
                    GeneratedImage(record_id=record_id, view_code=view, filename=name, ground_truth=truth_name)
                )
    except OSError as e:
        raise MockArchiveError(f"Cannot write mock archive to {output_dir}: {e}") from e

    logger.info(
        f"Generated mock archive in {output_dir}: {spec.record_count} records, {len(generated)} images"
    )
    return generated


def load_spec(site_dir: Path) -> Optional[MockSpec]:
    """The MockSpec a site was generated from, if recorded."""
    path = site_dir / SPEC_FILENAME
    if not path.exists():
        return None
    return MockSpec.model_validate_json(path.read_text(encoding="utf-8"))


def load_ground_truth(site_dir: Path, name: str) -> np.ndarray:
    """Ground-truth mask of `<id><view>` as a bool array."""
    with Image.open(site_dir / GROUND_TRUTH_DIR / name) as image:
        return np.asarray(image.convert("L")) > 0
