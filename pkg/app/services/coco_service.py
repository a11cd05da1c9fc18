"""
COCO document service.

This module builds, validates, serialises and parses the collection's
COCO annotation document. Annotations stay strictly standard; record
metadata rides on each image under the `archaeology` key.
"""
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Set

from pydantic import ValidationError

from app.schemas.coco import (
    ENRICHMENT_KEY,
    OBJECT_CATEGORY_ID,
    OBJECT_CATEGORY_NAME,
    CocoAnnotation,
    CocoCategory,
    CocoDocument,
    CocoImage,
    CocoInfo,
    CocoLicense,
    Violation,
    ViolationCode,
)
from app.schemas.dataset import DatasetInfo
from app.schemas.identity import ImageAsset
from app.schemas.record import RecordMetadata
from app.services.segmentation.types import SegmentationResult
from app.utils.helpers import atomic_write

logger = logging.getLogger(__name__)

POLYGON_DECIMALS = 1
MEASURE_DECIMALS = 2


class CocoError(Exception):
    """Base exception for COCO document errors."""

    pass


class DuplicateFileName(CocoError):
    """Raised when two assets share a UUID file name."""

    pass


class ResultMissing(CocoError):
    """Raised when an asset has neither a segmentation result nor an exclusion flag."""

    def __init__(self, uuid: str) -> None:
        super().__init__(f"No segmentation result for asset {uuid}")
        self.uuid = uuid


def _round(value: float, decimals: int) -> float:
    rounded = round(float(value), decimals)
    return 0.0 if rounded == 0 else rounded


def _enrichment(
    asset: ImageAsset,
    record: Optional[RecordMetadata],
    result: Optional[SegmentationResult],
) -> Dict[str, object]:
    block: Dict[str, object] = {
        "record_id": asset.record_id,
        "view_code": asset.view_code,
        "original_filename": asset.original_filename,
        "uuid": asset.uuid,
        "content_hash": asset.content_hash,
    }
    if record is not None:
        block["description"] = record.description
        block["fields"] = dict(record.fields)
    flags = list(asset.flags)
    if result is not None:
        flags.extend(result.flag_names)
        if result.rotated_bbox is not None:
            box = result.rotated_bbox
            block["rotated_bbox"] = {
                "center": [_round(box.center_x, MEASURE_DECIMALS), _round(box.center_y, MEASURE_DECIMALS)],
                "size": [_round(box.width, MEASURE_DECIMALS), _round(box.height, MEASURE_DECIMALS)],
                "angle": _round(box.angle_deg, MEASURE_DECIMALS),
            }
    block["quality_flags"] = sorted(set(flags))
    return block


def _annotation(annotation_id: int, image_id: int, result: SegmentationResult) -> CocoAnnotation:
    polygon: List[float] = []
    for x, y in result.contour.points:
        polygon.append(_round(x, POLYGON_DECIMALS))
        polygon.append(_round(y, POLYGON_DECIMALS))
    return CocoAnnotation(
        id=annotation_id,
        image_id=image_id,
        category_id=OBJECT_CATEGORY_ID,
        segmentation=[polygon],
        area=_round(result.area_px, MEASURE_DECIMALS),
        bbox=[_round(v, MEASURE_DECIMALS) for v in result.bbox.as_list()],
        iscrowd=0,
    )


def build_document(
    info: DatasetInfo,
    assets: Iterable[ImageAsset],
    records: Mapping[int, RecordMetadata],
    results: Mapping[str, SegmentationResult],
) -> CocoDocument:
    """
    Assemble the COCO document.

    Images are sorted by file_name and numbered 1..n; annotations are
    numbered 1..m in image order. Excluded assets (empty foreground or
    failed segmentation) appear as images without annotations.

    Args:
        info: Collection description
        assets: Identity-managed images
        records: Record metadata by record id (may be incomplete)
        results: Segmentation results by asset uuid

    Returns:
        CocoDocument: The assembled document

    Raises:
        DuplicateFileName: If two assets share a file name
        ResultMissing: If an asset lacks both a result and an exclusion flag
    """
    ordered = sorted(assets, key=lambda asset: asset.uuid_filename)
    seen: Set[str] = set()
    for asset in ordered:
        if asset.uuid_filename in seen:
            raise DuplicateFileName(f"File name {asset.uuid_filename} appears more than once")
        seen.add(asset.uuid_filename)

    document = CocoDocument(
        info=CocoInfo(
            description=info.description,
            url=info.url,
            version=info.version,
            year=info.year,
            contributor=info.contributor,
            date_created=info.date_created,
        ),
        licenses=[CocoLicense(id=lic.id, name=lic.name, url=lic.url) for lic in info.licenses],
        categories=[CocoCategory()],
    )

    for image_id, asset in enumerate(ordered, start=1):
        result = results.get(asset.uuid)
        if result is None and not asset.excluded:
            raise ResultMissing(asset.uuid)

        record = records.get(asset.record_id) if asset.record_id is not None else None
        if record is None:
            logger.warning(f"No record metadata for {asset.original_filename} (record {asset.record_id})")

        document.images.append(
            CocoImage(
                id=image_id,
                file_name=asset.uuid_filename,
                width=asset.width_px,
                height=asset.height_px,
                archaeology=_enrichment(asset, record, result),
            )
        )
        if result is not None and not asset.excluded:
            document.annotations.append(_annotation(len(document.annotations) + 1, image_id, result))

    logger.info(
        f"COCO document: {len(document.images)} images, {len(document.annotations)} annotations"
    )
    return document


def serialize(document: CocoDocument) -> str:
    """
    Canonical JSON text of a document.

    Keys follow the schema declaration order; output is byte-identical for
    equal documents and ends with a newline.
    """
    payload = document.model_dump(mode="json", exclude_none=True)
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def parse_document(text: str) -> CocoDocument:
    """
    Parse a COCO document written by serialize.

    Raises:
        CocoError: If the text is not a structurally valid COCO document
    """
    try:
        return CocoDocument.model_validate_json(text)
    except ValidationError as e:
        raise CocoError(f"Not a COCO document: {e}") from e


def write_document(document: CocoDocument, info: DatasetInfo, output_dir: Path) -> Path:
    """Write `<collection_short_name>.json` into output_dir."""
    path = Path(output_dir) / info.coco_filename
    atomic_write(path, serialize(document))
    logger.info(f"Wrote COCO document {path}")
    return path


def _check_categories(document: CocoDocument) -> List[Violation]:
    violations: List[Violation] = []
    if not any(
        c.id == OBJECT_CATEGORY_ID and c.name == OBJECT_CATEGORY_NAME for c in document.categories
    ):
        violations.append(
            Violation(code=ViolationCode.MISSING_CATEGORY, message="Category 1 'object' is missing")
        )
    for category in document.categories:
        if category.id != OBJECT_CATEGORY_ID or category.name != OBJECT_CATEGORY_NAME:
            violations.append(
                Violation(
                    code=ViolationCode.UNEXPECTED_CATEGORY,
                    message=f"Only the single 'object' category is allowed, found {category.name!r}",
                    ref=category.id,
                )
            )
    return violations


def _check_images(document: CocoDocument) -> List[Violation]:
    violations: List[Violation] = []
    seen_ids: Set[int] = set()
    seen_names: Set[str] = set()
    expected_order = sorted(image.file_name for image in document.images)
    for position, image in enumerate(document.images, start=1):
        if image.id in seen_ids:
            violations.append(
                Violation(code=ViolationCode.DUPLICATE_IMAGE_ID, message="Image id repeated", ref=image.id)
            )
        seen_ids.add(image.id)
        if image.file_name in seen_names:
            violations.append(
                Violation(
                    code=ViolationCode.DUPLICATE_FILE_NAME,
                    message=f"File name {image.file_name} repeated",
                    ref=image.id,
                )
            )
        seen_names.add(image.file_name)
        if image.id != position or expected_order[position - 1] != image.file_name:
            violations.append(
                Violation(
                    code=ViolationCode.ID_NOT_POSITIONAL,
                    message=f"Image {image.file_name} should have id {expected_order.index(image.file_name) + 1}",
                    ref=image.id,
                )
            )
        if image.width < 1 or image.height < 1:
            violations.append(
                Violation(
                    code=ViolationCode.BAD_DIMENSIONS,
                    message=f"Dimensions {image.width}x{image.height} are not positive",
                    ref=image.id,
                )
            )
    return violations


def _check_annotation(annotation: CocoAnnotation, images: Dict[int, CocoImage]) -> List[Violation]:
    violations: List[Violation] = []
    ref = annotation.id
    image = images.get(annotation.image_id)
    if image is None:
        violations.append(
            Violation(
                code=ViolationCode.DANGLING_IMAGE_REF,
                message=f"image_id {annotation.image_id} does not exist",
                ref=ref,
            )
        )
    if annotation.category_id != OBJECT_CATEGORY_ID:
        violations.append(
            Violation(
                code=ViolationCode.BAD_CATEGORY_REF,
                message=f"category_id {annotation.category_id} is not {OBJECT_CATEGORY_ID}",
                ref=ref,
            )
        )
    if annotation.iscrowd != 0:
        violations.append(
            Violation(code=ViolationCode.BAD_ISCROWD, message="iscrowd must be 0", ref=ref)
        )
    if annotation.area <= 0:
        violations.append(
            Violation(code=ViolationCode.NON_POSITIVE_AREA, message=f"area is {annotation.area}", ref=ref)
        )
    if len(annotation.segmentation) != 1 or len(annotation.segmentation[0]) < 6 or len(annotation.segmentation[0]) % 2:
        violations.append(
            Violation(
                code=ViolationCode.POLYGON_TOO_SHORT,
                message="segmentation must be one polygon of at least 3 points",
                ref=ref,
            )
        )
    if len(annotation.bbox) != 4:
        violations.append(
            Violation(code=ViolationCode.BBOX_OUT_OF_BOUNDS, message="bbox must have 4 values", ref=ref)
        )
    elif image is not None:
        x, y, w, h = annotation.bbox
        if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > image.width or y + h > image.height:
            violations.append(
                Violation(
                    code=ViolationCode.BBOX_OUT_OF_BOUNDS,
                    message=f"bbox {annotation.bbox} outside {image.width}x{image.height}",
                    ref=ref,
                )
            )
    return violations


def validate(document: CocoDocument) -> List[Violation]:
    """
    Check a document against every structural invariant.

    Returns:
        Violations found; an empty list means the document is valid
    """
    violations = _check_categories(document)
    violations.extend(_check_images(document))

    images = {image.id: image for image in document.images}
    seen: Set[int] = set()
    last_image_id = 0
    for position, annotation in enumerate(document.annotations, start=1):
        # One object per image, annotations in image order.
        if annotation.image_id <= last_image_id:
            violations.append(
                Violation(
                    code=ViolationCode.ID_NOT_POSITIONAL,
                    message=f"Annotation for image {annotation.image_id} is out of image order or repeated",
                    ref=annotation.id,
                )
            )
        last_image_id = max(last_image_id, annotation.image_id)
        if annotation.id in seen:
            violations.append(
                Violation(
                    code=ViolationCode.DUPLICATE_ANNOTATION_ID,
                    message="Annotation id repeated",
                    ref=annotation.id,
                )
            )
        seen.add(annotation.id)
        if annotation.id != position:
            violations.append(
                Violation(
                    code=ViolationCode.ID_NOT_POSITIONAL,
                    message=f"Annotation at position {position} has id {annotation.id}",
                    ref=annotation.id,
                )
            )
        violations.extend(_check_annotation(annotation, images))

    if violations:
        logger.debug(f"COCO validation found {len(violations)} violations")
    return violations


def enrichment_of(image: CocoImage) -> Dict[str, object]:
    """The record enrichment block of an image (empty when absent)."""
    return dict(getattr(image, ENRICHMENT_KEY) or {})
