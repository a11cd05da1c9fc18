"""
Image processing pipeline.

This module composes identity assignment, segmentation, COCO document
writing and optional overlay/mask export over a harvested collection.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from app.config import RunConfig
from app.schemas.dataset import DatasetInfo
from app.schemas.identity import AssetFlag, ImageAsset, SkippedImage
from app.schemas.record import RecordMetadata
from app.services.coco_service import build_document, validate, write_document
from app.services.harvest_service import read_records_csv
from app.services.identity_service import process_collection
from app.services.overlay_service import (
    OverlayOptions,
    render_overlay,
    render_side_by_side,
    save_mask,
    save_png,
)
from app.services.segmentation import (
    EmptyForeground,
    SegmentationError,
    SegmentationOptions,
    SegmentationResult,
    Segmenter,
    load_image,
)

logger = logging.getLogger(__name__)

OVERLAYS_DIR = "overlays"
MASKS_DIR = "masks"


class ProcessReport(BaseModel):
    """
    Totals of one processing run.

    Attributes:
        images: Assets in the COCO document
        annotations: Annotations written
        excluded: UUIDs of images kept without annotation
        skipped: Input files that could not be decoded
        flagged: UUID -> quality flags, for review
        coco_path: Path of the COCO document
        violations: Validation findings (empty when valid)
    """

    images: int = 0
    annotations: int = 0
    excluded: List[str] = Field(default_factory=list)
    skipped: List[SkippedImage] = Field(default_factory=list)
    flagged: Dict[str, List[str]] = Field(default_factory=dict)
    coco_path: Optional[str] = None
    violations: List[str] = Field(default_factory=list)

    @property
    def clean(self) -> bool:
        """True when nothing was skipped, excluded or invalid."""
        return not (self.excluded or self.skipped or self.violations)


def _segment_one(
    segmenter: Segmenter,
    uuid_dir: Path,
    asset: ImageAsset,
) -> Tuple[str, Optional[SegmentationResult], Optional[str]]:
    try:
        image = load_image(uuid_dir / asset.uuid_filename)
        return asset.uuid, segmenter.segment(image), None
    except EmptyForeground as e:
        logger.warning(f"{asset.uuid_filename}: empty foreground ({e}); excluded from annotations")
        return asset.uuid, None, AssetFlag.EMPTY_FOREGROUND
    except (SegmentationError, OSError, ValueError) as e:
        logger.error(f"{asset.uuid_filename}: segmentation failed: {e}")
        return asset.uuid, None, AssetFlag.SEGMENTATION_FAILED


def _load_records(config: RunConfig) -> Dict[int, RecordMetadata]:
    path = config.records_csv_path
    if not path.exists():
        logger.warning(f"No records CSV at {path}; COCO images will carry no record fields")
        return {}
    return read_records_csv(path)


def _write_diagnostics(
    config: RunConfig,
    asset: ImageAsset,
    result: Optional[SegmentationResult],
    overlays: bool,
    masks: bool,
    options: OverlayOptions,
) -> None:
    output_dir = Path(config.output_dir)
    if overlays:
        original = load_image(config.uuid_images_path / asset.uuid_filename)
        drawn = render_overlay(original, result, options)
        save_png(render_side_by_side(original, drawn, options.background), output_dir / OVERLAYS_DIR / f"{asset.uuid}.png")
    if masks and result is not None:
        save_mask(result.mask, output_dir / MASKS_DIR / f"{asset.uuid}.png")


def run_processing(
    config: RunConfig,
    info: DatasetInfo,
    overlays: bool = False,
    masks: bool = False,
    jobs: Optional[int] = None,
    seed: Optional[int] = None,
) -> ProcessReport:
    """
    Turn original_images/ into uuid_images/ plus the COCO document.

    Segmentation runs on a pool of `jobs` threads; results are merged in
    file-name order so output does not depend on completion order.

    Args:
        config: Run configuration (paths and segmentation options)
        info: Collection description
        overlays: Also write overlays/<uuid>.png
        masks: Also write masks/<uuid>.png
        jobs: Worker threads (defaults to config.jobs)
        seed: Fixed UUID seed (tests only)

    Returns:
        ProcessReport: Totals and the COCO path

    Raises:
        EmptyCollection: If original_images/ holds no files
    """
    identity = process_collection(config.original_images_path, config.uuid_images_path, seed=seed)
    report = ProcessReport(skipped=list(identity.skipped))
    assets = sorted(identity.assets, key=lambda asset: asset.uuid_filename)

    segmenter = Segmenter(SegmentationOptions.from_config(config))
    workers = max(1, jobs or config.jobs)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(
            pool.map(lambda asset: _segment_one(segmenter, config.uuid_images_path, asset), assets)
        )

    results: Dict[str, SegmentationResult] = {}
    flagged_assets: List[ImageAsset] = []
    for asset, (uuid, result, failure) in zip(assets, outcomes):
        if failure is not None:
            asset = asset.model_copy(update={"flags": [*asset.flags, failure]})
            report.excluded.append(uuid)
        elif result is not None:
            results[uuid] = result
            if result.flags:
                report.flagged[uuid] = result.flag_names
                logger.info(f"{asset.original_filename} ({uuid}): flags {result.flag_names}")
        flagged_assets.append(asset)

    document = build_document(info, flagged_assets, _load_records(config), results)
    report.violations = [str(v) for v in validate(document)]
    for violation in report.violations:
        logger.error(f"COCO violation: {violation}")
    report.coco_path = str(write_document(document, info, Path(config.output_dir)))
    report.images = len(document.images)
    report.annotations = len(document.annotations)

    if overlays or masks:
        options = OverlayOptions.from_config(config)
        for asset in flagged_assets:
            try:
                _write_diagnostics(config, asset, results.get(asset.uuid), overlays, masks, options)
            except (OSError, SegmentationError) as e:
                logger.warning(f"{asset.uuid_filename}: diagnostics not written: {e}")

    logger.info(
        f"Processing finished: images={report.images} annotations={report.annotations} "
        f"excluded={len(report.excluded)} skipped={len(report.skipped)}"
    )
    return report
