"""
Services package.

This package contains the harvesting, identity, segmentation, COCO and
rendering services of the toolkit.
"""
from app.services.coco_service import build_document, parse_document, serialize, validate
from app.services.harvest_service import (
    HarvestJournal,
    HarvestService,
    plan_ids,
    replay_journal,
    run_harvest,
    write_records_csv,
)
from app.services.identity_service import embed_identity, process_collection, write_mapping
from app.services.manifest_service import parse_dataset_info, render_dataset_info
from app.services.overlay_service import render_overlay, render_side_by_side
from app.services.polite_client import DelaySampler, PoliteClient
from app.services.processing_service import run_processing
from app.services.record_extractor import extract_record
from app.services.robots import is_allowed, parse_robots

__all__ = [
    "DelaySampler",
    "HarvestJournal",
    "HarvestService",
    "PoliteClient",
    "build_document",
    "embed_identity",
    "extract_record",
    "is_allowed",
    "parse_dataset_info",
    "parse_document",
    "parse_robots",
    "plan_ids",
    "process_collection",
    "render_dataset_info",
    "render_overlay",
    "render_side_by_side",
    "replay_journal",
    "run_harvest",
    "run_processing",
    "serialize",
    "validate",
    "write_mapping",
    "write_records_csv",
]
