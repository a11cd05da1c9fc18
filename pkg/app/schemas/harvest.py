"""
Harvest Pydantic schemas.

This module defines the journal entries, the replayed harvest state and the
run report of the harvester.
"""
from enum import Enum
from typing import Dict, Optional, Set

from pydantic import BaseModel, Field, model_validator

from app.schemas.record import RecordMetadata


class JournalPhase(str, Enum):
    """Progress phase recorded for one record."""

    RECORD_FETCHED = "record_fetched"
    METADATA_EXTRACTED = "metadata_extracted"
    IMAGE_SAVED = "image_saved"
    RECORD_COMPLETE = "record_complete"
    RECORD_FAILED = "record_failed"


class JournalEntry(BaseModel):
    """
    One line of the append-only harvest journal.

    Attributes:
        record_id: Record the entry is about
        phase: Progress phase
        filename: Saved image filename (image_saved only)
        reason: Failure reason (record_failed only)
        timestamp: ISO-8601 UTC time with seconds
    """

    record_id: int
    phase: JournalPhase
    filename: Optional[str] = None
    reason: Optional[str] = None
    timestamp: str

    @model_validator(mode="after")
    def _check_payload(self) -> "JournalEntry":
        if self.phase == JournalPhase.IMAGE_SAVED and not self.filename:
            raise ValueError("image_saved entries need a filename")
        return self


class HarvestState(BaseModel):
    """
    Harvest progress reconstructed from the journal.

    Attributes:
        completed_ids: Records whose latest phase is record_complete
        partial: Already-saved image filenames of records not yet complete
        failed: Latest failure reason of records whose last phase failed
    """

    completed_ids: Set[int] = Field(default_factory=set)
    partial: Dict[int, Set[str]] = Field(default_factory=dict)
    failed: Dict[int, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_disjoint(self) -> "HarvestState":
        overlap = self.completed_ids & set(self.partial)
        if overlap:
            raise ValueError(f"records both complete and partial: {sorted(overlap)}")
        return self


class StoredRecord(BaseModel):
    """
    Row of the metadata store written on extraction.

    Attributes:
        metadata: Extracted record metadata
        timestamp: When the row was written
    """

    metadata: RecordMetadata
    timestamp: str


class HarvestReport(BaseModel):
    """
    Totals of one harvest run.

    Attributes:
        records_planned: Records scheduled in this run
        records_ok: Records completed in this run
        records_failed: Records journaled as failed in this run
        images_saved: Images downloaded in this run
        images_skipped: Images already on disk from a previous run
        csv_path: Path of the written records CSV, if any
    """

    records_planned: int = 0
    records_ok: int = 0
    records_failed: int = 0
    images_saved: int = 0
    images_skipped: int = 0
    csv_path: Optional[str] = None
