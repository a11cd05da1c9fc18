"""
Harvest service.

This module orchestrates the scrape: enumerate record ids, fetch pages and
images through the polite client, and persist images, a metadata store, the
records CSV and an append-only journal from which an interrupted run resumes.
"""
import csv
import io
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set

from pydantic import ValidationError

from app.config import RunConfig
from app.schemas.harvest import (
    HarvestReport,
    HarvestState,
    JournalEntry,
    JournalPhase,
    StoredRecord,
)
from app.schemas.record import RecordMetadata
from app.services.polite_client import PoliteClient
from app.services.record_extractor import (
    RecordExtractionError,
    build_record_url,
    extract_record,
)
from app.utils.helpers import atomic_write, check_writable, ensure_dir, utc_now_iso

logger = logging.getLogger(__name__)

CSV_BASE_COLUMNS = ("record_id", "description")
CSV_STATUS_COLUMN = "status"
STATUS_COMPLETE = "complete"
STATUS_PARTIAL = "partial"


class HarvestError(Exception):
    """Base exception for harvest errors."""

    pass


class CorruptJournal(HarvestError):
    """Raised when a non-final journal line cannot be parsed."""

    pass


class HarvestAborted(HarvestError):
    """Raised when robots.txt forbids the record path or output is unwritable."""

    pass


class IoFailure(HarvestError):
    """Raised when an output file cannot be written."""

    pass


class HarvestJournal:
    """
    Append-only JSON-lines journal with a single writer.

    Timestamps are clamped so entries of one run never go backwards.
    """

    def __init__(self, path: Path) -> None:
        self.path = path
        self._last_timestamp: Optional[str] = None

    def append(
        self,
        record_id: int,
        phase: JournalPhase,
        filename: Optional[str] = None,
        reason: Optional[str] = None,
    ) -> JournalEntry:
        """
        Append one entry and flush it to disk.

        Raises:
            IoFailure: If the journal cannot be written
        """
        timestamp = utc_now_iso()
        if self._last_timestamp is not None and timestamp < self._last_timestamp:
            timestamp = self._last_timestamp
        self._last_timestamp = timestamp
        entry = JournalEntry(
            record_id=record_id,
            phase=phase,
            filename=filename,
            reason=reason,
            timestamp=timestamp,
        )
        try:
            ensure_dir(self.path.parent)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(entry.model_dump_json(exclude_none=True) + "\n")
        except OSError as e:
            raise IoFailure(f"Cannot append to journal {self.path}: {e}") from e
        return entry

    def truncate(self) -> None:
        """Start a fresh journal."""
        ensure_dir(self.path.parent)
        self.path.write_text("", encoding="utf-8")
        self._last_timestamp = None

    def replay(self) -> HarvestState:
        return replay_journal(self.path)


def replay_journal(path: Path) -> HarvestState:
    """
    Rebuild harvest progress from a journal file.

    The latest phase per record wins. A trailing truncated line (crash
    while writing) is ignored with a warning.

    Args:
        path: Journal file; an absent file gives an empty state

    Returns:
        HarvestState: Completed ids, partially saved images and failures

    Raises:
        CorruptJournal: If a line other than the last cannot be parsed
    """
    if not path.exists():
        return HarvestState()

    lines = path.read_text(encoding="utf-8", errors="replace").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()

    completed: Set[int] = set()
    partial: Dict[int, Set[str]] = {}
    failed: Dict[int, str] = {}

    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            entry = JournalEntry.model_validate_json(line)
        except ValidationError as e:
            if index == len(lines) - 1:
                logger.warning(f"Ignoring truncated final journal line in {path}")
                break
            raise CorruptJournal(f"{path}: line {index + 1} is unparseable") from e

        record_id = entry.record_id
        if entry.phase == JournalPhase.RECORD_COMPLETE:
            completed.add(record_id)
            failed.pop(record_id, None)
        elif entry.phase == JournalPhase.RECORD_FAILED:
            completed.discard(record_id)
            failed[record_id] = entry.reason or "unknown"
        elif entry.phase == JournalPhase.IMAGE_SAVED:
            completed.discard(record_id)
            partial.setdefault(record_id, set()).add(entry.filename or "")
        else:
            completed.discard(record_id)

    for record_id in completed:
        partial.pop(record_id, None)
    return HarvestState(completed_ids=completed, partial=partial, failed=failed)


def plan_ids(config: RunConfig, state: HarvestState) -> List[int]:
    """
    Ids still to harvest.

    Returns:
        Ascending ids of config.id_range not yet completed
    """
    return [record_id for record_id in config.id_range.ids() if record_id not in state.completed_ids]


class MetadataStore:
    """
    JSON-lines store of extracted records, one row appended per extraction.

    Lets the records CSV be rebuilt after a resume without re-fetching pages;
    the latest row per record wins.
    """

    def __init__(self, path: Path) -> None:
        self.path = path

    def append(self, metadata: RecordMetadata) -> None:
        row = StoredRecord(metadata=metadata, timestamp=utc_now_iso())
        try:
            ensure_dir(self.path.parent)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(row.model_dump_json() + "\n")
        except OSError as e:
            raise IoFailure(f"Cannot append to metadata store {self.path}: {e}") from e

    def truncate(self) -> None:
        ensure_dir(self.path.parent)
        self.path.write_text("", encoding="utf-8")

    def load(self) -> Dict[int, RecordMetadata]:
        """Latest metadata per record id."""
        records: Dict[int, RecordMetadata] = {}
        if not self.path.exists():
            return records
        for line_no, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = StoredRecord.model_validate_json(line)
            except ValidationError:
                logger.warning(f"Skipping unreadable metadata store line {line_no} in {self.path}")
                continue
            records[row.metadata.record_id] = row.metadata
        return records


def write_records_csv(
    records: Iterable[RecordMetadata],
    path: Path,
    statuses: Optional[Dict[int, str]] = None,
) -> Path:
    """
    Write the records table.

    Header: record_id, description, then the union of field labels in
    first-seen order, then `status` when statuses are given. Missing values
    are empty; quoting follows RFC 4180.

    Args:
        records: Records to write, in row order
        path: Destination CSV
        statuses: Optional record_id -> status (complete/partial)

    Returns:
        The written path

    Raises:
        ValueError: If records is empty
        IoFailure: If the file cannot be written
    """
    records = list(records)
    if not records:
        raise ValueError("write_records_csv needs at least one record")

    labels: List[str] = []
    for record in records:
        for label in record.fields:
            if label not in labels and label not in CSV_BASE_COLUMNS:
                labels.append(label)

    header = [*CSV_BASE_COLUMNS, *labels]
    if statuses is not None:
        header.append(CSV_STATUS_COLUMN)

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    for record in records:
        row = [str(record.record_id), record.description]
        row.extend(record.fields.get(label, "") for label in labels)
        if statuses is not None:
            row.append(statuses.get(record.record_id, STATUS_PARTIAL))
        writer.writerow(row)

    try:
        atomic_write(path, buffer.getvalue())
    except OSError as e:
        raise IoFailure(f"Cannot write records CSV {path}: {e}") from e
    logger.info(f"Wrote {len(records)} records to {path}")
    return path


def read_records_csv(path: Path) -> Dict[int, RecordMetadata]:
    """
    Read a records CSV written by write_records_csv.

    Blank cells are kept as empty strings; the status column is dropped.

    Returns:
        record_id -> RecordMetadata
    """
    records: Dict[int, RecordMetadata] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            try:
                record_id = int(row.get("record_id") or "")
            except ValueError:
                logger.warning(f"Skipping CSV row without a numeric record_id in {path}")
                continue
            fields = {
                label: value or ""
                for label, value in row.items()
                if label not in (*CSV_BASE_COLUMNS, CSV_STATUS_COLUMN) and label is not None
            }
            records[record_id] = RecordMetadata(
                record_id=record_id,
                description=row.get("description") or "",
                fields=fields,
            )
    return records


class HarvestService:
    """
    Sequential harvest over record ids.

    Per-record failures are journaled and skipped; the run aborts only when
    robots.txt forbids the record path or output is unwritable.
    """

    def __init__(self, config: RunConfig, client: PoliteClient, journal: HarvestJournal) -> None:
        self.config = config
        self.client = client
        self.journal = journal
        self.store = MetadataStore(config.metadata_store_path)
        self.images_dir = config.original_images_path

    def _check_outputs(self) -> None:
        for directory in (self.images_dir, Path(self.config.output_dir), self.journal.path.parent):
            if not check_writable(directory):
                raise HarvestAborted(f"Output directory {directory} is not writable")

    async def _check_robots(self, first_id: int) -> None:
        record_url = build_record_url(self.config.base_record_url_template, first_id)
        if self.client.policy is None:
            parts = record_url.split("/", 3)
            await self.client.load_robots("/".join(parts[:3]))
        if not self.client.allows(record_url):
            raise HarvestAborted(f"robots.txt disallows the record path ({record_url})")

    def _image_on_disk(self, filename: str) -> bool:
        path = self.images_dir / filename
        return path.is_file() and path.stat().st_size > 0

    async def _harvest_record(self, record_id: int, saved: Set[str], report: HarvestReport) -> bool:
        url = build_record_url(self.config.base_record_url_template, record_id)
        outcome = await self.client.fetch(url)
        if not outcome.ok:
            self.journal.append(record_id, JournalPhase.RECORD_FAILED, reason=f"page {outcome.status.value}: {outcome.detail}")
            return False
        self.journal.append(record_id, JournalPhase.RECORD_FETCHED)

        try:
            extracted = extract_record(
                outcome.content or b"",
                record_id,
                page_url=url,
                selectors=self.config.record_selectors,
            )
        except RecordExtractionError as e:
            logger.error(f"Record {record_id}: extraction failed: {e}")
            self.journal.append(record_id, JournalPhase.RECORD_FAILED, reason=f"extraction: {e}")
            return False

        self.store.append(extracted.metadata)
        self.journal.append(record_id, JournalPhase.METADATA_EXTRACTED)

        failures: List[str] = []
        for link in extracted.images:
            if self._image_on_disk(link.original_filename):
                if link.original_filename not in saved:
                    self.journal.append(record_id, JournalPhase.IMAGE_SAVED, filename=link.original_filename)
                report.images_skipped += 1
                continue
            image = await self.client.fetch(link.full_url)
            if not image.ok or not image.content:
                failures.append(f"{link.original_filename}: {image.status.value} {image.detail or 'empty body'}")
                continue
            try:
                atomic_write(self.images_dir / link.original_filename, image.content)
            except OSError as e:
                raise IoFailure(f"Cannot write image {link.original_filename}: {e}") from e
            self.journal.append(record_id, JournalPhase.IMAGE_SAVED, filename=link.original_filename)
            report.images_saved += 1

        if failures:
            reason = "image download failed: " + "; ".join(failures)
            logger.error(f"Record {record_id}: {reason}")
            self.journal.append(record_id, JournalPhase.RECORD_FAILED, reason=reason)
            return False

        self.journal.append(record_id, JournalPhase.RECORD_COMPLETE)
        logger.info(f"Record {record_id} complete: {len(extracted.images)} images")
        return True

    def _write_csv(self) -> Optional[Path]:
        records = self.store.load()
        if not records:
            logger.warning("No extracted records; records CSV not written")
            return None
        state = self.journal.replay()
        ordered = [records[record_id] for record_id in sorted(records)]
        statuses = {
            record_id: STATUS_COMPLETE if record_id in state.completed_ids else STATUS_PARTIAL
            for record_id in records
        }
        return write_records_csv(ordered, self.config.records_csv_path, statuses)

    async def run(self, resume: bool = True, max_records: Optional[int] = None) -> HarvestReport:
        """
        Harvest every planned record.

        Args:
            resume: Continue from the journal; otherwise journal and metadata
                store are truncated first
            max_records: Stop after this many planned records

        Returns:
            HarvestReport: Totals of this run

        Raises:
            HarvestAborted: If robots.txt forbids the record path or output
                is unwritable
            IoFailure: If journal, store, image or CSV writes fail
        """
        self._check_outputs()
        if not resume:
            self.journal.truncate()
            self.store.truncate()

        state = self.journal.replay()
        planned = plan_ids(self.config, state)
        if max_records is not None:
            planned = planned[:max_records]
        report = HarvestReport(records_planned=len(planned))
        logger.info(
            f"Harvest plan: {len(planned)} records "
            f"({len(state.completed_ids)} already complete, {len(state.partial)} partial)"
        )

        await self._check_robots(planned[0] if planned else self.config.id_range.start)

        for record_id in planned:
            saved = state.partial.get(record_id, set())
            if await self._harvest_record(record_id, saved, report):
                report.records_ok += 1
            else:
                report.records_failed += 1

        csv_path = self._write_csv()
        report.csv_path = str(csv_path) if csv_path else None
        logger.info(
            f"Harvest finished: ok={report.records_ok} failed={report.records_failed} "
            f"images_saved={report.images_saved} images_skipped={report.images_skipped}"
        )
        return report


async def run_harvest(
    config: RunConfig,
    client: PoliteClient,
    journal: Optional[HarvestJournal] = None,
    resume: bool = True,
    max_records: Optional[int] = None,
) -> HarvestReport:
    """
    Run a harvest with the configured journal location.

    See HarvestService.run.
    """
    journal = journal or HarvestJournal(config.journal_path)
    return await HarvestService(config, client, journal).run(resume=resume, max_records=max_records)
