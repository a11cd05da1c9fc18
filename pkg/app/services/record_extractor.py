"""
HTML parser for collection record pages.

Extraction is keyed on the two-column details table and the thumbnail anchor
list rather than on exact markup; selectors come from RunConfig so a changed
site layout can be followed without code changes.
"""
import logging
import re
from typing import Dict, List, Optional, Union
from urllib.parse import urljoin, urlsplit

from bs4 import BeautifulSoup, Tag

from app.config import ID_PLACEHOLDER, RecordSelectors
from app.schemas.record import (
    EXPECTED_IMAGES_PER_RECORD,
    ExtractedRecord,
    ImageLink,
    RecordMetadata,
)
from app.utils.helpers import clean_text

logger = logging.getLogger(__name__)

_VIEW_FILENAME = re.compile(r"^(?P<record_id>\d+)(?P<view>[^\d.])\.(?P<ext>[A-Za-z0-9]+)$")
_RECORD_NUMBER = re.compile(r"No\.?\s*(\d+)", re.IGNORECASE)
_DESCRIPTION_LABEL = re.compile(r"^\s*description\s*:?\s*", re.IGNORECASE)


class RecordExtractionError(Exception):
    """Base exception for record page parsing errors."""

    pass


class NotARecordPage(RecordExtractionError):
    """Raised when the page has no details table."""

    pass


class IdMismatch(RecordExtractionError):
    """Raised when the page's displayed record number contradicts the requested id."""

    pass


def build_record_url(template: str, record_id: int) -> str:
    """
    Substitute a record id into the record URL template.

    Args:
        template: URL containing exactly one "{id}"
        record_id: Record number

    Returns:
        The record page URL

    Examples:
        >>> build_record_url("https://host/bf_record.cfm?id={id}", 190)
        'https://host/bf_record.cfm?id=190'
    """
    return template.replace(ID_PLACEHOLDER, str(int(record_id)))


def classify_view(filename: str) -> Optional[str]:
    """
    Read the view code from an image filename.

    Strips the numeric prefix and the extension; a single remaining
    character is the view code.

    Args:
        filename: e.g. "85f.jpg"

    Returns:
        The view code, or None when the name does not follow the convention

    Examples:
        >>> classify_view("85f.jpg")
        'f'
        >>> classify_view("scale.jpg") is None
        True
    """
    match = _VIEW_FILENAME.match(filename.strip())
    return match.group("view") if match else None


def parse_view_filename(filename: str) -> Optional[tuple]:
    """
    Split a `<record_id><view>.<ext>` filename.

    Returns:
        (record_id, view_code) or None when the name does not follow the convention
    """
    match = _VIEW_FILENAME.match(filename.strip())
    if not match:
        return None
    return int(match.group("record_id")), match.group("view")


def _find_details_table(soup: BeautifulSoup, selectors: RecordSelectors) -> Optional[Tag]:
    table = soup.select_one(selectors.details_table)
    if table is not None:
        return table
    # Fall back to the first table made of two-cell label/value rows.
    for candidate in soup.find_all("table"):
        rows = candidate.find_all("tr")
        if rows and all(len(row.find_all(["th", "td"], recursive=False)) == 2 for row in rows):
            return candidate
    return None


def _read_fields(table: Tag, record_id: int) -> Dict[str, str]:
    fields: Dict[str, str] = {}
    for row in table.find_all("tr"):
        cells = row.find_all(["th", "td"], recursive=False)
        if len(cells) != 2:
            continue
        label = clean_text(cells[0].get_text(" "))
        if not label:
            continue
        value = clean_text(cells[1].get_text(" "))
        if label in fields:
            suffix = 2
            while f"{label} ({suffix})" in fields:
                suffix += 1
            logger.warning(f"Record {record_id}: repeated label {label!r} kept as '{label} ({suffix})'")
            label = f"{label} ({suffix})"
        fields[label] = value
    return fields


def _read_description(soup: BeautifulSoup, selectors: RecordSelectors) -> str:
    element = soup.select_one(selectors.description)
    if element is None:
        return ""
    return _DESCRIPTION_LABEL.sub("", clean_text(element.get_text(" ")), count=1)


def _check_record_number(soup: BeautifulSoup, selectors: RecordSelectors, record_id: int) -> None:
    element = soup.select_one(selectors.record_number)
    text = element.get_text(" ") if element is not None else ""
    match = _RECORD_NUMBER.search(text)
    if not match:
        logger.debug(f"Record {record_id}: no displayed record number found")
        return
    shown = int(match.group(1))
    if shown != record_id:
        raise IdMismatch(f"Page shows record {shown}, expected {record_id}")


def _read_image_links(
    soup: BeautifulSoup,
    selectors: RecordSelectors,
    record_id: int,
    page_url: Optional[str],
) -> List[ImageLink]:
    links: List[ImageLink] = []
    seen = set()
    for anchor in soup.select(selectors.thumbnail_links):
        href = anchor.get("href")
        if not href:
            continue
        full_url = urljoin(page_url, href) if page_url else href
        filename = urlsplit(full_url).path.rsplit("/", 1)[-1]
        parsed = parse_view_filename(filename)
        if parsed is None or parsed[0] != record_id:
            logger.warning(f"Record {record_id}: skipping image link {href!r} (unexpected name)")
            continue
        if filename in seen:
            continue
        seen.add(filename)
        image = anchor.find("img")
        thumbnail = image.get("src") if image is not None else None
        if thumbnail and page_url:
            thumbnail = urljoin(page_url, thumbnail)
        links.append(
            ImageLink(
                record_id=record_id,
                view_code=parsed[1],
                thumbnail_url=thumbnail,
                full_url=full_url,
                original_filename=filename,
            )
        )
    return links


def extract_record(
    html: Union[str, bytes],
    record_id: int,
    page_url: Optional[str] = None,
    selectors: Optional[RecordSelectors] = None,
) -> ExtractedRecord:
    """
    Parse one record page.

    Args:
        html: Page text; bytes are decoded as UTF-8 with replacement
        record_id: Record the page was requested for
        page_url: URL of the page, used to absolutise relative links
        selectors: CSS selectors (defaults match the reference markup)

    Returns:
        ExtractedRecord: Metadata with fields in page order plus image links;
        image_count_flagged is set when the page does not show three views

    Raises:
        NotARecordPage: If the details table is absent
        IdMismatch: If the displayed record number contradicts record_id
    """
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    selectors = selectors or RecordSelectors()
    soup = BeautifulSoup(html, "lxml")

    table = _find_details_table(soup, selectors)
    if table is None:
        raise NotARecordPage(f"No details table on page for record {record_id}")
    _check_record_number(soup, selectors, record_id)

    metadata = RecordMetadata(
        record_id=record_id,
        description=_read_description(soup, selectors),
        fields=_read_fields(table, record_id),
    )
    images = _read_image_links(soup, selectors, record_id, page_url)
    flagged = len(images) != EXPECTED_IMAGES_PER_RECORD
    if flagged:
        logger.warning(
            f"Record {record_id}: found {len(images)} images, expected {EXPECTED_IMAGES_PER_RECORD}"
        )
    return ExtractedRecord(metadata=metadata, images=images, image_count_flagged=flagged)
