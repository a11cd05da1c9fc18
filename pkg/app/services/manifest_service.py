"""
Collection manifest service.

This module parses and renders `dataset_info.md`, the Markdown key/value file
describing the collection. The grammar is one "Key: value" pair per line
(Markdown bullets and bold markers are ignored); the Licenses key introduces
an indented block of id/name/url entries.
"""
import logging
import re
from datetime import date, datetime
from typing import Dict, List, Optional
from urllib.parse import urlparse

from pydantic import ValidationError

from app.schemas.dataset import DatasetInfo, LicenseInfo

logger = logging.getLogger(__name__)

# Documented keys, in rendering order, mapped to DatasetInfo attributes.
REQUIRED_KEYS: Dict[str, str] = {
    "Description": "description",
    "Url": "url",
    "Collection_short_name": "collection_short_name",
    "Version": "version",
    "Year": "year",
    "Contributor": "contributor",
    "Date_created": "date_created",
}
LICENSES_KEY = "Licenses"
LICENSE_KEYS = ("id", "name", "url")

_LINE = re.compile(r"^(?P<indent>\s*)(?:[-*+]\s+)?(?P<key>[^:]+?)\s*:(?:\s+(?P<value>.*))?$")
_YEAR = re.compile(r"^\d{4}$")
_SHORT_NAME_FORBIDDEN = re.compile(r"[\s/\\]")


class ManifestError(Exception):
    """Base exception for manifest errors."""

    pass


class MissingKey(ManifestError):
    """Raised when a required manifest key is absent."""

    def __init__(self, name: str) -> None:
        super().__init__(f"Missing required key: {name}")
        self.name = name


class MalformedLicense(ManifestError):
    """Raised when a license entry is incomplete or its id is invalid or repeated."""

    pass


class BadYear(ManifestError):
    """Raised when Year is not a four-digit integer."""

    pass


class InvalidValue(ManifestError):
    """Raised when Url, Collection_short_name or Date_created is malformed."""

    pass


def _canonical_key(raw: str) -> Optional[str]:
    lowered = raw.lower()
    for key in (*REQUIRED_KEYS, LICENSES_KEY):
        if key.lower() == lowered:
            return key
    return None


def _build_license(entry: Dict[str, str], position: int) -> LicenseInfo:
    missing = [key for key in LICENSE_KEYS if not entry.get(key)]
    if missing:
        raise MalformedLicense(f"License #{position} lacks {', '.join(missing)}")
    try:
        license_id = int(entry["id"])
    except ValueError as e:
        raise MalformedLicense(f"License #{position} id is not an integer: {entry['id']!r}") from e
    if license_id <= 0:
        raise MalformedLicense(f"License #{position} id must be positive, got {license_id}")
    return LicenseInfo(id=license_id, name=entry["name"], url=entry["url"])


def parse_dataset_info(text: str) -> DatasetInfo:
    """
    Parse the contents of `dataset_info.md`.

    Key matching is case-insensitive on the documented names; unknown keys
    are kept in `DatasetInfo.extra`.

    Args:
        text: Manifest file contents

    Returns:
        DatasetInfo: Fully populated collection description

    Raises:
        MissingKey: If a required key is absent
        MalformedLicense: If a license lacks id/name/url or ids repeat
        BadYear: If Year is not a four-digit integer
        InvalidValue: If Url, Collection_short_name or Date_created is malformed
    """
    values: Dict[str, str] = {}
    extra: Dict[str, str] = {}
    license_entries: List[Dict[str, str]] = []
    licenses_indent: Optional[int] = None

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.replace("**", "").rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        match = _LINE.match(line)
        if not match:
            logger.debug(f"Skipping manifest line {line_no}: {raw_line!r}")
            continue

        indent = len(match.group("indent").expandtabs(4))
        raw_key = match.group("key").strip().strip("_").strip()
        value = (match.group("value") or "").strip()
        sub_key = raw_key.lower()

        if licenses_indent is not None and sub_key in LICENSE_KEYS:
            current = license_entries[-1] if license_entries else None
            belongs = (
                indent > licenses_indent
                or sub_key != "url"
                or (current is not None and "url" not in current)
            )
            if belongs:
                if current is None or sub_key in current:
                    current = {}
                    license_entries.append(current)
                current[sub_key] = value
                continue
        if licenses_indent is not None and indent > licenses_indent:
            logger.warning(f"Ignoring unknown license key {raw_key!r} on line {line_no}")
            continue

        key = _canonical_key(raw_key)
        licenses_indent = None
        if key == LICENSES_KEY:
            licenses_indent = indent
            continue
        if key is None:
            extra[raw_key] = value
            continue
        if key in values:
            logger.warning(f"Manifest key {key} repeated on line {line_no}; last value wins")
        values[key] = value

    for key in REQUIRED_KEYS:
        if key not in values:
            raise MissingKey(key)

    year_text = values["Year"]
    if not _YEAR.match(year_text):
        raise BadYear(f"Year must be a four-digit integer, got {year_text!r}")

    url = urlparse(values["Url"])
    if url.scheme not in ("http", "https") or not url.netloc:
        raise InvalidValue(f"Url must be an absolute http(s) URL, got {values['Url']!r}")

    short_name = values["Collection_short_name"]
    if not short_name or _SHORT_NAME_FORBIDDEN.search(short_name):
        raise InvalidValue(
            f"Collection_short_name must be a non-empty token without whitespace "
            f"or path separators, got {short_name!r}"
        )

    try:
        date.fromisoformat(values["Date_created"])
    except ValueError:
        try:
            datetime.fromisoformat(values["Date_created"])
        except ValueError as e:
            raise InvalidValue(
                f"Date_created must be an ISO-8601 date, got {values['Date_created']!r}"
            ) from e

    licenses = [_build_license(entry, i) for i, entry in enumerate(license_entries, start=1)]
    seen = set()
    for license in licenses:
        if license.id in seen:
            raise MalformedLicense(f"License id {license.id} appears more than once")
        seen.add(license.id)

    fields = {attr: values[key] for key, attr in REQUIRED_KEYS.items()}
    fields["year"] = int(year_text)
    try:
        return DatasetInfo(**fields, licenses=licenses, extra=extra)
    except ValidationError as e:
        raise ManifestError(f"Invalid manifest: {e}") from e


def render_dataset_info(info: DatasetInfo) -> str:
    """
    Render a DatasetInfo back into the manifest grammar.

    parse_dataset_info(render_dataset_info(info)) == info.

    Args:
        info: Collection description

    Returns:
        Manifest text ending with a newline
    """
    lines = ["# Dataset info", ""]
    for key, attr in REQUIRED_KEYS.items():
        lines.append(f"- {key}: {getattr(info, attr)}")
    for key, value in info.extra.items():
        lines.append(f"- {key}: {value}")
    lines.append(f"- {LICENSES_KEY}:")
    for license in info.licenses:
        lines.append(f"  - id: {license.id}")
        lines.append(f"    name: {license.name}")
        lines.append(f"    url: {license.url}")
    return "\n".join(lines) + "\n"
