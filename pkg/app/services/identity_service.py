"""
Identity service.

This module assigns version-4 UUID identities to harvested images, writes
UUID-named copies with the identity embedded in the file metadata (EXIF
ImageUniqueID for JPEG, a tEXt chunk for PNG) and maintains the
original-to-UUID mapping file.
"""
import csv
import io
import logging
import random
import struct
import uuid as uuid_lib
import zlib
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import piexif
from PIL import Image, UnidentifiedImageError

from app.schemas.identity import (
    AssetFlag,
    IdentityReport,
    ImageAsset,
    MappingRow,
    SkippedImage,
)
from app.services.record_extractor import parse_view_filename
from app.utils.helpers import atomic_write, ensure_dir, sha256_hex

logger = logging.getLogger(__name__)

MAPPING_FILENAME = "uuid_mapping.csv"
MAPPING_COLUMNS = ("original_filename", "uuid_filename", "record_id")
IDENTITY_KEYWORD = "ImageUniqueID"
SIDECAR_SUFFIX = ".id"

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
JPEG_SOI = b"\xff\xd8"


class IdentityError(Exception):
    """Base exception for identity errors."""

    pass


class UnsupportedFormat(IdentityError):
    """Raised when identity cannot be embedded in the image format."""

    pass


class DuplicateOriginal(IdentityError):
    """Raised when one original filename maps to two UUIDs."""

    pass


class DuplicateUuid(IdentityError):
    """Raised when two mapping rows share a UUID filename."""

    pass


class EmptyCollection(IdentityError):
    """Raised when the originals directory holds no images."""

    pass


class UuidAssigner:
    """
    Source of fresh version-4 UUIDs.

    Uses the OS cryptographic generator unless a seed is given (tests only).
    UUIDs already in the mapping are never handed out again, and an original
    that is already mapped keeps its UUID.
    """

    def __init__(self, seed: Optional[int] = None, existing: Optional[Iterable[MappingRow]] = None) -> None:
        self._rng = random.Random(seed) if seed is not None else None
        self._by_original: Dict[str, str] = {}
        self._used = set()
        for row in existing or ():
            value = Path(row.uuid_filename).stem
            self._by_original[row.original_filename] = value
            self._used.add(value)

    def _fresh(self) -> str:
        if self._rng is None:
            return str(uuid_lib.uuid4())
        return str(uuid_lib.UUID(int=self._rng.getrandbits(128), version=4))

    def existing(self, original_filename: str) -> Optional[str]:
        return self._by_original.get(original_filename)

    def assign(self, original_filename: Optional[str] = None) -> str:
        """
        Return the UUID for an original, minting one if it has none.

        Args:
            original_filename: Original file name; None always mints

        Returns:
            Lowercase hyphenated version-4 UUID
        """
        if original_filename is not None and original_filename in self._by_original:
            return self._by_original[original_filename]
        value = self._fresh()
        while value in self._used:
            value = self._fresh()
        self._used.add(value)
        if original_filename is not None:
            self._by_original[original_filename] = value
        return value


def assign_uuid(assigner: UuidAssigner, asset_name: Optional[str] = None) -> str:
    """UUID for `asset_name` from `assigner` (see UuidAssigner.assign)."""
    return assigner.assign(asset_name)


def detect_format(data: bytes) -> Optional[str]:
    """"JPEG", "PNG" or None from the file signature."""
    if data.startswith(JPEG_SOI):
        return "JPEG"
    if data.startswith(PNG_SIGNATURE):
        return "PNG"
    return None


def _embed_jpeg(data: bytes, value: str) -> bytes:
    try:
        exif = piexif.load(data)
    except Exception as e:
        logger.warning(f"Unreadable EXIF segment replaced: {e}")
        exif = {"0th": {}, "Exif": {}, "GPS": {}, "Interop": {}, "1st": {}, "thumbnail": None}
    exif.setdefault("Exif", {})[piexif.ExifIFD.ImageUniqueID] = value.encode("ascii")
    try:
        exif_bytes = piexif.dump(exif)
    except Exception as e:
        # piexif rejects some vendor tags; keep only the identity.
        logger.warning(f"Existing EXIF could not be re-encoded ({e}); writing identity only")
        exif_bytes = piexif.dump({"Exif": {piexif.ExifIFD.ImageUniqueID: value.encode("ascii")}})
    output = io.BytesIO()
    piexif.insert(exif_bytes, data, output)
    return output.getvalue()


def _iter_png_chunks(data: bytes) -> Iterable[Tuple[bytes, bytes, bytes]]:
    """Yield (chunk_type, chunk_data, raw_chunk) after the signature."""
    offset = len(PNG_SIGNATURE)
    while offset + 8 <= len(data):
        (length,) = struct.unpack(">I", data[offset:offset + 4])
        chunk_type = data[offset + 4:offset + 8]
        end = offset + 12 + length
        if end > len(data):
            raise UnsupportedFormat("Truncated PNG chunk")
        yield chunk_type, data[offset + 8:offset + 8 + length], data[offset:end]
        offset = end


def _png_chunk(chunk_type: bytes, payload: bytes) -> bytes:
    crc = struct.pack(">I", zlib.crc32(chunk_type + payload) & 0xFFFFFFFF)
    return struct.pack(">I", len(payload)) + chunk_type + payload + crc


def _is_identity_chunk(chunk_type: bytes, payload: bytes) -> bool:
    return chunk_type == b"tEXt" and payload.split(b"\x00", 1)[0] == IDENTITY_KEYWORD.encode("latin-1")


def _embed_png(data: bytes, value: str) -> bytes:
    text_chunk = _png_chunk(b"tEXt", IDENTITY_KEYWORD.encode("latin-1") + b"\x00" + value.encode("latin-1"))
    parts = [PNG_SIGNATURE]
    inserted = False
    for chunk_type, payload, raw in _iter_png_chunks(data):
        if _is_identity_chunk(chunk_type, payload):
            continue
        if chunk_type == b"IDAT" and not inserted:
            parts.append(text_chunk)
            inserted = True
        parts.append(raw)
    if not inserted:
        raise UnsupportedFormat("PNG without image data")
    return b"".join(parts)


def embed_identity(data: bytes, value: str, fmt: Optional[str] = None) -> bytes:
    """
    Write the identity into the image metadata.

    Only metadata segments change; the compressed pixel data is copied
    through, so decoded pixels are identical. Embedding the same UUID twice
    yields the same bytes.

    Args:
        data: Original image bytes
        value: UUID to embed
        fmt: "JPEG" or "PNG"; detected from the signature when None

    Returns:
        Image bytes carrying the identity

    Raises:
        UnsupportedFormat: For any other format
    """
    fmt = (fmt or detect_format(data) or "").upper()
    if fmt in ("JPEG", "JPG"):
        return _embed_jpeg(data, value)
    if fmt == "PNG":
        return _embed_png(data, value)
    raise UnsupportedFormat(f"Cannot embed identity in format {fmt or 'unknown'!r}")


def read_identity(data: bytes) -> Optional[str]:
    """
    Read an embedded identity back.

    Returns:
        The embedded UUID, or None when absent or the format is unsupported
    """
    fmt = detect_format(data)
    if fmt == "JPEG":
        try:
            exif = piexif.load(data)
        except Exception:
            return None
        raw = exif.get("Exif", {}).get(piexif.ExifIFD.ImageUniqueID)
        if raw is None:
            return None
        return raw.decode("ascii", errors="replace").rstrip("\x00") if isinstance(raw, bytes) else str(raw)
    if fmt == "PNG":
        for chunk_type, payload, _ in _iter_png_chunks(data):
            if _is_identity_chunk(chunk_type, payload):
                return payload.split(b"\x00", 1)[1].decode("latin-1")
    return None


def write_mapping(rows: Iterable[MappingRow], uuid_images_dir: Path) -> Path:
    """
    Write `uuid_mapping.csv` sorted by original filename.

    Args:
        rows: Mapping rows (any order)
        uuid_images_dir: Directory holding the UUID-named copies

    Returns:
        Path of the mapping file

    Raises:
        ValueError: If rows is empty
        DuplicateOriginal: If an original appears with two UUID names
        DuplicateUuid: If a UUID name appears twice
        OSError: If the file cannot be written
    """
    by_original: Dict[str, MappingRow] = {}
    seen_uuid: Dict[str, str] = {}
    for row in rows:
        previous = by_original.get(row.original_filename)
        if previous is not None:
            if previous.uuid_filename != row.uuid_filename:
                raise DuplicateOriginal(
                    f"{row.original_filename} maps to both {previous.uuid_filename} and {row.uuid_filename}"
                )
            continue
        if row.uuid_filename in seen_uuid:
            raise DuplicateUuid(
                f"{row.uuid_filename} used by {seen_uuid[row.uuid_filename]} and {row.original_filename}"
            )
        by_original[row.original_filename] = row
        seen_uuid[row.uuid_filename] = row.original_filename
    if not by_original:
        raise ValueError("write_mapping needs at least one row")

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(MAPPING_COLUMNS)
    for name in sorted(by_original):
        row = by_original[name]
        writer.writerow([row.original_filename, row.uuid_filename, "" if row.record_id is None else row.record_id])

    path = uuid_images_dir / MAPPING_FILENAME
    atomic_write(path, buffer.getvalue())
    logger.info(f"Wrote {len(by_original)} mapping rows to {path}")
    return path


def read_mapping(uuid_images_dir: Path) -> List[MappingRow]:
    """Rows of an existing mapping file (empty when there is none)."""
    path = uuid_images_dir / MAPPING_FILENAME
    if not path.exists():
        return []
    with open(path, encoding="utf-8", newline="") as handle:
        return [
            MappingRow(
                original_filename=row["original_filename"],
                uuid_filename=row["uuid_filename"],
                record_id=int(row["record_id"]) if row.get("record_id") else None,
            )
            for row in csv.DictReader(handle)
        ]


def _decode_dimensions(data: bytes) -> Tuple[int, int]:
    with Image.open(io.BytesIO(data)) as image:
        image.load()
        return image.size


class IdentityService:
    """Builds the uuid_images/ collection from original_images/."""

    def __init__(self, original_images_dir: Path, uuid_images_dir: Path, seed: Optional[int] = None) -> None:
        self.original_images_dir = original_images_dir
        self.uuid_images_dir = uuid_images_dir
        self.existing_rows = read_mapping(uuid_images_dir)
        self.assigner = UuidAssigner(seed=seed, existing=self.existing_rows)

    def _candidates(self) -> List[Path]:
        if not self.original_images_dir.is_dir():
            raise EmptyCollection(f"{self.original_images_dir} does not exist")
        return sorted(
            (p for p in self.original_images_dir.iterdir() if p.is_file() and not p.name.startswith(".")),
            key=lambda p: p.name,
        )

    def _process_one(self, path: Path) -> ImageAsset:
        data = path.read_bytes()
        width, height = _decode_dimensions(data)
        parsed = parse_view_filename(path.name)
        record_id, view_code = parsed if parsed else (None, None)

        value = self.assigner.assign(path.name)
        uuid_filename = value + path.suffix.lower()
        target = self.uuid_images_dir / uuid_filename
        flags: List[str] = []

        sidecar = target.with_name(uuid_filename + SIDECAR_SUFFIX)
        if target.exists() and target.stat().st_size > 0:
            if sidecar.exists():
                flags.append(AssetFlag.IDENTITY_SIDECAR)
            logger.debug(f"{path.name} already mapped to {uuid_filename}; not rewritten")
        else:
            try:
                payload = embed_identity(data, value)
            except UnsupportedFormat as e:
                logger.warning(f"{path.name}: {e}; writing sidecar {sidecar.name}")
                payload = data
                atomic_write(sidecar, value + "\n")
                flags.append(AssetFlag.IDENTITY_SIDECAR)
            atomic_write(target, payload)

        return ImageAsset(
            original_filename=path.name,
            record_id=record_id,
            view_code=view_code,
            uuid=value,
            uuid_filename=uuid_filename,
            width_px=width,
            height_px=height,
            content_hash=sha256_hex(data),
            flags=flags,
        )

    def run(self) -> IdentityReport:
        """
        Process every file in the originals directory.

        Raises:
            EmptyCollection: If there is no file to process
            DuplicateOriginal: If the mapping would become inconsistent
        """
        candidates = self._candidates()
        if not candidates:
            raise EmptyCollection(f"No images in {self.original_images_dir}")
        ensure_dir(self.uuid_images_dir)

        report = IdentityReport()
        for path in candidates:
            try:
                report.assets.append(self._process_one(path))
            except (UnidentifiedImageError, OSError, SyntaxError, ValueError, UnsupportedFormat) as e:
                logger.warning(f"Skipping {path.name}: {e}")
                report.skipped.append(SkippedImage(filename=path.name, reason=str(e) or type(e).__name__))

        if not report.assets:
            logger.error(f"No decodable images in {self.original_images_dir}")
            return report

        rows = {row.original_filename: row for row in self.existing_rows}
        for asset in report.assets:
            rows[asset.original_filename] = MappingRow(
                original_filename=asset.original_filename,
                uuid_filename=asset.uuid_filename,
                record_id=asset.record_id,
            )
        report.mapping_path = str(write_mapping(rows.values(), self.uuid_images_dir))
        logger.info(f"Identity: {len(report.assets)} assets, {len(report.skipped)} skipped")
        return report


def process_collection(
    original_images_dir: Path,
    uuid_images_dir: Path,
    seed: Optional[int] = None,
) -> IdentityReport:
    """
    Assign identities to every image in `original_images_dir`.

    Originals are never modified; re-running is a no-op for mapped files.

    Args:
        original_images_dir: Harvested images
        uuid_images_dir: Destination of UUID-named copies and the mapping
        seed: Fixed UUID seed (tests only)

    Returns:
        IdentityReport: Assets sorted by original filename plus skipped files

    Raises:
        EmptyCollection: If the directory is empty or missing
    """
    return IdentityService(original_images_dir, uuid_images_dir, seed=seed).run()
