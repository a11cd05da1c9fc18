"""
Helper utility functions.

This module provides small filesystem, hashing and text helpers shared by the
harvester, the identity manager and the processing pipeline.
"""
import hashlib
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union


def sha256_hex(data: bytes) -> str:
    """
    Hash bytes with SHA-256.

    Args:
        data: Raw bytes

    Returns:
        Lowercase hex digest

    Examples:
        >>> sha256_hex(b"")[:8]
        'e3b0c442'
    """
    return hashlib.sha256(data).hexdigest()


def utc_now_iso() -> str:
    """Current UTC time as ISO-8601 with seconds precision."""
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def clean_text(text: Optional[str]) -> str:
    """
    Collapse runs of whitespace and trim.

    Args:
        text: Raw text (can be None)

    Returns:
        Cleaned text (empty string if input is None or blank)

    Examples:
        >>> clean_text("  WARREN   HILL \\n")
        'WARREN HILL'
        >>> clean_text(None)
        ''
    """
    if not text:
        return ""
    return " ".join(text.split())


def ensure_dir(path: Path) -> Path:
    """Create a directory (and parents) if missing and return it."""
    path.mkdir(parents=True, exist_ok=True)
    return path


def atomic_write(path: Path, data: Union[bytes, str], encoding: str = "utf-8") -> None:
    """
    Write a file atomically via a temporary sibling and rename.

    A reader never observes a half-written file; a crash leaves either the
    old content or none.

    Args:
        path: Destination file
        data: Bytes, or text encoded with `encoding`
        encoding: Text encoding when `data` is str

    Raises:
        OSError: If the directory is not writable
    """
    payload = data.encode(encoding) if isinstance(data, str) else data
    ensure_dir(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def check_writable(directory: Path) -> bool:
    """
    Check that a directory exists (creating it) and accepts new files.

    Returns:
        True if a temporary file could be created and removed, False otherwise
    """
    try:
        ensure_dir(directory)
        with tempfile.NamedTemporaryFile(dir=directory, prefix=".write-check."):
            pass
        return True
    except OSError:
        return False
