"""
Utility functions package.

This package contains utility functions used throughout the application.
"""
from app.utils.helpers import (
    atomic_write,
    check_writable,
    clean_text,
    ensure_dir,
    sha256_hex,
    utc_now_iso,
)

__all__ = [
    "atomic_write",
    "check_writable",
    "clean_text",
    "ensure_dir",
    "sha256_hex",
    "utc_now_iso",
]
