"""
Image identity Pydantic schemas.

This module defines the UUID-named image assets and the rows of the
original-to-UUID mapping file.
"""
from typing import List, Optional

from pydantic import BaseModel, Field

UUID4_PATTERN = r"^[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}$"


class AssetFlag:
    """Flags attached to an ImageAsset."""

    IDENTITY_SIDECAR = "identity_sidecar"
    EMPTY_FOREGROUND = "empty_foreground"
    SEGMENTATION_FAILED = "segmentation_failed"

    # Flags that keep an image out of the annotations.
    EXCLUDED = frozenset({EMPTY_FOREGROUND, SEGMENTATION_FAILED})


class ImageAsset(BaseModel):
    """
    One collection image with its assigned identity.

    Attributes:
        original_filename: File name under original_images/
        record_id: Record number parsed from the name, if it follows the
            `<id><view>.<ext>` convention
        view_code: View letter parsed from the name
        uuid: Lowercase hyphenated version-4 UUID
        uuid_filename: uuid plus the lowercased original extension
        width_px: Decoded width
        height_px: Decoded height
        content_hash: SHA-256 of the original bytes
        flags: Processing flags (see AssetFlag)
    """

    original_filename: str
    record_id: Optional[int] = None
    view_code: Optional[str] = None
    uuid: str = Field(..., pattern=UUID4_PATTERN)
    uuid_filename: str
    width_px: int = Field(..., ge=1)
    height_px: int = Field(..., ge=1)
    content_hash: str = Field(..., min_length=64, max_length=64)
    flags: List[str] = Field(default_factory=list)

    @property
    def excluded(self) -> bool:
        """True when the asset carries a flag that keeps it out of annotations."""
        return any(flag in AssetFlag.EXCLUDED for flag in self.flags)


class MappingRow(BaseModel):
    """
    Row of `uuid_mapping.csv`.

    Attributes:
        original_filename: Original file name
        uuid_filename: UUID file name
        record_id: Record number, if known
    """

    original_filename: str
    uuid_filename: str
    record_id: Optional[int] = None


class SkippedImage(BaseModel):
    """An input file that could not be processed."""

    filename: str
    reason: str


class IdentityReport(BaseModel):
    """
    Result of processing a collection directory.

    Attributes:
        assets: Processed assets, sorted by original filename
        skipped: Files that were flagged and skipped
        mapping_path: Path of the written mapping file
    """

    assets: List[ImageAsset] = Field(default_factory=list)
    skipped: List[SkippedImage] = Field(default_factory=list)
    mapping_path: Optional[str] = None
