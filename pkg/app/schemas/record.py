"""
Record page Pydantic schemas.

This module defines the metadata and image links extracted from one record
page of the collection.
"""
from typing import Dict, Optional

from pydantic import BaseModel, Field

# Label vocabulary of the collection's details table, in page order.
RECORD_FIELD_LABELS = (
    "Sitename",
    "Country",
    "Continent",
    "Biface type",
    "Completeness",
    "Finder",
    "Finder's number",
    "Site subdivision",
    "Context or level",
    "Date found",
    "Museum or holder",
    "Museum accession number",
    "Museum accession date",
)

EXPECTED_IMAGES_PER_RECORD = 3


class RecordMetadata(BaseModel):
    """
    One artifact's record.

    Attributes:
        record_id: Positive record number
        description: Free-text description (may be empty)
        fields: Ordered label -> value map, in document order; empty values
            are kept as empty strings
    """

    record_id: int = Field(..., gt=0)
    description: str = ""
    fields: Dict[str, str] = Field(default_factory=dict)


class ImageLink(BaseModel):
    """
    Link to one full-size view image of a record.

    Attributes:
        record_id: Record the image belongs to
        view_code: Single-character view suffix (e.g. "f")
        thumbnail_url: URL of the thumbnail shown on the record page
        full_url: URL of the full-size image
        original_filename: Final path segment of full_url, `<record_id><view_code>.<ext>`
    """

    record_id: int = Field(..., gt=0)
    view_code: str = Field(..., min_length=1, max_length=1)
    thumbnail_url: Optional[str] = None
    full_url: str
    original_filename: str


class ExtractedRecord(BaseModel):
    """
    Result of parsing one record page.

    Attributes:
        metadata: The record's metadata
        images: Full-size image links in page order
        image_count_flagged: True when the page does not show the expected
            three views
    """

    metadata: RecordMetadata
    images: list[ImageLink] = Field(default_factory=list)
    image_count_flagged: bool = False
