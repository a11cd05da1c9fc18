"""
Collection manifest Pydantic schemas.

This module defines the schemas parsed from `dataset_info.md`.
"""
import re
from typing import Dict, List

from pydantic import BaseModel, Field, field_validator, model_validator

_SHORT_NAME_FORBIDDEN = re.compile(r"[\s/\\]")


class LicenseInfo(BaseModel):
    """
    License under which the source collection was published.

    Attributes:
        id: Positive license id, unique within the manifest
        name: License name
        url: License URL
    """

    id: int = Field(..., gt=0)
    name: str = Field(..., min_length=1)
    url: str = Field(..., min_length=1)


class DatasetInfo(BaseModel):
    """
    Collection-level description written into the COCO `info` block.

    Attributes:
        description: Free-text description of the dataset
        url: Original dataset URL
        collection_short_name: Token used as the COCO file stem
        version: Version of the COCO file
        year: Four-digit year of the COCO file
        contributor: Name and email of the contributor
        date_created: ISO-8601 date
        licenses: Licenses of the original dataset (may be empty)
        extra: Unknown manifest keys, preserved verbatim
    """

    description: str
    url: str
    collection_short_name: str = Field(..., min_length=1)
    version: str
    year: int = Field(..., ge=1000, le=9999)
    contributor: str
    date_created: str
    licenses: List[LicenseInfo] = Field(default_factory=list)
    extra: Dict[str, str] = Field(default_factory=dict)

    @field_validator("collection_short_name")
    @classmethod
    def _check_short_name(cls, value: str) -> str:
        if _SHORT_NAME_FORBIDDEN.search(value):
            raise ValueError("collection_short_name must not contain whitespace or path separators")
        return value

    @model_validator(mode="after")
    def _check_license_ids(self) -> "DatasetInfo":
        ids = [license.id for license in self.licenses]
        if len(ids) != len(set(ids)):
            raise ValueError("license ids must be unique")
        return self

    @property
    def coco_filename(self) -> str:
        """File name of the COCO document for this collection."""
        return f"{self.collection_short_name}.json"
