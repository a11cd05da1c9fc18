"""
COCO document Pydantic schemas.

This module defines the COCO-format annotation document written for a
collection. Field declaration order is the serialisation order.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

OBJECT_CATEGORY_ID = 1
OBJECT_CATEGORY_NAME = "object"

# Custom key on each image object holding the record enrichment.
ENRICHMENT_KEY = "archaeology"


class CocoInfo(BaseModel):
    """Collection description block."""

    description: str
    url: str
    version: str
    year: int
    contributor: str
    date_created: str


class CocoLicense(BaseModel):
    """License block entry."""

    id: int
    name: str
    url: str


class CocoImage(BaseModel):
    """
    Image entry.

    Attributes:
        id: 1-based position in file_name order
        file_name: UUID file name
        width: Width in pixels
        height: Height in pixels
        archaeology: Record enrichment block (record_id, view_code,
            original_filename, uuid, description, fields, quality flags)
    """

    id: int
    file_name: str
    width: int
    height: int
    archaeology: Optional[Dict[str, Any]] = None


class CocoAnnotation(BaseModel):
    """
    Annotation entry, kept strictly standard.

    Attributes:
        id: 1-based position aligned with image order
        image_id: Referenced image id
        category_id: Always the single object category
        segmentation: One flat polygon [x1, y1, ..., xn, yn]
        area: Mask pixel count
        bbox: [x, y, w, h]
        iscrowd: Always 0 (polygon encoding)
    """

    id: int
    image_id: int
    category_id: int = OBJECT_CATEGORY_ID
    segmentation: List[List[float]]
    area: float
    bbox: List[float]
    iscrowd: int = 0


class CocoCategory(BaseModel):
    """Category entry."""

    id: int = OBJECT_CATEGORY_ID
    name: str = OBJECT_CATEGORY_NAME
    supercategory: str = OBJECT_CATEGORY_NAME


class CocoDocument(BaseModel):
    """Complete COCO document."""

    info: CocoInfo
    licenses: List[CocoLicense] = Field(default_factory=list)
    images: List[CocoImage] = Field(default_factory=list)
    annotations: List[CocoAnnotation] = Field(default_factory=list)
    categories: List[CocoCategory] = Field(default_factory=lambda: [CocoCategory()])


class ViolationCode(str, Enum):
    """Kinds of COCO document defects."""

    DUPLICATE_IMAGE_ID = "DuplicateImageId"
    DUPLICATE_ANNOTATION_ID = "DuplicateAnnotationId"
    DUPLICATE_FILE_NAME = "DuplicateFileName"
    ID_NOT_POSITIONAL = "IdNotPositional"
    DANGLING_IMAGE_REF = "DanglingImageRef"
    BAD_CATEGORY_REF = "BadCategoryRef"
    UNEXPECTED_CATEGORY = "UnexpectedCategory"
    MISSING_CATEGORY = "MissingCategory"
    BAD_DIMENSIONS = "BadDimensions"
    BBOX_OUT_OF_BOUNDS = "BboxOutOfBounds"
    NON_POSITIVE_AREA = "NonPositiveArea"
    POLYGON_TOO_SHORT = "PolygonTooShort"
    BAD_ISCROWD = "BadIscrowd"


class Violation(BaseModel):
    """
    One validation finding.

    Attributes:
        code: Defect kind
        message: Human-readable detail
        ref: Id of the offending image/annotation/category, when there is one
    """

    code: ViolationCode
    message: str
    ref: Optional[int] = None

    def __str__(self) -> str:
        where = f" (id {self.ref})" if self.ref is not None else ""
        return f"{self.code.value}{where}: {self.message}"
