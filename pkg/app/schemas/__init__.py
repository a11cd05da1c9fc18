"""
Pydantic schemas package.

This package contains the Pydantic schemas for manifests, record pages,
harvest progress, image identities and COCO documents.
"""
from app.schemas.coco import (
    CocoAnnotation,
    CocoCategory,
    CocoDocument,
    CocoImage,
    CocoInfo,
    CocoLicense,
    Violation,
    ViolationCode,
)
from app.schemas.dataset import DatasetInfo, LicenseInfo
from app.schemas.harvest import (
    HarvestReport,
    HarvestState,
    JournalEntry,
    JournalPhase,
    StoredRecord,
)
from app.schemas.identity import (
    AssetFlag,
    IdentityReport,
    ImageAsset,
    MappingRow,
    SkippedImage,
)
from app.schemas.record import (
    RECORD_FIELD_LABELS,
    ExtractedRecord,
    ImageLink,
    RecordMetadata,
)

__all__ = [
    "AssetFlag",
    "CocoAnnotation",
    "CocoCategory",
    "CocoDocument",
    "CocoImage",
    "CocoInfo",
    "CocoLicense",
    "DatasetInfo",
    "ExtractedRecord",
    "HarvestReport",
    "HarvestState",
    "IdentityReport",
    "ImageAsset",
    "ImageLink",
    "JournalEntry",
    "JournalPhase",
    "LicenseInfo",
    "MappingRow",
    "RECORD_FIELD_LABELS",
    "RecordMetadata",
    "SkippedImage",
    "StoredRecord",
    "Violation",
    "ViolationCode",
]
