"""
Run configuration management using Pydantic Settings.

This module provides the validated run configuration shared by the harvester,
the image processing pipeline and the mock archive. Values come from (lowest to
highest precedence) defaults, a `.env` file, `BIFACES_*` environment variables,
an optional TOML file and CLI flag overrides.
"""
import logging
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

DEFAULT_RECORD_URL_TEMPLATE = (
    "https://archaeologydataservice.ac.uk/archives/view/bifaces/bf_record.cfm?id={id}"
)
ID_PLACEHOLDER = "{id}"
MAX_SEED = 2**64 - 1

_ID_RANGE_PATTERN = re.compile(r"^\s*(-?\d+)\s*(?:\.\.=?|-|:)\s*(-?\d+)\s*$")


class ConfigError(Exception):
    """Base exception for configuration errors."""

    pass


class InvalidRange(ConfigError):
    """Raised when a delay interval or the id range is empty or inverted."""

    pass


class BadTemplate(ConfigError):
    """Raised when the record URL template does not hold exactly one {id}."""

    pass


class InvalidViewCodes(ConfigError):
    """Raised when view codes are empty, repeated or not single characters."""

    pass


class ThresholdMode(str, Enum):
    """Thresholding strategy for segmentation."""

    OTSU = "otsu"
    FIXED = "fixed"


class IdRange(BaseModel):
    """
    Inclusive range of record ids.

    Attributes:
        start: First record id (>= 1)
        end: Last record id (inclusive)
    """

    start: int
    end: int

    @classmethod
    def parse(cls, value: Any) -> "IdRange":
        """
        Build an IdRange from "A..B", [A, B], (A, B) or a mapping.

        Raises:
            InvalidRange: If the value cannot be read as a range
        """
        if isinstance(value, IdRange):
            return value
        if isinstance(value, Mapping):
            return cls(start=int(value["start"]), end=int(value["end"]))
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return cls(start=int(value[0]), end=int(value[1]))
        if isinstance(value, str):
            match = _ID_RANGE_PATTERN.match(value)
            if match:
                return cls(start=int(match.group(1)), end=int(match.group(2)))
        raise InvalidRange(f"Cannot read id range from {value!r}")

    def ids(self) -> range:
        """Ascending ids covered by the range."""
        return range(self.start, self.end + 1)

    def __len__(self) -> int:
        return max(0, self.end - self.start + 1)

    def __contains__(self, record_id: int) -> bool:
        return self.start <= record_id <= self.end

    def __str__(self) -> str:
        return f"{self.start}..{self.end}"


class RecordSelectors(BaseModel):
    """
    CSS selectors used by the record extractor.

    Overridable so the extractor can follow a changed site layout without
    code changes.
    """

    details_table: str = "table.details"
    thumbnail_links: str = "div.views a"
    description: str = ".description"
    record_number: str = ".record-number"


class RunConfig(BaseSettings):
    """
    Settings for one toolkit run.

    All invariants are checked on construction; an instance that exists is
    valid.
    """

    # Harvesting
    base_record_url_template: str = DEFAULT_RECORD_URL_TEMPLATE
    id_range: IdRange = Field(default_factory=lambda: IdRange(start=1, end=3556))
    min_delay_s: float = Field(1.0, ge=0)
    max_delay_s: float = Field(3.0, ge=0)
    max_retries: int = Field(3, ge=0, le=10)
    request_timeout_s: float = Field(30.0, gt=0)
    user_agent: str = "bifaces-harvester/1.0 (research use; polite crawler)"
    record_selectors: RecordSelectors = Field(default_factory=RecordSelectors)
    view_codes: list[str] = Field(default_factory=lambda: ["f", "r", "s"])
    rng_seed: Optional[int] = Field(None, ge=0, le=MAX_SEED)

    # Paths (relative paths resolve against output_dir)
    output_dir: Path = Path(".")
    original_images_dir: Path = Path("original_images")
    uuid_images_dir: Path = Path("uuid_images")
    dataset_info_path: Path = Path("dataset_info.md")
    records_csv_name: str = "bifaces_records_online.csv"
    journal_name: str = "harvest_journal.jsonl"
    metadata_store_name: str = "records_metadata.jsonl"

    # Segmentation
    threshold_mode: ThresholdMode = ThresholdMode.OTSU
    threshold_level: int = Field(128, ge=0, le=255)
    connectivity: int = 8
    morph_opening: bool = True
    polygon_epsilon_px: float = Field(0.0, ge=0)
    low_contrast_floor: float = Field(100.0, ge=0)
    large_component_ratio: float = Field(0.25, gt=0, le=1)

    # Rendering / processing
    overlay_opacity: float = Field(0.5, ge=0, le=1)
    jobs: int = Field(1, ge=1)

    # Logging
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="BIFACES_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
    )

    @field_validator("id_range", mode="before")
    @classmethod
    def _parse_id_range(cls, value: Any) -> IdRange:
        return IdRange.parse(value)

    @field_validator("connectivity")
    @classmethod
    def _check_connectivity(cls, value: int) -> int:
        if value not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        return value

    @field_validator("log_level")
    @classmethod
    def _upper_log_level(cls, value: str) -> str:
        return value.upper()

    @model_validator(mode="after")
    def _check_invariants(self) -> "RunConfig":
        if self.min_delay_s > self.max_delay_s:
            raise InvalidRange(
                f"min_delay_s ({self.min_delay_s}) > max_delay_s ({self.max_delay_s})"
            )
        if len(self.id_range) == 0 or self.id_range.start < 1:
            raise InvalidRange(f"id_range {self.id_range} is empty or starts below 1")
        placeholders = self.base_record_url_template.count(ID_PLACEHOLDER)
        if placeholders != 1:
            raise BadTemplate(
                f"Template must contain exactly one {ID_PLACEHOLDER}, found {placeholders}"
            )
        if not self.view_codes:
            raise InvalidViewCodes("view_codes must not be empty")
        if any(len(code) != 1 for code in self.view_codes):
            raise InvalidViewCodes("view codes must be single characters")
        if len(set(self.view_codes)) != len(self.view_codes):
            raise InvalidViewCodes("view codes must be distinct")
        return self

    def resolve(self, path: Path) -> Path:
        """Resolve a configured path against output_dir unless absolute."""
        path = Path(path)
        return path if path.is_absolute() else Path(self.output_dir) / path

    @property
    def original_images_path(self) -> Path:
        return self.resolve(self.original_images_dir)

    @property
    def uuid_images_path(self) -> Path:
        return self.resolve(self.uuid_images_dir)

    @property
    def records_csv_path(self) -> Path:
        return self.resolve(Path(self.records_csv_name))

    @property
    def journal_path(self) -> Path:
        return self.resolve(Path(self.journal_name))

    @property
    def metadata_store_path(self) -> Path:
        return self.resolve(Path(self.metadata_store_name))


def load_run_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Load and validate the run configuration.

    Args:
        path: Optional TOML file with RunConfig keys at top level
        overrides: CLI flag values; None entries are ignored and the rest
            win over the file

    Returns:
        RunConfig: A configuration satisfying every invariant

    Raises:
        ConfigError: If the file cannot be read or a value is invalid
        InvalidRange: If the delay interval or id range is inverted/empty
        BadTemplate: If the URL template placeholder count is not one
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as handle:
                data = tomllib.load(handle)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid TOML: {e}") from e

        unknown = sorted(set(data) - set(RunConfig.model_fields))
        if unknown:
            logger.warning(f"Ignoring unknown config keys in {path}: {unknown}")

    if overrides:
        data.update({key: value for key, value in overrides.items() if value is not None})

    try:
        config = RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e

    logger.debug(f"Run configuration loaded: {config.model_dump(mode='json')}")
    return config
