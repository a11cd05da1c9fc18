"""
Pytest configuration and fixtures.

This module provides shared fixtures for all tests: a record page in the
collection's layout, a dataset manifest, a generated mock archive and
polite clients wired to it over an in-process ASGI transport.
"""
from pathlib import Path
from typing import Callable

import httpx
import pytest

from app.api.mock_archive import create_mock_app
from app.config import RunConfig
from app.services.mock_site import MockSpec, generate_site
from app.services.polite_client import PoliteClient

MOCK_BASE_URL = "http://mock.test"
MOCK_RECORD_TEMPLATE = MOCK_BASE_URL + "/bf_record.cfm?id={id}"

RECORD_190_HTML = """<!DOCTYPE html>
<html>
<head><title>Bifaces - Full Record</title></head>
<body>
  <h2 class="record-number">Full Record - No. 190</h2>
  <h3>Views</h3>
  <p>Click on the thumbnails to view and download larger versions:</p>
  <div class="views">
    <a href="../images/full/190f.jpg"><img src="../images/thumbs/190f.jpg" alt="Front"></a>
    <a href="../images/full/190r.jpg"><img src="../images/thumbs/190r.jpg" alt="Rear"></a>
    <a href="../images/full/190s.jpg"><img src="../images/thumbs/190s.jpg" alt="Side"></a>
  </div>
  <p class="description"><strong>Description</strong> POSSIBLE ROUGHOUT</p>
  <h3>Details</h3>
  <table class="details">
    <tr><th>Sitename</th><td>WARREN HILL</td></tr>
    <tr><th>Country</th><td>ENGLAND</td></tr>
    <tr><th>Continent</th><td>EUROPE</td></tr>
    <tr><th>Biface type</th><td>HANDAXE</td></tr>
    <tr><th>Completeness</th><td>COMPLETE</td></tr>
    <tr><th>Finder</th><td>STURGE</td></tr>
    <tr><th>Finder's number</th><td>UNCLEAR</td></tr>
    <tr><th>Site subdivision</th><td>UNCLEAR</td></tr>
    <tr><th>Context or level</th><td>UNCLEAR</td></tr>
    <tr><th>Date found</th><td>UNCLEAR</td></tr>
    <tr><th>Museum or holder</th><td>BRITISH MUSEUM, LONDON, ENGLAND</td></tr>
    <tr><th>Museum accession number</th><td>1123</td></tr>
    <tr><th>Museum accession date</th><td></td></tr>
  </table>
</body>
</html>
"""

DATASET_INFO_TEXT = """# Dataset info

- **Description**: Lower and Middle Palaeolithic handaxes from Britain and beyond
- **Url**: https://archaeologydataservice.ac.uk/archives/view/bifaces/
- **Collection_short_name**: bifaces_ads
- **Version**: 1.0
- **Year**: 2024
- **Contributor**: Jane Doe <jane@example.org>
- **Date_created**: 2024-05-01
- **Licenses**:
  - id: 1
    name: CC BY 4.0
    url: https://creativecommons.org/licenses/by/4.0/
"""


@pytest.fixture
def record_190_html() -> str:
    """Record page of biface 190 in the collection's markup."""
    return RECORD_190_HTML


@pytest.fixture
def dataset_info_text() -> str:
    """A complete dataset_info.md."""
    return DATASET_INFO_TEXT


@pytest.fixture(scope="session")
def mock_site(tmp_path_factory) -> Path:
    """
    Mock archive with 25 records, three views each, seed 1.

    Generated once per session; tests must not modify it.
    """
    site_dir = tmp_path_factory.mktemp("mock_site")
    generate_site(MockSpec(record_count=25, seed=1), site_dir)
    return site_dir


@pytest.fixture
def mock_app(mock_site):
    """Fresh mock archive app (empty request log) over the shared site."""
    return create_mock_app(mock_site)


@pytest.fixture
def fast_config(tmp_path) -> RunConfig:
    """Run configuration against the mock archive with no pacing delay."""
    return RunConfig(
        base_record_url_template=MOCK_RECORD_TEMPLATE,
        id_range="1..25",
        min_delay_s=0.0,
        max_delay_s=0.0,
        max_retries=3,
        rng_seed=7,
        output_dir=tmp_path / "out",
    )


@pytest.fixture
def make_client() -> Callable[..., PoliteClient]:
    """
    Factory for polite clients talking to an ASGI app in process.

    Usage: make_client(config, app)
    """

    def factory(config: RunConfig, app) -> PoliteClient:
        return PoliteClient.from_config(config, transport=httpx.ASGITransport(app=app))

    return factory
