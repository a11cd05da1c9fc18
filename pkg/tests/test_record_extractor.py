"""
Tests for record page extraction.
"""
import random

import pytest
from bs4 import BeautifulSoup

from app.config import RecordSelectors
from app.schemas.record import RECORD_FIELD_LABELS
from app.services.mock_site import MockSpec, record_metadata, render_record_page
from app.services.record_extractor import (
    IdMismatch,
    NotARecordPage,
    build_record_url,
    classify_view,
    extract_record,
    parse_view_filename,
)

PAGE_URL = "https://archaeologydataservice.ac.uk/archives/view/bifaces/bf_record.cfm?id=190"


def test_build_record_url():
    """The id replaces the placeholder."""
    template = "https://archaeologydataservice.ac.uk/archives/view/bifaces/bf_record.cfm?id={id}"
    assert build_record_url(template, 190) == PAGE_URL


@pytest.mark.parametrize(
    "filename, expected",
    [("85f.jpg", "f"), ("190r.JPG", "r"), ("3155s.png", "s"), ("scale.jpg", None), ("85.jpg", None), ("85fr.jpg", None)],
)
def test_classify_view(filename, expected):
    """The single character between number and extension is the view."""
    assert classify_view(filename) == expected


def test_parse_view_filename():
    """Record id and view come from the file name."""
    assert parse_view_filename("3155r.jpg") == (3155, "r")
    assert parse_view_filename("notes.txt") is None


def test_extract_record_190(record_190_html):
    """All thirteen fields, the description and three views are read."""
    extracted = extract_record(record_190_html, 190, page_url=PAGE_URL)

    metadata = extracted.metadata
    assert metadata.record_id == 190
    assert metadata.description == "POSSIBLE ROUGHOUT"
    assert list(metadata.fields) == list(RECORD_FIELD_LABELS)
    assert metadata.fields["Sitename"] == "WARREN HILL"
    assert metadata.fields["Museum or holder"] == "BRITISH MUSEUM, LONDON, ENGLAND"
    assert metadata.fields["Museum accession date"] == ""

    assert [image.original_filename for image in extracted.images] == ["190f.jpg", "190r.jpg", "190s.jpg"]
    assert [image.view_code for image in extracted.images] == ["f", "r", "s"]
    assert extracted.images[0].full_url == (
        "https://archaeologydataservice.ac.uk/archives/view/images/full/190f.jpg"
    )
    assert extracted.images[0].thumbnail_url.endswith("/images/thumbs/190f.jpg")
    assert extracted.image_count_flagged is False


def test_extract_from_bytes(record_190_html):
    """Bytes input is decoded as UTF-8."""
    extracted = extract_record(record_190_html.encode("utf-8"), 190)
    assert extracted.metadata.fields["Country"] == "ENGLAND"


def test_missing_table_is_not_a_record(record_190_html):
    """A page without the details table is rejected."""
    html = record_190_html.split("<h3>Details</h3>")[0] + "</body></html>"
    with pytest.raises(NotARecordPage):
        extract_record(html, 190)


def test_error_page_is_not_a_record():
    """An unrelated page is rejected."""
    with pytest.raises(NotARecordPage):
        extract_record("<html><body><h1>Record not found</h1></body></html>", 9999)


def test_id_mismatch(record_190_html):
    """A page showing another record number is rejected."""
    with pytest.raises(IdMismatch):
        extract_record(record_190_html, 191)


def test_two_images_flagged(record_190_html):
    """Fewer than three views is extracted but flagged."""
    html = record_190_html.replace(
        '<a href="../images/full/190s.jpg"><img src="../images/thumbs/190s.jpg" alt="Side"></a>', ""
    )
    extracted = extract_record(html, 190)
    assert len(extracted.images) == 2
    assert extracted.image_count_flagged is True


def test_foreign_image_links_skipped(record_190_html):
    """Links that do not follow <id><view>.<ext> for this record are ignored."""
    html = record_190_html.replace(
        '<div class="views">',
        '<div class="views">\n    <a href="../images/full/scale.jpg"><img src="x.jpg"></a>'
        '\n    <a href="../images/full/191f.jpg"><img src="y.jpg"></a>',
    )
    extracted = extract_record(html, 190)
    assert [image.original_filename for image in extracted.images] == ["190f.jpg", "190r.jpg", "190s.jpg"]


def test_whitespace_collapsed(record_190_html):
    """Cell text is trimmed and inner whitespace collapsed."""
    html = record_190_html.replace("<td>WARREN HILL</td>", "<td>\n   WARREN\n   HILL  </td>")
    assert extract_record(html, 190).metadata.fields["Sitename"] == "WARREN HILL"


def test_repeated_label_kept_with_suffix(record_190_html):
    """A repeated label keeps both values."""
    html = record_190_html.replace(
        "<tr><th>Finder</th><td>STURGE</td></tr>",
        "<tr><th>Finder</th><td>STURGE</td></tr><tr><th>Finder</th><td>EVANS</td></tr>",
    )
    fields = extract_record(html, 190).metadata.fields
    assert fields["Finder"] == "STURGE"
    assert fields["Finder (2)"] == "EVANS"


def test_table_found_without_class(record_190_html):
    """A two-column table is found even when the class selector misses."""
    html = record_190_html.replace('<table class="details">', "<table>")
    extracted = extract_record(html, 190)
    assert extracted.metadata.fields["Biface type"] == "HANDAXE"


def test_custom_selectors(record_190_html):
    """Selectors can follow a changed layout."""
    html = record_190_html.replace('class="views"', 'id="gallery"').replace(
        'class="description"', 'class="notes"'
    )
    selectors = RecordSelectors(thumbnail_links="#gallery a", description=".notes")
    extracted = extract_record(html, 190, selectors=selectors)
    assert len(extracted.images) == 3
    assert extracted.metadata.description == "POSSIBLE ROUGHOUT"


def test_missing_description_is_empty(record_190_html):
    """No description element gives an empty description."""
    html = record_190_html.replace(
        '<p class="description"><strong>Description</strong> POSSIBLE ROUGHOUT</p>', ""
    )
    assert extract_record(html, 190).metadata.description == ""


def shuffle_attributes(html, rng):
    """Rewrite a page with extra attributes and every tag's attributes in random order."""
    soup = BeautifulSoup(html, "lxml")
    for anchor in soup.find_all("a"):
        anchor["title"] = "Download the full image"
    for image in soup.find_all("img"):
        image["width"] = "120"
        image["loading"] = "lazy"
    for tag in soup.find_all(True):
        items = list(tag.attrs.items())
        rng.shuffle(items)
        tag.attrs = dict(items)
    return str(soup)


def test_generated_pages_round_trip_with_shuffled_attributes():
    """Two hundred generated pages extract to the metadata they were rendered from."""
    spec = MockSpec(record_count=200, seed=31)
    rng = random.Random(31)
    for record_id in range(1, 201):
        description, fields = record_metadata(spec, record_id)
        page = shuffle_attributes(render_record_page(spec, record_id), rng)

        extracted = extract_record(page, record_id, page_url=f"http://mock.test/bf_record.cfm?id={record_id}")

        assert extracted.metadata.record_id == record_id
        assert extracted.metadata.description == description
        assert extracted.metadata.fields == fields
        assert [image.original_filename for image in extracted.images] == [
            f"{record_id}{view}.jpg" for view in spec.views
        ]
        assert extracted.images[-1].full_url == f"http://mock.test/images/full/{record_id}s.jpg"
        assert extracted.image_count_flagged is False
