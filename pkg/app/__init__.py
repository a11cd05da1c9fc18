"""
Biface dataset toolkit - Application Package

This package harvests a web-published archaeological image collection and
turns it into a UUID-named, COCO-annotated segmentation dataset.
"""

__version__ = "1.0.0"
