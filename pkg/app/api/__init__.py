"""
API routes package.

This package contains the FastAPI application of the mock archive.
"""
