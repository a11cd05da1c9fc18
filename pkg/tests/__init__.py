"""
Tests package.

This package contains all test files for the application.
"""
