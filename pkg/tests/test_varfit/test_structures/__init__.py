# tests/test_varfit/test_structures/__init__.py
"""
Test suite for varfit records and banded matrices.
"""
