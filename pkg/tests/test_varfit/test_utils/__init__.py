# tests/test_varfit/test_utils/__init__.py
"""
Test suite for varfit generators, simulation and I/O.
"""
