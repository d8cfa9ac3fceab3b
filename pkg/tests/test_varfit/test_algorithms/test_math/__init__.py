# tests/test_varfit/test_algorithms/test_math/__init__.py
"""
Test suite for the least squares kernels.
"""
