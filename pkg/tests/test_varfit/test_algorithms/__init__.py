# tests/test_varfit/test_algorithms/__init__.py
"""
Test suite for the varfit estimators, matrices and analytics.
"""
