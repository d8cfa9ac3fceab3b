"""
Test suite for varfit.
"""
