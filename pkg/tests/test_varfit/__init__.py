"""
Main test package for the varfit estimators.
"""
