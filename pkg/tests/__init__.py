"""
Test suite for SSC Lab
"""
