"""Shared pytest configuration.

Keeping this file next to the test modules puts the tests directory on
sys.path so they can import the shared helpers (helpers_tiny).
"""
