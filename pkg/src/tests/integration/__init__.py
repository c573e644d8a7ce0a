"""Integration tests for hq-restore.

These tests exercise the repositories against real files and run the
verification suites end to end.
"""
