"""Unit tests for hq-restore.

These tests focus on individual models and services on small
instances, without touching the filesystem.
"""
