"""End-to-end tests for hq-restore.

These tests call the command-line entry point with files under a
temporary directory and check exit codes and every written artifact.
"""
