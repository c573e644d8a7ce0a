"""
Test package for hq-restore.

This package contains:
- Unit tests: potentials, operators, the objective, solver and oracle in isolation
- Integration tests: grid files and the verification suites
- E2E tests: the command line on real files
"""
