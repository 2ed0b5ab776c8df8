"""Unit tests for reachsafe."""
