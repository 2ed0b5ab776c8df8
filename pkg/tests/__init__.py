"""Tests for reachsafe."""
