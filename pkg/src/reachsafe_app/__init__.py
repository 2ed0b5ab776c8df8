"""
reachsafe command line application.

Batch surface over reachsafe_core: every subcommand reads files, writes
files plus a manifest, and prints a JSON summary.
"""

__version__ = "0.1.0"
