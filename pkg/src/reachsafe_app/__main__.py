"""
Main entry point for reachsafe.

Usage:
    python -m reachsafe_app <command> [options]
    reachsafe <command> [options]  (if installed)
"""

import sys
from pathlib import Path


def main():
    """Run the command line and exit with its status."""
    # Ensure src is in path for development
    src_path = Path(__file__).parent.parent
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))

    from reachsafe_app.cli import dispatch

    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
