"""Entry point for ``python -m donorcnot``."""

from __future__ import annotations

import sys

from donorcnot.cli import main

if __name__ == "__main__":
    sys.exit(main())
