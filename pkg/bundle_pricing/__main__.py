"""Entry point for ``python -m bundle_pricing``."""

import sys

from .cli import main

sys.exit(main())
