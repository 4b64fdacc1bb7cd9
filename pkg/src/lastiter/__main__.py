"""Module entry point: ``python -m lastiter`` behaves like the console script."""

import sys

from .cli import main

sys.exit(main())
