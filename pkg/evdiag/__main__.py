"""Run the command line with ``python -m evdiag``."""

import sys

from .cli import main

sys.exit(main())
