"""Allow ``python -m wcoresets``."""

import sys

from .cli import main

sys.exit(main())
