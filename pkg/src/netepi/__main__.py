"""Allow ``python -m netepi``."""

import sys

from .cli import main

sys.exit(main())
