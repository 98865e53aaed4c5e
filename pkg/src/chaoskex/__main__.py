"""Allow `python -m chaoskex ...`."""

import sys

from .cli import main

sys.exit(main())
