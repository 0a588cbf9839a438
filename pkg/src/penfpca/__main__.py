"""Allow ``python -m penfpca``."""
import sys

from .cli import main

sys.exit(main())
