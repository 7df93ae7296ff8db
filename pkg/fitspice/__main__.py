"""python -m fitspice"""

import sys

from .cli import main

sys.exit(main())
