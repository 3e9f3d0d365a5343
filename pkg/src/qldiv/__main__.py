import sys

from qldiv.cli import main

sys.exit(main())
