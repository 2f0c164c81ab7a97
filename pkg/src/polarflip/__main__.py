import sys

from polarflip.cli import main

sys.exit(main())
