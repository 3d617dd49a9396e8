import sys

from fsminer.cli import main

sys.exit(main())
