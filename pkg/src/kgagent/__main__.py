import sys

from kgagent.runner.cli import main

sys.exit(main())
