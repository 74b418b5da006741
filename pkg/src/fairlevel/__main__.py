import sys

from fairlevel.cli import main

sys.exit(main())
