import sys

from ctpi.cli import main

sys.exit(main())
