import sys

from gridfreq.cli import main

sys.exit(main())
