import sys

from kicktrack.cli import main

sys.exit(main())
