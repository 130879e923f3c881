import sys

from volumetrack.cli import main

sys.exit(main())
