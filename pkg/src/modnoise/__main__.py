import sys

from modnoise.cli import main

sys.exit(main())
