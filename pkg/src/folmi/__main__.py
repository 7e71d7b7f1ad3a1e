import sys

from folmi.cli import main

sys.exit(main())
