import sys

from cfuc.cli import main

sys.exit(main())
