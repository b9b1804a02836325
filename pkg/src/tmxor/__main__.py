import sys

from tmxor.cli import main

sys.exit(main())
