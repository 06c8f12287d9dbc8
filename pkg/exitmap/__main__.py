"""Run the exitmap command line: ``python -m exitmap``."""
import sys

from exitmap.cli import main

if __name__ == "__main__":
    sys.exit(main())
