import sys

from ptx.cli import main

if __name__ == "__main__":
    sys.exit(main())
