import sys

from cantor_normal.cli import main

if __name__ == '__main__':
    sys.exit(main())
