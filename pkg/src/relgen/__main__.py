"""Allow ``python3 -m relgen`` as an alternative to the ``relgen`` script."""

import sys

from relgen.cli import main

if __name__ == "__main__":
    sys.exit(main())
