"""Allow running as python -m fusedet."""

import sys

from fusedet import main

if __name__ == "__main__":
    sys.exit(main())
