import sys

from dramleak.cli import main

sys.exit(main())
