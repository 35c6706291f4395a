import sys

from cointoss.cli import main

sys.exit(main())
