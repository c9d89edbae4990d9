import sys

from surfsplit.cli import main

sys.exit(main())
