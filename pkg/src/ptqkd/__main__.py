import sys

from ptqkd.cli import main

sys.exit(main())
