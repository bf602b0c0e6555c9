import sys

from .cli_reporting import main

sys.exit(main())
