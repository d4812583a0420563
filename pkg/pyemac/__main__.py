import sys

from .simulate import cli_main

sys.exit(cli_main())
