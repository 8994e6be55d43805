import sys

from pbsat.cli import main


sys.exit(main())
