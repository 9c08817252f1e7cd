import sys

from custvec.cli import main

sys.exit(main())
