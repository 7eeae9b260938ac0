import sys

from coexsim.cli import main

sys.exit(main())
