import sys

from egamma_dp.cli import main

sys.exit(main())
