import sys

from hft_kinetics.cli import main

sys.exit(main())
