import sys

from floquet_spectra.cli import main

sys.exit(main())
