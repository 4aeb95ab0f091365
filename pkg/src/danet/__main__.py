import sys

from danet.cli import main

sys.exit(main())
