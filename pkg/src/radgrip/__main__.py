import sys

from radgrip.cli import main

sys.exit(main())
