from roughsf.cli import main
import sys

sys.exit(main())
