from mimn.cli import main
import sys
sys.exit(main())
