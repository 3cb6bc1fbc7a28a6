import sys

from mmslam.main import main

sys.exit(main())
