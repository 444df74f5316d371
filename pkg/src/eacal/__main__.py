from eacal.cli import main; import sys; sys.exit(main())
