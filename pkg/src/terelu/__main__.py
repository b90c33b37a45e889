from terelu.cli import main

raise SystemExit(main())
