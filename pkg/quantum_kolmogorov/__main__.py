"""Allow `python -m quantum_kolmogorov`."""

from .cli import main

raise SystemExit(main())
