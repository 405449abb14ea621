"""
src/scenarios/__main__.py
-------------------------

python -m src.scenarios <subcommand> --config PATH ...
"""

import sys

from src.scenarios.cli import main

if __name__ == "__main__":
    sys.exit(main())
