"""
main.py - Entry point for the PhotOptix command line

Usage:
    python main.py validate scenarios/hom.json
    python main.py simulate scenarios/hom.json --format csv
    python main.py hom-scan scenarios/hom.json --param overlap --from 0 --to 1 --steps 5
"""

import sys

from photoptix.cli import main

if __name__ == "__main__":
    sys.exit(main())
