"""
Command-line entry point.

    python vigan.py gen-data --kind rotation --out d/
    python vigan.py train --data d/ --out m.vigan
    python vigan.py evaluate --model m.vigan --data d/ --out report.csv
"""
import sys

from modules.cli import main

if __name__ == '__main__':
    sys.exit(main())
