#root/run.py

"""
Eye Biomarker Study - Alternative Entry Point
Runs the eye-study command line from a source checkout without installing
the package: python run.py evaluate --data-dir data
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

try:
    from main import main
except ImportError as e:
    print(f"eye-study cannot start: {e}", file=sys.stderr)
    print("Install the dependencies first: pip install -r requirements.txt", file=sys.stderr)
    sys.exit(2)

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
