"""
Entry script for the wglab command line.

    python wglab.py run configs/conservation.json
    python wglab.py report output/conservation/manifest.json --json
    python wglab.py resonance enum --j 0,0 --trunc 1
"""

import sys
import os

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from cli import main

if __name__ == "__main__":
    sys.exit(main())
