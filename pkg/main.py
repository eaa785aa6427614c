#!/usr/bin/env python3
"""
LGV Localization - Main launcher
"""

import sys
import os

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))

from cli import main as cli_main  # noqa: E402


def main():
    """Main function"""
    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
