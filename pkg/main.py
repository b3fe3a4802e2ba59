"""
Точка входа: python main.py <команда> ... или скрипт sealkit.
"""

import sys

from cli.app import main


if __name__ == "__main__":
    sys.exit(main())
