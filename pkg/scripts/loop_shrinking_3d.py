"""Collapse time of square defect loops at zero field."""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("loop_shrinking_3d", ["shrink3d", "--L", "48", "--R", "4,8,16"]))
