"""Perimeter versus area law for 3d Wilson rectangles across a field scan.

Pass ``--L 32`` for the long-running larger lattice.
"""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("confinement_3d", ["wilson3d"]))
