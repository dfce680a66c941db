"""Monte Carlo Wilson loops on a 32x32 torus against the exact curve."""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("wilson_2d", ["wilson2d", "--L", "32", "--h", "0.2", "--sizes", "1,2,3"]))
