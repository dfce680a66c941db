"""Lifetime of a wrapping defect strip versus system size."""

import sys

from _common import run

if __name__ == "__main__":
    sys.exit(run("lifetime_3d", ["lifetime3d", "--L", "8,12,16", "--h", "0.005",
                                 "--n-traj", "500"]))
