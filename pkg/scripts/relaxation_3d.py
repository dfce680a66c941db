"""Excess defect density after a random start, below and above the transition."""

import sys

from _common import run

if __name__ == "__main__":
    codes = [
        run("relaxation_3d_h0.004", ["relax3d", "--h", "0.004", "--t-max", "3000"]),
        run("relaxation_3d_h0.02", ["relax3d", "--h", "0.02", "--t-max", "60", "--n-times", "60",
                                    "--baseline", "tail", "--tail-from", "100",
                                    "--tail-to", "200"]),
    ]
    sys.exit(max(codes))
