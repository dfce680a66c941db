"""Exact checks on small tori: spectra, first-order splitting, entropies, oracle residuals."""

import sys

from _common import run

if __name__ == "__main__":
    codes = [
        run("spectrum_L2_h0", ["spectrum", "--L", "2", "--h", "0"]),
        run("spectrum_L3_h0.1", ["spectrum", "--L", "3", "--h", "0.1"]),
        run("spectrum_dual_L3", ["spectrum", "--L", "3", "--h", "0.3", "--basis", "dual"]),
        run("perturb", ["perturb", "--L", "8,16,32,64"]),
        run("entropy_L3", ["entropy", "--L", "3", "--h", "0.1", "--max-plaquettes", "3"]),
        run("oracle_check_L3", ["oracle-check", "--L", "3", "--h", "0.1"]),
    ]
    sys.exit(max(codes))
