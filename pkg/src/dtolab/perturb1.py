"""First-order splitting of the four 2d steady states under a weak field.

The unknowns ``alpha(i, j)``, ``0 <= i, j <= L``, live on the grid of
relative coordinates of a defect pair.  Every non-corner point carries a
discrete Laplace equation; on the four edges the inward neighbour counts
twice.  Corners carry no equation, so the null space is spanned by the
four harmonic extensions of the corner indicator functions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "CORNERS",
    "AlphaGrid",
    "EffectiveMatrix",
    "corner_points",
    "build_alpha_system",
    "alpha_solutions",
    "effective_matrix",
    "gap_scaling",
    "gap_table_csv",
]

CORNERS = ("00", "0L", "L0", "LL")


def corner_points(L: int) -> tuple[tuple[int, int], ...]:
    return ((0, 0), (0, L), (L, 0), (L, L))


def _check_L(L: int) -> None:
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")


@dataclass(frozen=True, eq=False)
class AlphaGrid:
    """One null solution; ``values[i, j]`` is ``alpha(i, j)``.

    ``corner`` names the corner where the solution equals 1.
    """

    L: int
    values: np.ndarray
    corner: str

    def __call__(self, i: int, j: int) -> float:
        return float(self.values[i, j])

    def symmetry_error(self) -> float:
        return float(np.abs(self.values - self.values.T).max())


def build_alpha_system(L: int) -> sp.csr_matrix:
    """Sparse ``(L+1)**2`` square matrix acting on ``alpha`` flattened row-major.

    Corner rows are identically zero.
    """
    _check_L(L)
    N = L + 1
    rows, cols, vals = [], [], []

    def add(r, i, j, v):
        rows.append(r)
        cols.append(i * N + j)
        vals.append(v)

    for i in range(N):
        for j in range(N):
            on_i = i in (0, L)
            on_j = j in (0, L)
            if on_i and on_j:
                continue
            r = i * N + j
            add(r, i, j, -4.0)
            if on_j:
                add(r, i - 1, j, 1.0)
                add(r, i + 1, j, 1.0)
                add(r, i, 1 if j == 0 else L - 1, 2.0)
            elif on_i:
                add(r, i, j - 1, 1.0)
                add(r, i, j + 1, 1.0)
                add(r, 1 if i == 0 else L - 1, j, 2.0)
            else:
                add(r, i - 1, j, 1.0)
                add(r, i + 1, j, 1.0)
                add(r, i, j - 1, 1.0)
                add(r, i, j + 1, 1.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N * N, N * N))


def alpha_solutions(M: sp.spmatrix, L: int) -> tuple[AlphaGrid, AlphaGrid, AlphaGrid, AlphaGrid]:
    """Null basis of ``M`` normalized to the four corner indicators.

    Raises
    ------
    ValueError
        If the null space is not four-dimensional, i.e. the non-corner block
        is singular.
    """
    _check_L(L)
    N = L + 1
    M = sp.csr_matrix(M)
    if M.shape != (N * N, N * N):
        raise ValueError("matrix does not match L")
    corner_idx = np.array([i * N + j for i, j in corner_points(L)])
    free = np.setdiff1d(np.arange(N * N), corner_idx)
    A = M[free][:, free].tocsc()
    B = M[free][:, corner_idx].toarray()
    lu = spla.splu(A)
    X = -lu.solve(B)
    if not np.all(np.isfinite(X)) or np.abs(A @ X + B).max() > 1e-9:
        raise ValueError("null space of the alpha system is not four-dimensional")
    out = []
    for k, name in enumerate(CORNERS):
        v = np.zeros(N * N)
        v[corner_idx[k]] = 1.0
        v[free] = X[:, k]
        out.append(AlphaGrid(L, v.reshape(N, N), name))
    return tuple(out)


@dataclass(frozen=True)
class EffectiveMatrix:
    """First-order effective generator ``n h [[a,b,c,d],[b,a,d,c],[c,d,a,b],[d,c,b,a]]``.

    ``deltas`` are ``(a-b-c+d, a+b-c-d, a-b+c-d, a+b+c+d)`` before scaling
    by ``n h``; ``eigenvalues`` are the scaled ones.
    """

    a: float
    b: float
    c: float
    d: float
    h: float
    n: int

    @property
    def deltas(self) -> np.ndarray:
        a, b, c, d = self.a, self.b, self.c, self.d
        return np.array([a - b - c + d, a + b - c - d, a - b + c - d, a + b + c + d])

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.n * self.h * self.deltas

    @property
    def matrix(self) -> np.ndarray:
        a, b, c, d = self.a, self.b, self.c, self.d
        core = np.array([[a, b, c, d], [b, a, d, c], [c, d, a, b], [d, c, b, a]])
        return self.n * self.h * core


def effective_matrix(alphas: Sequence[AlphaGrid], h: float, L: int) -> EffectiveMatrix:
    """Read ``a, b, c, d`` off the solution anchored at corner ``(0, 0)``."""
    al = next(g for g in alphas if g.corner == "00")
    a = al(1, 0) + al(0, 1) - 2.0
    b = al(L - 1, 0) + al(L, 1)
    c = al(1, L) + al(0, L - 1)
    d = al(L - 1, L) + al(L, L - 1)
    return EffectiveMatrix(a, b, c, d, float(h), L * L)


def gap_scaling(Ls: Sequence[int], h: float) -> list[dict[str, float]]:
    """Rows ``(L, delta2, delta2*log L, n h delta2)`` for increasing ``L``."""
    Ls = list(Ls)
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValueError("L list must be strictly increasing")
    rows = []
    for L in Ls:
        eff = effective_matrix(alpha_solutions(build_alpha_system(L), L), h, L)
        d2 = float(eff.deltas[1])
        rows.append({"L": L, "delta2": d2, "delta2_logL": d2 * math.log(L), "nh_delta2": eff.n * h * d2})
    return rows


def gap_table_csv(rows: Sequence[dict[str, float]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["L", "delta2", "delta2_logL", "nh_delta2"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()
