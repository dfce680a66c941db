"""Closed-form steady-state results for the dissipative toric code.

Combinatorial sums are evaluated with ``mpmath`` at extended precision and
converted to ``float`` on return, which keeps ``t_minus`` accurate at small
``beta`` and large ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import mpmath as mp

__all__ = [
    "LOG2",
    "DPS",
    "beta_of_h",
    "f_beta",
    "t_pm",
    "T_prime",
    "T_eff",
    "wilson_2d",
    "wilson_3d_smallh",
    "wilson_3d_largeh",
    "EntropyInput",
    "group_orders",
    "entropy_model1",
    "stopo_kp",
    "LW_PARTITIONS",
    "stopo_lw_model1",
    "MODEL2_CASES",
    "entropy_model2",
    "stopo_model2",
]

LOG2 = math.log(2.0)
DPS = 50


def _check_beta(beta: float, *, allow_one: bool = True) -> None:
    if not (0.0 <= beta <= 1.0) or (not allow_one and beta >= 1.0):
        raise ValueError(f"beta out of range: {beta}")


def beta_of_h(h: float, q1: float = 1.0) -> float:
    """Steady-state weight per defect pair, ``sqrt(h / (q1**2 + h))``.

    ``h = inf`` gives 1.
    """
    if not h >= 0:
        raise ValueError(f"h must be >= 0, got {h}")
    if math.isinf(h):
        return 1.0
    return math.sqrt(h / (q1 * q1 + h))


def f_beta(beta: float) -> float:
    """``log(1+b) - b/(1+b) log b``; 0 at ``b=0`` and ``log 2`` at ``b=1``."""
    _check_beta(beta)
    if beta == 0.0:
        return 0.0
    return math.log1p(beta) - beta / (1.0 + beta) * math.log(beta)


def _t_pm_mp(beta, n: int):
    b = mp.mpf(beta)
    a, c = (1 + b) ** n, (1 - b) ** n
    return (a + c) / 2, (a - c) / 2


def t_pm(beta: float, n: int) -> tuple[float, float]:
    """Even and odd parts of ``(1+beta)**n`` as ``(t_plus, t_minus)``."""
    _check_beta(beta)
    if n < 0:
        raise ValueError("n must be >= 0")
    with mp.workdps(DPS):
        tp, tm = _t_pm_mp(beta, int(n))
        return float(tp), float(tm)


def T_prime(beta: float, n: int, g_prime_order: int) -> float:
    """Normalization of the degenerate steady state, ``|G'| t_plus(beta, n)``."""
    return float(g_prime_order) * t_pm(beta, n)[0]


def T_eff(h: float) -> float:
    """Effective temperature ``4 / ln((h+1)/h)``; ``inf`` at ``h = 0``."""
    if h < 0:
        raise ValueError("h must be >= 0")
    if h == 0:
        return math.inf
    return 4.0 / math.log((h + 1.0) / h)


def wilson_2d(beta: float, m: int, n: int | None = None) -> float:
    """Steady-state Wilson loop enclosing ``m`` plaquettes on a torus of ``n``.

    ``n=None`` gives the thermodynamic limit ``((1-beta)/(1+beta))**m``.
    """
    _check_beta(beta, allow_one=False)
    if m < 0:
        raise ValueError("m must be >= 0")
    if n is None:
        return ((1.0 - beta) / (1.0 + beta)) ** m
    if m > n:
        raise ValueError("m must not exceed n")
    with mp.workdps(DPS):
        b = mp.mpf(beta)
        tp_rest, tm_rest = _t_pm_mp(beta, n - m)
        total = mp.mpf(0)
        for j in range(m + 1):
            total += (-b) ** j * mp.binomial(m, j) * (tp_rest if j % 2 == 0 else tm_rest)
        return float(total / _t_pm_mp(beta, n)[0])


def wilson_3d_smallh(h: float, perimeter: float) -> float:
    """Perimeter-law reference curve ``exp(-2 h P)``."""
    return math.exp(-2.0 * h * perimeter)


def wilson_3d_largeh(h: float, area: float) -> float:
    """Area-law reference curve ``exp(-A ln(h) / 2)``."""
    if h <= 0:
        raise ValueError("h must be > 0")
    return math.exp(-0.5 * area * math.log(h))


@dataclass(frozen=True)
class EntropyInput:
    """Region counts and parameters for the closed-form subsystem entropies.

    Attributes
    ----------
    inside, boundary : int
        Vertices whose star lies fully in A, and vertices whose star is split.
    m : int
        Plaquettes with all boundary links in A (``m_p`` for the two-sector model).
    p, p_bar : int
        Connected components of A and of its complement.
    beta : float
        Plaquette-defect weight (``beta_m`` in the two-sector model).
    n : int or None
        Total plaquettes for finite-size formulas; ``None`` is the limit.
    partition1 : bool
        Complement has two pieces; requires ``p_bar >= 2``.
    m_v : int or None
        Vertex analogue of ``m``; defaults to ``inside``.
    beta_e : float
        Vertex-defect weight in the two-sector model.
    """

    inside: int
    boundary: int
    m: int
    p: int = 1
    p_bar: int = 1
    beta: float = 0.0
    n: int | None = None
    partition1: bool = False
    m_v: int | None = None
    beta_e: float = 0.0

    def __post_init__(self) -> None:
        counts = (self.inside, self.boundary, self.m, self.p, self.p_bar)
        if min(counts) < 0 or (self.m_v is not None and self.m_v < 0):
            raise ValueError("counts must be nonnegative")
        _check_beta(self.beta, allow_one=False)
        _check_beta(self.beta_e, allow_one=False)
        if self.n is not None and self.m > self.n:
            raise ValueError("m must not exceed n")
        if self.partition1 and self.p_bar < 2:
            raise ValueError("partition-1 requires a disconnected complement (p_bar >= 2)")

    @property
    def vertex_m(self) -> int:
        return self.inside if self.m_v is None else self.m_v

    @classmethod
    def from_counts(cls, counts, **kw) -> "EntropyInput":
        """Build from :class:`dtolab.lattice.RegionCounts`."""
        kw.setdefault("partition1", counts.p_bar >= 2)
        return cls(
            inside=counts.inside,
            boundary=counts.boundary,
            m=counts.m,
            p=counts.p,
            p_bar=counts.p_bar,
            m_v=counts.m_v,
            **kw,
        )


def group_orders(n: int, inside: int, outside: int, p: int, p_bar: int) -> tuple[int, int, int]:
    """Orders of the star group and its subgroups supported in A and in the complement.

    ``|G| = 2**(n-1)`` for ``n`` vertices on a closed torus,
    ``|G_A| = 2**(inside + p_bar - 1)``, ``|G_Abar| = 2**(outside + p - 1)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2 ** (n - 1), 2 ** (inside + p_bar - 1), 2 ** (outside + p - 1)


def _s2_finite(beta: float, m: int, n: int) -> float:
    """Defect part of the finite-size entropy; odd ``j`` pairs with ``t_minus``."""
    if beta == 0.0:
        return 0.0
    with mp.workdps(DPS):
        b = mp.mpf(beta)
        tp_n = _t_pm_mp(beta, n)[0]
        tp_r, tm_r = _t_pm_mp(beta, n - m)
        s = mp.mpf(0)
        for j in range(m + 1):
            t = tp_r if j % 2 == 0 else tm_r
            w = b**j * t
            if w == 0:
                continue
            s -= mp.binomial(m, j) * w / tp_n * mp.log(w / tp_n)
        return float(s)


def entropy_model1(inp: EntropyInput) -> float:
    """Subsystem entropy of the single-sector (plaquette-defect) steady state.

    ``beta = 0`` gives ``(|A|+|dA|-p_A) log 2``.  For ``beta > 0`` a connected
    complement adds ``m f(beta)`` in the limit, or the exact finite-size
    defect sum when ``n`` is given; a two-piece complement adds one more
    ``log 2`` and is available in the limit only.
    """
    x = inp.inside + inp.boundary
    if inp.beta == 0.0:
        return (x - inp.p) * LOG2
    if inp.partition1:
        if inp.n is not None:
            raise NotImplementedError("finite-n entropy with a disconnected complement")
        return (x - inp.p + 1) * LOG2 + inp.m * f_beta(inp.beta)
    if inp.n is None:
        return (x - inp.p) * LOG2 + inp.m * f_beta(inp.beta)
    return (x - inp.p) * LOG2 + _s2_finite(inp.beta, inp.m, inp.n)


def stopo_kp(d_inside: int, d_m: int, beta: float) -> float:
    """Tripartite combination ``(1 - dA) log 2 - dm f(beta)``."""
    return (1 - d_inside) * LOG2 - d_m * f_beta(beta)


# Four annulus bipartitions on a 12x12 torus: full ring, ring cut once on
# either side, ring cut on both sides.  Checked against the lattice in tests.
LW_PARTITIONS: tuple[EntropyInput, ...] = (
    EntropyInput(inside=44, boundary=36, m=60, p=1, p_bar=2, partition1=True),
    EntropyInput(inside=36, boundary=40, m=54, p=1, p_bar=1),
    EntropyInput(inside=36, boundary=40, m=54, p=1, p_bar=1),
    EntropyInput(inside=28, boundary=44, m=48, p=2, p_bar=1),
)

_LW_SIGNS = (-1, 1, 1, -1)


def _lw_combine(values: Sequence[float]) -> float:
    return math.fsum(s * v for s, v in zip(_LW_SIGNS, values))


def _check_lw(descriptors: Sequence[EntropyInput]) -> None:
    if len(descriptors) != 4:
        raise ValueError("need exactly four partitions")
    if not descriptors[0].partition1 or any(d.partition1 or d.p_bar != 1 for d in descriptors[1:]):
        raise ValueError("inconsistent descriptors: only the first partition may split the complement")

    def comb(attr):
        return sum(s * attr(d) for s, d in zip(_LW_SIGNS, descriptors))

    if comb(lambda d: d.inside + d.boundary) != 0 or comb(lambda d: d.boundary) != 0:
        raise ValueError("inconsistent descriptors: vertex counts do not cancel")
    if comb(lambda d: d.m) != 0 or comb(lambda d: d.vertex_m) != 0:
        raise ValueError("inconsistent descriptors: enclosed counts do not cancel")
    if -comb(lambda d: d.p) != 1:
        raise ValueError("inconsistent descriptors: component combination must be 1")


def stopo_lw_model1(beta: float, descriptors: Sequence[EntropyInput] = LW_PARTITIONS) -> float:
    """Four-partition topological entropy in the thermodynamic limit."""
    _check_lw(descriptors)
    return _lw_combine([entropy_model1(replace(d, beta=beta, n=None)) for d in descriptors])


MODEL2_CASES = ("both-zero", "hx-only", "both-nonzero")


def entropy_model2(inp: EntropyInput, case: str) -> float:
    """Subsystem entropy of the two-sector steady state in the limit.

    ``inp.beta`` is the plaquette weight and ``inp.beta_e`` the vertex weight.
    """
    if case not in MODEL2_CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {MODEL2_CASES}")
    want = {"both-zero": (False, False), "hx-only": (False, True), "both-nonzero": (True, True)}[case]
    if (inp.beta_e > 0, inp.beta > 0) != want:
        raise ValueError(f"case {case!r} does not match beta_e={inp.beta_e}, beta_m={inp.beta}")
    s = (inp.boundary + 1 - inp.p - inp.p_bar) * LOG2
    if case == "both-zero":
        return s
    s += inp.m * f_beta(inp.beta)
    if case == "hx-only":
        return s + (LOG2 if inp.partition1 else 0.0)
    s += inp.vertex_m * f_beta(inp.beta_e)
    return s + (2 * LOG2 if inp.partition1 else 0.0)


def stopo_model2(
    case: str,
    beta_e: float = 0.3,
    beta_m: float = 0.3,
    descriptors: Sequence[EntropyInput] = LW_PARTITIONS,
) -> float:
    """Four-partition topological entropy of the two-sector steady state.

    Weights not used by ``case`` are set to zero.
    """
    _check_lw(descriptors)
    be = beta_e if case == "both-nonzero" else 0.0
    bm = 0.0 if case == "both-zero" else beta_m
    return _lw_combine([entropy_model2(replace(d, beta=bm, beta_e=be), case) for d in descriptors])
