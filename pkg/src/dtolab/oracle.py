"""Brute-force ground truth on the smallest tori.

Everything here enumerates the full ``2**n_links`` configuration space and is
meant for cross-checking the samplers, the generator builders and the closed
forms in :mod:`dtolab.analytics`.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .analytics import beta_of_h
from .exact import SparseGenerator, config_bits, defect_patterns
from .lattice import Torus, build_torus
from .spins import logical_links

__all__ = [
    "MAX_ORACLE_L",
    "exact_steady_state_2d",
    "orbit_steady_state_2d",
    "star_group",
    "steady_state_residual",
    "detailed_balance_residual",
    "marginal",
    "shannon_entropy",
    "entropy_bruteforce",
    "von_neumann_entropy",
    "model2_unperturbed_state",
    "model2_unperturbed_entropy",
]

MAX_ORACLE_L = 3


def _torus2(L: int) -> Torus:
    if not 2 <= L <= MAX_ORACLE_L:
        raise ValueError(f"enumeration supports 2 <= L <= {MAX_ORACLE_L}, got {L}")
    return build_torus(2, (L, L))


def _n_defects(torus: Torus) -> np.ndarray:
    return _popcount(defect_patterns(torus))


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    c = np.zeros(x.shape, dtype=np.int64)
    while x.any():
        c += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return c


def exact_steady_state_2d(L: int, h: float, q1: float = 1.0) -> np.ndarray:
    """Steady-state probabilities of every configuration of an ``L x L`` torus.

    Configuration ``i`` has link ``l`` flipped iff bit ``l`` of ``i`` is set.
    The weight is ``beta**(#defects)``; at ``h = 0`` only defect-free
    configurations carry weight.
    """
    torus = _torus2(L)
    beta = beta_of_h(h, q1)
    nd = _n_defects(torus)
    w = np.power(beta, nd.astype(float))  # 0**0 == 1 keeps the defect-free sector at h = 0
    return w / w.sum()


def star_group(torus: Torus, logicals: bool = False) -> np.ndarray:
    """All elements of the star group as link bitmasks.

    With ``logicals=True`` the two non-contractible dual loops are added as
    generators, giving the enlarged group of order ``2**(n+1)``.
    """
    gens = []
    for v in range(torus.n_sites):
        gens.append(sum(1 << int(l) for l in torus.vertex_links[v]))
    if logicals:
        for axis in range(2):
            gens.append(sum(1 << int(l) for l in logical_links(torus, "W", axis)))
    group = {0}
    for g in gens:
        group |= {x ^ g for x in group}
    return np.array(sorted(group), dtype=np.int64)


def orbit_steady_state_2d(L: int, h: float, q1: float = 1.0) -> np.ndarray:
    """Steady state assembled as a sum over group orbits of defect representatives.

    For every even defect pattern one representative configuration is
    chosen and its orbit under stars and logical loops is given weight
    ``beta**(#defects)``.  Normalized by ``|G'| t_plus(beta, n)``.
    """
    from .analytics import T_prime

    torus = _torus2(L)
    beta = beta_of_h(h, q1)
    pat = defect_patterns(torus)
    gp = star_group(torus, logicals=True)
    rep_of: dict[int, int] = {}
    for idx, pt in enumerate(pat.tolist()):
        rep_of.setdefault(pt, idx)
    rho = np.zeros(1 << torus.n_links)
    for pt, rep in rep_of.items():
        k2 = bin(pt).count("1")
        rho[rep ^ gp] += 1.0 if k2 == 0 else beta**k2
    return rho / T_prime(beta, torus.n_plaquettes, gp.size)


def steady_state_residual(gen: SparseGenerator, p: np.ndarray) -> float:
    """``max |Gamma p|``."""
    if p.shape != (gen.dim,):
        raise ValueError("dimension mismatch")
    return float(np.abs(gen.matrix @ p).max())


def detailed_balance_residual(gen: SparseGenerator, p: np.ndarray) -> float:
    """Largest net probability current across a single-link flip.

    Only full-basis generators are supported; star moves are symmetric and
    excluded.
    """
    if gen.basis != "full":
        raise ValueError("detailed balance check needs the full configuration basis")
    if p.shape != (gen.dim,):
        raise ValueError("dimension mismatch")
    flux = sp.csr_matrix(gen.matrix.multiply(p[None, :]))
    net = (flux - flux.T).tocoo()
    diff = net.row ^ net.col
    single = (diff != 0) & ((diff & (diff - 1)) == 0)
    return float(np.abs(net.data[single]).max()) if single.any() else 0.0


def marginal(p: np.ndarray, links, n_links: int) -> np.ndarray:
    """Marginal distribution of the bits on ``links`` (in the given order)."""
    links = np.asarray(links, dtype=np.int64).ravel()
    if links.size and (links.min() < 0 or links.max() >= n_links):
        raise ValueError("region link out of range")
    if p.size != 1 << n_links:
        raise ValueError("p does not match n_links")
    idx = np.arange(p.size, dtype=np.int64)
    key = np.zeros(p.size, dtype=np.int64)
    for k, l in enumerate(links):
        key |= ((idx >> l) & 1) << k
    return np.bincount(key, weights=p, minlength=1 << links.size)


def shannon_entropy(q: np.ndarray) -> float:
    """Entropy in nats of a probability vector."""
    q = q[q > 0]
    return float(-(q * np.log(q)).sum())


def entropy_bruteforce(p: np.ndarray, links, n_links: int | None = None) -> float:
    """Entropy of the diagonal reduced state on a link region.

    ``n_links`` defaults to ``log2(p.size)``.  An empty region gives 0.
    """
    if n_links is None:
        n_links = int(round(math.log2(p.size)))
    links = np.unique(np.asarray(links, dtype=np.int64).ravel())
    if links.size == 0:
        return 0.0
    return shannon_entropy(marginal(p, links, n_links))


def von_neumann_entropy(rho: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(rho)
    ev = ev[ev > 1e-14]
    return float(-(ev * np.log(ev)).sum())


def model2_unperturbed_state(L: int = 2) -> np.ndarray:
    """Density matrix ``|G|**-1 sum_{g,g'} g|up><up|g'`` in the sigma^z basis."""
    if L != 2:
        raise ValueError("quantum brute force is limited to L = 2")
    torus = build_torus(2, (L, L))
    g = star_group(torus)
    psi = np.zeros(1 << torus.n_links)
    psi[g] = 1.0 / math.sqrt(g.size)
    return np.outer(psi, psi)


def _partial_trace(rho: np.ndarray, keep: np.ndarray, n: int) -> np.ndarray:
    rest = np.setdiff1d(np.arange(n), keep)
    # tensor axis j holds bit (n-1-j) of the basis index
    t = rho.reshape((2,) * (2 * n))
    ax = lambda ls: [n - 1 - int(l) for l in ls]
    order = ax(keep) + ax(rest)
    t = t.transpose(order + [n + a for a in order])
    da, db = 1 << keep.size, 1 << rest.size
    return np.einsum("ijkj->ik", t.reshape(da, db, da, db))


def model2_unperturbed_entropy(links, L: int = 2) -> float:
    """Von Neumann entropy of the unperturbed two-sector steady state on a region."""
    rho = model2_unperturbed_state(L)
    n = int(round(math.log2(rho.shape[0])))
    keep = np.unique(np.asarray(links, dtype=np.int64).ravel())
    if keep.size == 0:
        return 0.0
    if keep.min() < 0 or keep.max() >= n:
        raise ValueError("region link out of range")
    return von_neumann_entropy(_partial_trace(rho, keep, n))
