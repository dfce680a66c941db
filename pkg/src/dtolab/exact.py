"""Exact Markov generators on small tori and their spectra.

Generators act on probability column vectors, ``dp/dt = G p``: the entry
``G[a2, a1]`` is the rate of the jump ``a1 -> a2`` and every column sums to
zero, so the all-ones row vector annihilates ``G`` from the left.

Two bases are supported:

``full``
    All ``2**n_links`` link configurations; bit ``l`` of the index is the
    state of link ``l`` (1 meaning sigma^z = -1).  Single-link flips occur
    at rate ``P^2(F) + h`` and every vertex stabilizer at rate ``kappa_v``.
``dual-even``
    Plaquette defect patterns ``tau`` with an even number of defects; bit
    ``p`` of the pattern marks ``B_p = -1``.  This is the lumped chain of the
    full generator over configurations with equal plaquette values, which
    is exact because rates depend only on plaquette values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .dynamics import Model
from .lattice import Torus, build_torus

__all__ = [
    "SparseGenerator",
    "SpectralReport",
    "build_generator_full",
    "build_generator_dual",
    "lump_to_dual",
    "steady_space",
    "left_null_space",
    "biorthonormalize",
    "closed_classes",
    "spectrum",
    "xy_couplings",
    "build_xy_hamiltonian",
    "xy_spectrum_check",
    "config_bits",
    "defect_patterns",
]

DENSE_MAX = 4096
MAX_FULL_LINKS = 18


@dataclass(frozen=True, eq=False)
class SparseGenerator:
    """Sparse Markov generator with its basis description."""

    matrix: sp.csr_matrix
    basis: str
    torus: Torus
    model: Model

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def conservation_residual(self) -> float:
        """max |column sum|: the all-ones left covector residual."""
        return float(np.abs(np.asarray(self.matrix.sum(axis=0))).max())

    def min_offdiagonal(self) -> float:
        m = self.matrix.tocoo()
        off = m.row != m.col
        return float(m.data[off].min()) if off.any() else 0.0

    def max_diagonal(self) -> float:
        return float(self.matrix.diagonal().max())

    def norm_max(self) -> float:
        return float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0


def config_bits(n_links: int) -> np.ndarray:
    """``(2**n_links, n_links)`` uint8 table of all configurations."""
    idx = np.arange(1 << n_links, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n_links)) & 1).astype(np.uint8)


def defect_patterns(torus: Torus, bits: np.ndarray | None = None) -> np.ndarray:
    """Defect bit pattern (bit p set iff ``B_p = -1``) of every full-basis state."""
    if bits is None:
        bits = config_bits(torus.n_links)
    n_states = bits.shape[0]
    out = np.zeros(n_states, dtype=np.int64)
    for p in range(torus.n_plaquettes):
        par = np.bitwise_xor.reduce(bits[:, torus.plaquette_links[p]], axis=1)
        out |= par.astype(np.int64) << p
    return out


def _assemble(rows, cols, rates, dim) -> sp.csr_matrix:
    off = sp.coo_matrix((rates, (rows, cols)), shape=(dim, dim)).tocsr()
    off.sum_duplicates()
    out_rate = np.asarray(off.sum(axis=0)).ravel()
    return (off - sp.diags(out_rate)).tocsr()


def build_generator_full(torus: Torus, model: Model, max_links: int = MAX_FULL_LINKS
                         ) -> SparseGenerator:
    """Generator over all link configurations.

    Raises
    ------
    ValueError
        If ``2**n_links`` exceeds ``2**max_links`` (3d is excluded by default).
    """
    if torus.dim != model.dim:
        raise ValueError("torus and model dimensions differ")
    nl = torus.n_links
    if nl > max_links:
        raise ValueError(f"{nl} links exceed the exact-build cap of {max_links}")
    dim = 1 << nl
    bits = config_bits(nl)
    idx = np.arange(dim, dtype=np.int64)
    sign = 1 - 2 * bits.astype(np.int8)
    bvals = np.empty((dim, torus.n_plaquettes), dtype=np.int8)
    for p in range(torus.n_plaquettes):
        bvals[:, p] = np.prod(sign[:, torus.plaquette_links[p]], axis=1)
    del sign
    rows, cols, rates = [], [], []
    rate_of = np.array([model.rate(f) for f in range(-4, 5)])
    for l in range(nl):
        fld = bvals[:, torus.link_plaquettes[l]].sum(axis=1).astype(np.int64)
        r = rate_of[fld + 4]
        keep = r > 0
        rows.append(idx[keep] ^ (1 << l))
        cols.append(idx[keep])
        rates.append(r[keep])
    if model.kappa_v > 0:
        for v in range(torus.n_sites):
            mask = 0
            for l in torus.vertex_links[v]:
                mask ^= 1 << int(l)
            rows.append(idx ^ mask)
            cols.append(idx)
            rates.append(np.full(dim, model.kappa_v))
    G = _assemble(np.concatenate(rows), np.concatenate(cols), np.concatenate(rates), dim)
    return SparseGenerator(G, "full", torus, model)


def _even_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    pats = np.arange(1 << n, dtype=np.int64)
    pop = np.zeros_like(pats)
    for k in range(n):
        pop += (pats >> k) & 1
    even = pats[pop % 2 == 0]
    lookup = np.full(1 << n, -1, dtype=np.int64)
    lookup[even] = np.arange(even.size)
    return even, lookup


def build_generator_dual(L: int, h: float, q1: float = 1.0, q2: float = 1 / math.sqrt(2),
                         max_sites: int = 25, max_entries: int = 60_000_000
                         ) -> SparseGenerator:
    """Generator of the defect pattern on the ``L x L`` dual lattice, even sector.

    Each link joins its two plaquettes i, j and toggles both defects at rate
    ``P^2(B_i + B_j) + h``: creation ``h``, hopping ``q2^2 + h`` and pair
    annihilation ``q1^2 + h``.
    """
    torus = build_torus(2, [L, L])
    n = torus.n_plaquettes
    if n > max_sites:
        raise ValueError(f"{n} dual sites exceed the cap of {max_sites}")
    dim = 1 << (n - 1)
    if dim * (torus.n_links + 1) > max_entries:
        raise ValueError("dual generator would exceed the memory cap")
    model = Model(2, h, q1, q2)
    even, lookup = _even_index(n)
    rows, cols, rates = [], [], []
    cols_all = np.arange(dim, dtype=np.int64)
    for l in range(torus.n_links):
        i, j = (int(x) for x in torus.link_plaquettes[l])
        di = (even >> i) & 1
        dj = (even >> j) & 1
        fld = (1 - 2 * di) + (1 - 2 * dj)
        r = np.where(fld > 0, h, np.where(fld == 0, q2**2 + h, q1**2 + h))
        keep = r > 0
        rows.append(lookup[even[keep] ^ ((1 << i) | (1 << j))])
        cols.append(cols_all[keep])
        rates.append(r[keep])
    G = _assemble(np.concatenate(rows), np.concatenate(cols), np.concatenate(rates), dim)
    return SparseGenerator(G, "dual-even", torus, model)


def lump_to_dual(gen: SparseGenerator) -> SparseGenerator:
    """Lump a full-basis 2d generator onto even defect patterns.

    The result is ``Pi G U`` where ``Pi`` sums over configurations sharing a
    defect pattern and ``U`` spreads uniformly over them; it equals the
    restriction of ``G`` to the sector symmetric under every vertex
    stabilizer and every non-contractible x-loop.
    """
    if gen.basis != "full" or gen.torus.dim != 2:
        raise ValueError("lumping needs a 2d full-basis generator")
    t = gen.torus
    pats = defect_patterns(t)
    _, lookup = _even_index(t.n_plaquettes)
    cls = lookup[pats]
    if np.any(cls < 0):
        raise RuntimeError("odd defect pattern encountered")
    K = 1 << (t.n_plaquettes - 1)
    size = np.bincount(cls, minlength=K).astype(float)
    Pi = sp.csr_matrix((np.ones(gen.dim), (cls, np.arange(gen.dim))), shape=(K, gen.dim))
    U = sp.csr_matrix((1.0 / size[cls], (np.arange(gen.dim), cls)), shape=(gen.dim, K))
    G = (Pi @ gen.matrix @ U).tocsr()
    G.eliminate_zeros()
    return SparseGenerator(G, "dual-even", t, gen.model)


# ---------------------------------------------------------------------------
# spectra


@dataclass
class SpectralReport:
    """Summary of the spectrum near zero.

    Attributes
    ----------
    eigenvalues : ndarray of complex
        Leading eigenvalues sorted by decreasing real part.
    null_dim : int
        Number of steady modes.
    gap : float
        ``min Re(-lambda)`` over the non-steady eigenvalues found (NaN if none).
    splitting : float
        ``max |Re lambda|`` within the steady set.
    tol : float
        Steady-mode threshold on ``Re(-lambda)``.
    method : str
    """

    eigenvalues: np.ndarray
    null_dim: int
    gap: float
    splitting: float
    tol: float
    method: str
    basis_hash: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        ev = np.asarray(self.eigenvalues)
        d["eigenvalues"] = [[float(z.real), float(z.imag)] for z in ev]
        return json.dumps(d, indent=2, sort_keys=True)


def _tol(gen: SparseGenerator, tol: float | None) -> float:
    return 1e-10 * gen.norm_max() if tol is None else float(tol)


def closed_classes(gen: SparseGenerator) -> list[np.ndarray]:
    """Closed communicating classes of the jump graph (sorted state lists).

    Their number equals the dimension of the null space of the generator.
    """
    A = gen.matrix.tocoo()
    off = A.row != A.col
    # Edge source -> target is column -> row.
    g = sp.csr_matrix((np.ones(off.sum()), (A.col[off], A.row[off])), shape=A.shape)
    n_comp, labels = connected_components(g, directed=True, connection="strong")
    leaves = np.ones(n_comp, dtype=bool)
    src = labels[A.col[off]]
    dst = labels[A.row[off]]
    leaves[np.unique(src[src != dst])] = False
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_comp + 1))
    return [np.sort(order[bounds[c]:bounds[c + 1]]) for c in np.flatnonzero(leaves)]


def _class_stationary(M: sp.csr_matrix, tol: float = 1e-14) -> np.ndarray:
    """Stationary vector of an irreducible generator block."""
    m = M.shape[0]
    if m == 1:
        return np.ones(1)
    if m <= DENSE_MAX:
        v = sla.null_space(M.toarray(), rcond=1e-12)
        if v.shape[1] != 1:
            raise np.linalg.LinAlgError("closed class block is not irreducible")
        v = v[:, 0]
    else:
        # Arnoldi on the uniformized transition matrix, eigenvalue 1.
        lam = float(-M.diagonal().min()) * 1.05
        P = sp.identity(m, format="csr") + M / lam
        _, vecs = spla.eigs(P, k=1, which="LM", tol=tol, maxiter=100_000,
                            v0=np.ones(m))
        v = vecs[:, 0].real
        # polish by a few steps of inverse-free refinement on P
        for _ in range(20):
            v = P @ v
    v = v / v.sum()
    v[np.abs(v) < 1e-300] = 0.0
    return v


def steady_space(gen: SparseGenerator, tol: float | None = None, n_eigs: int = 8
                 ) -> tuple[np.ndarray, SpectralReport]:
    """Right steady states and a spectral summary.

    The steady states are returned as the extremal probability vectors, one
    per closed class of the jump graph, which also fixes the null-space
    dimension exactly.  The splitting is measured as the eigenvalues of
    ``G`` compressed to the span of those vectors.  Up to ``n_eigs``
    leading eigenvalues are reported for the gap.
    """
    tol = _tol(gen, tol)
    G = gen.matrix
    classes = closed_classes(gen)
    R = np.zeros((gen.dim, len(classes)))
    for k, c in enumerate(classes):
        R[c, k] = _class_stationary(G[c][:, c].tocsr())
    # compressed operator on span(R): eigenvalues of the steady set
    C = np.linalg.lstsq(R, G @ R, rcond=None)[0]
    steady_ev = np.linalg.eigvals(C)
    splitting = float(np.max(np.abs(steady_ev.real))) if steady_ev.size else 0.0
    ev, method = spectrum(gen, n_eigs=max(n_eigs, len(classes) + 2))
    rest = ev[np.argsort(-ev.real)][len(classes):]
    rest = rest[-rest.real >= tol] if rest.size else rest
    gap = float(np.min(-rest.real)) if rest.size else float("nan")
    report = SpectralReport(
        eigenvalues=ev, null_dim=len(classes), gap=gap, splitting=splitting,
        tol=tol, method=method,
        basis_hash=_hash_array(R),
        extra={"residual": float(np.abs(G @ R).max())},
    )
    return R, report


def _hash_array(a: np.ndarray) -> str:
    import hashlib

    return hashlib.sha256(np.round(np.asarray(a), 12).tobytes()).hexdigest()[:16]


def spectrum(gen: SparseGenerator, n_eigs: int = 8) -> tuple[np.ndarray, str]:
    """Leading eigenvalues (largest real part first).

    Dense for ``dim <= DENSE_MAX``; otherwise Arnoldi on the uniformized
    transition matrix ``I + G / lambda`` whose largest-modulus eigenvalues are
    the ones with largest real part of ``G``.
    """
    if gen.dim <= DENSE_MAX:
        ev = sla.eigvals(gen.matrix.toarray())
        return ev[np.argsort(-ev.real, kind="stable")], "dense"
    lam = float(-gen.matrix.diagonal().min()) * 1.05
    P = sp.identity(gen.dim, format="csr") + gen.matrix / lam
    k = min(n_eigs, gen.dim - 2)
    mu = spla.eigs(P, k=k, which="LM", return_eigenvectors=False, tol=1e-12,
                   maxiter=100_000, ncv=max(2 * k + 1, 40), v0=np.ones(gen.dim))
    ev = lam * (mu - 1.0)
    return ev[np.argsort(-ev.real, kind="stable")], "arnoldi-uniformized"


def left_null_space(gen: SparseGenerator, R: np.ndarray | None = None) -> np.ndarray:
    """Left steady states, dual to the class-supported right steady states.

    Column ``k`` is the probability of eventual absorption in closed class
    ``k`` (so the columns sum to the all-ones covector).
    """
    classes = closed_classes(gen)
    n = gen.dim
    K = len(classes)
    Lm = np.zeros((n, K))
    in_class = np.full(n, -1)
    for k, c in enumerate(classes):
        in_class[c] = k
        Lm[c, k] = 1.0
    trans = np.flatnonzero(in_class < 0)
    if trans.size:
        GT = gen.matrix.T.tocsr()
        A = GT[trans][:, trans].tocsc()
        for k, c in enumerate(classes):
            b = -np.asarray(GT[trans][:, c].sum(axis=1)).ravel()
            if trans.size <= 50_000:
                x = spla.spsolve(A, b)
            else:
                x, info = spla.gmres(A, b, rtol=1e-13, restart=200, maxiter=2000)
                if info != 0:
                    raise np.linalg.LinAlgError("absorption solve did not converge")
            Lm[trans, k] = x
    return Lm


def biorthonormalize(Lm: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Rescale the left basis so that ``Lm.T @ R`` is the identity."""
    M = Lm.T @ R
    return Lm @ np.linalg.inv(M).T


# ---------------------------------------------------------------------------
# XY mapping


def xy_couplings(h: float) -> dict[str, float]:
    """Couplings of the Hermitian XY form of the dual generator.

    ``beta1, beta2 = (h + 1/2) +- sqrt(h (h + 1))``, ``eta`` and ``h_z`` are
    the couplings rescaled by ``2h + 1``.
    """
    if h <= 0:
        raise ValueError("the similarity transform needs h > 0")
    r = math.sqrt(h * (h + 1.0))
    return {
        "beta1": h + 0.5 + r,
        "beta2": h + 0.5 - r,
        "eta": 2.0 * r / (2.0 * h + 1.0),
        "h_z": 2.0 / (2.0 * h + 1.0),
    }


def build_xy_hamiltonian(L: int, h: float, even_only: bool = True) -> np.ndarray:
    """Dense ``H_s = -sum_<ij> (beta1 X_i X_j + beta2 Y_i Y_j) + 2 sum_i Z_i``
    on the dual lattice of the ``L x L`` torus (one bond per link), where
    ``Z_i = 2 n_i - 1`` and ``n_i = 1`` on a defect.
    """
    c = xy_couplings(h)
    torus = build_torus(2, [L, L])
    n = torus.n_plaquettes
    states = np.arange(1 << n, dtype=np.int64)
    if even_only:
        states, lookup = _even_index(n)
    else:
        lookup = states.copy()
    dim = states.size
    H = np.zeros((dim, dim))
    pop = np.zeros(dim, dtype=np.int64)
    for k in range(n):
        pop += (states >> k) & 1
    H[np.arange(dim), np.arange(dim)] = 2.0 * (2 * pop - n)
    for l in range(torus.n_links):
        i, j = (int(x) for x in torus.link_plaquettes[l])
        same = ((states >> i) & 1) == ((states >> j) & 1)
        # XX + YY flips both spins: -(b1 - b2) when aligned, -(b1 + b2) when not
        amp = np.where(same, -(c["beta1"] - c["beta2"]), -(c["beta1"] + c["beta2"]))
        tgt = lookup[states ^ ((1 << i) | (1 << j))]
        np.add.at(H, (tgt, np.arange(dim)), amp)
    return H


def xy_spectrum_check(L: int, h: float) -> dict[str, float]:
    """Compare the spectrum of ``-G_dual`` with the XY Hamiltonian.

    The similarity transform ``S = beta^(-N/2)`` symmetrizes ``-G_dual`` into
    ``H_s / 2`` plus a constant, so the comparison is between
    ``eig(-G_dual)`` and ``eig(H_s) / 2`` after aligning the lowest levels.
    """
    if h <= 0:
        raise ValueError("the similarity transform needs h > 0")
    G = build_generator_dual(L, h).matrix.toarray()
    ev_g = np.sort(np.linalg.eigvals(-G).real)
    ev_h = np.sort(np.linalg.eigvalsh(build_xy_hamiltonian(L, h))) / 2.0
    shift = ev_g[0] - ev_h[0]
    mismatch = float(np.max(np.abs(ev_g - (ev_h + shift))))
    imag = float(np.max(np.abs(np.linalg.eigvals(-G).imag)))
    return {"mismatch": mismatch, "shift": float(shift), "max_imag": imag,
            "dim": float(ev_g.size)}
