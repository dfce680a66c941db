"""Spin configurations in the sigma^z basis, defects and sector diagnostics.

A configuration stores one byte per link (0 for sigma^z = +1, 1 for -1) and
an incrementally maintained cache of plaquette values ``B_p`` in {+1, -1}.
Byte storage is used in memory because numba kernels index it directly;
snapshots are bit-packed (see :meth:`SpinConfig.to_hex`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from .lattice import Torus, edges_wrap, straight_loop

__all__ = [
    "SpinConfig",
    "DefectSet",
    "all_up",
    "flip_link",
    "spin",
    "local_field",
    "plaquette_values",
    "defects",
    "apply_vertex_stabilizer",
    "apply_x_string",
    "apply_logical",
    "sector_parity",
    "winding_parity",
    "has_noncontractible_defect_loop",
    "build_typeB_strip",
    "build_square_patch",
    "random_config",
    "loop_product",
]


@nb.njit(cache=True, nogil=True)
def _plaquette_values(bits, plaquette_links):
    n = plaquette_links.shape[0]
    out = np.empty(n, dtype=np.int8)
    for p in range(n):
        par = 0
        for k in range(plaquette_links.shape[1]):
            par ^= bits[plaquette_links[p, k]]
        out[p] = 1 - 2 * par
    return out


@nb.njit(cache=True, nogil=True)
def _flip(bits, plaq, link_plaquettes, link):
    """Flip a link, update the plaquette cache, return the defect-count change."""
    bits[link] ^= 1
    delta = 0
    for k in range(link_plaquettes.shape[1]):
        p = link_plaquettes[link, k]
        plaq[p] = -plaq[p]
        delta -= plaq[p]
    return delta


@nb.njit(cache=True, nogil=True)
def _loop_product(bits, links):
    par = 0
    for k in range(links.shape[0]):
        par ^= bits[links[k]]
    return 1 - 2 * par


@nb.njit(cache=True, nogil=True)
def _defect_wraps(plaq, n_sites, ext0, ext1, ext2):
    # Dual edge for a negative plaquette (normal a, site s): (s - e_a) -> s.
    n_def = 0
    for p in range(plaq.shape[0]):
        if plaq[p] < 0:
            n_def += 1
    tail = np.empty(n_def, dtype=np.int64)
    head = np.empty(n_def, dtype=np.int64)
    axis = np.empty(n_def, dtype=np.int64)
    ext = (ext0, ext1, ext2)
    k = 0
    for p in range(plaq.shape[0]):
        if plaq[p] < 0:
            a = p // n_sites
            s = p % n_sites
            x = s % ext0
            y = (s // ext0) % ext1
            z = s // (ext0 * ext1)
            if a == 0:
                x = (x - 1 + ext0) % ext0
            elif a == 1:
                y = (y - 1 + ext1) % ext1
            else:
                z = (z - 1 + ext2) % ext2
            tail[k] = x + ext[0] * (y + ext[1] * z)
            head[k] = s
            axis[k] = a
            k += 1
    return edges_wrap(n_sites, tail, head, axis, 3)


@dataclass(frozen=True)
class DefectSet:
    """Plaquettes with ``B_p = -1``.

    ``p_tot`` is the defect count; in 3d it is the total length of the
    defect loops on the dual lattice.
    """

    plaquettes: np.ndarray

    @property
    def p_tot(self) -> int:
        return int(self.plaquettes.size)

    def __len__(self) -> int:
        return self.p_tot


class SpinConfig:
    """Link spins plus cached plaquette values.

    Parameters
    ----------
    torus : Torus
    bits : array_like of uint8, optional
        One entry per link, 1 meaning sigma^z = -1.  Defaults to all up.
    """

    __slots__ = ("torus", "bits", "plaq", "n_defects")

    def __init__(self, torus: Torus, bits=None):
        self.torus = torus
        if bits is None:
            self.bits = np.zeros(torus.n_links, dtype=np.uint8)
        else:
            b = np.asarray(bits)
            if b.shape != (torus.n_links,):
                raise ValueError("bits must have one entry per link")
            self.bits = np.ascontiguousarray(b, dtype=np.uint8) & 1
        self.refresh()

    def refresh(self) -> None:
        """Recompute the plaquette cache from scratch."""
        self.plaq = _plaquette_values(self.bits, self.torus.plaquette_links)
        self.n_defects = int(np.count_nonzero(self.plaq < 0))

    def copy(self) -> "SpinConfig":
        out = SpinConfig.__new__(SpinConfig)
        out.torus = self.torus
        out.bits = self.bits.copy()
        out.plaq = self.plaq.copy()
        out.n_defects = self.n_defects
        return out

    @property
    def sigma(self) -> np.ndarray:
        return 1 - 2 * self.bits.astype(np.int8)

    def cache_ok(self) -> bool:
        fresh = _plaquette_values(self.bits, self.torus.plaquette_links)
        return bool(np.array_equal(fresh, self.plaq)
                    and self.n_defects == int(np.count_nonzero(fresh < 0)))

    def cube_products(self) -> np.ndarray:
        """Product of the six face values of every elementary cube (3d)."""
        if self.torus.dim != 3:
            raise ValueError("cube products are defined in 3d only")
        return np.prod(self.plaq[self.torus.cube_plaquettes], axis=1)

    # -- serialization ------------------------------------------------------
    def to_hex(self) -> str:
        """``"<dim>d:<Lx>x<Ly>[x<Lz>]:<hex>"`` with link bits packed little-endian."""
        ext = "x".join(str(e) for e in self.torus.extents)
        packed = np.packbits(self.bits, bitorder="little")
        return f"{self.torus.dim}d:{ext}:{packed.tobytes().hex()}"

    @classmethod
    def from_hex(cls, text: str, torus: Torus | None = None) -> "SpinConfig":
        from .lattice import build_torus

        head, ext, payload = text.strip().split(":")
        dim = int(head.rstrip("d"))
        extents = [int(e) for e in ext.split("x")]
        if torus is None:
            torus = build_torus(dim, extents)
        elif list(torus.extents) != extents:
            raise ValueError("snapshot extents do not match the torus")
        raw = np.frombuffer(bytes.fromhex(payload), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: torus.n_links]
        return cls(torus, bits)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SpinConfig) and other.torus == self.torus
                and np.array_equal(other.bits, self.bits))

    def __repr__(self) -> str:
        return f"SpinConfig({self.torus!r}, defects={self.n_defects})"


def all_up(torus: Torus) -> SpinConfig:
    """The reference configuration with every sigma^z = +1."""
    return SpinConfig(torus)


def random_config(torus: Torus, rng: np.random.Generator) -> SpinConfig:
    """Independent fair coin on every link."""
    return SpinConfig(torus, rng.integers(0, 2, torus.n_links, dtype=np.uint8))


def flip_link(cfg: SpinConfig, link: int) -> int:
    """Flip one link in place; returns the change in defect count."""
    cfg.torus.check_link(link)
    d = _flip(cfg.bits, cfg.plaq, cfg.torus.link_plaquettes, int(link))
    cfg.n_defects += d
    return d


def spin(cfg: SpinConfig, link: int) -> int:
    cfg.torus.check_link(link)
    return 1 - 2 * int(cfg.bits[int(link)])


def local_field(cfg: SpinConfig, link: int) -> int:
    """Sum of the plaquette values around ``link`` (multiset on extent 2)."""
    cfg.torus.check_link(link)
    return int(cfg.plaq[cfg.torus.link_plaquettes[int(link)]].sum())


def plaquette_values(cfg: SpinConfig) -> np.ndarray:
    return cfg.plaq.copy()


def defects(cfg: SpinConfig) -> DefectSet:
    return DefectSet(np.flatnonzero(cfg.plaq < 0))


def loop_product(cfg: SpinConfig, links) -> int:
    """Product of sigma^z over the given links."""
    return int(_loop_product(cfg.bits, np.asarray(links, dtype=np.int64)))


def _flip_many(cfg: SpinConfig, links) -> None:
    lp = cfg.torus.link_plaquettes
    for l in np.asarray(links, dtype=np.int64).ravel():
        cfg.n_defects += _flip(cfg.bits, cfg.plaq, lp, int(l))


def apply_vertex_stabilizer(cfg: SpinConfig, vertex: int) -> None:
    """Apply A_v: flip every link of the star of ``vertex``."""
    cfg.torus.check_vertex(vertex)
    _flip_many(cfg, cfg.torus.vertex_links[int(vertex)])


def apply_x_string(cfg: SpinConfig, dual_path: Sequence[int]) -> None:
    """Flip the links crossed by an open dual path of plaquettes (2d).

    Consecutive plaquettes must share exactly one link; the string creates
    or moves defects at its two ends only.
    """
    t = cfg.torus
    if t.dim != 2:
        raise ValueError("x strings are defined on 2d tori")
    path = [int(p) for p in dual_path]
    for p in path:
        t.check_plaquette(p)
    links = []
    for p, q in zip(path[:-1], path[1:]):
        shared = np.intersect1d(t.plaquette_links[p], t.plaquette_links[q])
        if shared.size != 1:
            raise ValueError(f"plaquettes {p} and {q} are not dual neighbours")
        links.append(int(shared[0]))
    _flip_many(cfg, links)


def logical_links(torus: Torus, kind: str, axis, offset: int = 0) -> np.ndarray:
    """Links flipped by a non-contractible x-type operator.

    ``kind="W"`` (2d): dual loop running along ``axis``; it crosses the links
    of the other axis sitting at transverse coordinate ``offset``.
    ``kind="V"`` (3d): membrane in the plane ``axis = (a, b)``; it crosses
    every link along the third axis at that axis' coordinate ``offset``.
    """
    n = torus.n_sites
    coords = torus.site_coords(np.arange(n))
    if kind in ("W", "W-dual-loop"):
        if torus.dim != 2:
            raise ValueError("W dual loops live on 2d tori")
        a = int(axis)
        if a not in (0, 1):
            raise ValueError(f"invalid axis {axis}")
        b = 1 - a
        sites = np.flatnonzero(coords[:, b] == offset % torus.extents[b])
        return b * n + sites
    if kind in ("V", "V-membrane"):
        if torus.dim != 3:
            raise ValueError("V membranes live on 3d tori")
        a, b = (int(x) for x in axis)
        if a == b or not {a, b} <= {0, 1, 2}:
            raise ValueError(f"invalid plane {axis}")
        c = 3 - a - b
        sites = np.flatnonzero(coords[:, c] == offset % torus.extents[c])
        return c * n + sites
    raise ValueError(f"unknown logical operator kind {kind!r}")


def apply_logical(cfg: SpinConfig, kind: str, axis, offset: int = 0) -> None:
    """Apply a W dual loop (2d) or V membrane (3d); no plaquette changes."""
    _flip_many(cfg, logical_links(cfg.torus, kind, axis, offset))


def sector_parity(cfg: SpinConfig, axis: int, offset=0) -> int:
    """Product of sigma^z along the straight loop along ``axis``."""
    return loop_product(cfg, straight_loop(cfg.torus, axis, offset).links)


def winding_parity(cfg: SpinConfig, axis: int, slice_index: int = 0) -> int:
    """Parity of defect plaquettes normal to ``axis`` in one transverse slice (3d).

    These are the dual edges along ``axis`` crossing the plane between dual
    layers ``slice_index - 1`` and ``slice_index``.
    """
    t = cfg.torus
    if t.dim != 3:
        raise ValueError("winding parity is defined for 3d configurations")
    axis = int(axis)
    n = t.n_sites
    coords = t.site_coords(np.arange(n))
    sites = np.flatnonzero(coords[:, axis] == slice_index % t.extents[axis])
    return int(np.count_nonzero(cfg.plaq[axis * n + sites] < 0) % 2)


def has_noncontractible_defect_loop(cfg: SpinConfig) -> bool:
    """Whether some defect loop winds around the 3d torus."""
    t = cfg.torus
    if t.dim != 3:
        raise ValueError("defect loops are defined for 3d configurations")
    return bool(_defect_wraps(cfg.plaq, t.n_sites, *t.extents))


def build_typeB_strip(torus: Torus, plane=(0, 1), width: int | None = None,
                      offset: int = 0) -> SpinConfig:
    """Open membrane spanning axis ``plane[0]`` with ``width`` rows along ``plane[1]``.

    Its boundary is two non-contractible defect loops along ``plane[0]``.
    ``width`` equal to the extent closes the membrane (no defects).
    """
    if torus.dim != 3:
        raise ValueError("type-B strips are 3d states")
    a, b = (int(x) for x in plane)
    if a == b or not {a, b} <= {0, 1, 2}:
        raise ValueError(f"invalid plane {plane}")
    Lb = torus.extents[b]
    if width is None:
        width = Lb // 2
    if not 1 <= width <= Lb:
        raise ValueError(f"width must be in [1, {Lb}], got {width}")
    c = 3 - a - b
    coords = torus.site_coords(np.arange(torus.n_sites))
    sel = (coords[:, c] == offset % torus.extents[c]) & (coords[:, b] < width)
    bits = np.zeros(torus.n_links, dtype=np.uint8)
    bits[c * torus.n_sites + np.flatnonzero(sel)] = 1
    return SpinConfig(torus, bits)


def build_square_patch(torus: Torus, R: int, plane=(0, 1), offset: int = 0) -> SpinConfig:
    """Square membrane of R x R links; its boundary is one loop of length 4R."""
    if torus.dim != 3:
        raise ValueError("square patches are 3d states")
    a, b = (int(x) for x in plane)
    if R < 0 or R >= min(torus.extents[a], torus.extents[b]):
        raise ValueError(f"patch size {R} does not fit a contractible square")
    c = 3 - a - b
    coords = torus.site_coords(np.arange(torus.n_sites))
    sel = (coords[:, c] == offset % torus.extents[c]) & (coords[:, a] < R) & (coords[:, b] < R)
    bits = np.zeros(torus.n_links, dtype=np.uint8)
    bits[c * torus.n_sites + np.flatnonzero(sel)] = 1
    return SpinConfig(torus, bits)
