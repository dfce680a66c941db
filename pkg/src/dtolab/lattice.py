"""Periodic square and cubic lattices with spins on links.

Index conventions
-----------------
Sites are flattened with the x coordinate running fastest::

    site = x + Lx * (y + Ly * z)

A link is identified by the site at its lower end and its axis::

    link = axis * n_sites + site

so link ``axis * n_sites + s`` joins ``s`` and ``s + e_axis``.

Plaquettes carry the index of their normal axis.  In 2d there is a single
orientation (normal along the fictitious z axis) and ``plaquette = site``.
In 3d ``plaquette = normal * n_sites + site`` and the plaquette spans the two
axes other than ``normal`` starting from corner ``site``.

The dual lattice has a site at every plaquette centre (2d) or cube centre
(3d, cube ``s`` has lower corner ``s``).  A 3d plaquette with normal ``a`` at
site ``s`` is the face shared by cubes ``s - e_a`` and ``s``, so it is crossed
by the dual edge ``(s - e_a) -> s`` along ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numba as nb
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Torus",
    "LoopSpec",
    "RegionCounts",
    "PartitionSpec",
    "build_torus",
    "incident_plaquettes",
    "star_links",
    "boundary_links",
    "rectangular_loop",
    "straight_loop",
    "build_partition",
    "region_counts",
    "plaquette_region",
    "vertex_star_region",
    "edges_wrap",
    "region_wraps",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Torus:
    """Immutable periodic lattice geometry.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    extents : tuple of int
        Linear sizes along each axis, each at least 2.

    Notes
    -----
    All incidence tables are precomputed int64 arrays marked read-only so
    the object can be shared freely between threads and numba kernels.
    """

    dim: int
    extents: tuple[int, ...]
    n_sites: int = field(init=False)
    n_links: int = field(init=False)
    n_plaquettes: int = field(init=False)
    link_plaquettes: np.ndarray = field(init=False, repr=False)
    plaquette_links: np.ndarray = field(init=False, repr=False)
    vertex_links: np.ndarray = field(init=False, repr=False)
    link_vertices: np.ndarray = field(init=False, repr=False)
    cube_plaquettes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        ext = tuple(int(e) for e in self.extents)
        if len(ext) != self.dim:
            raise ValueError(f"expected {self.dim} extents, got {len(ext)}")
        if min(ext) < 2:
            raise ValueError(f"every extent must be >= 2, got {ext}")
        object.__setattr__(self, "extents", ext)
        n = int(np.prod(ext))
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "n_links", self.dim * n)
        n_plaq = n if self.dim == 2 else 3 * n
        object.__setattr__(self, "n_plaquettes", n_plaq)

        sites = np.arange(n)
        coords = self.site_coords(sites)

        def shift(axis: int, step: int) -> np.ndarray:
            c = coords.copy()
            c[:, axis] = (c[:, axis] + step) % ext[axis]
            return self.site_index(c)

        up = [shift(a, 1) for a in range(self.dim)]
        down = [shift(a, -1) for a in range(self.dim)]

        link_vertices = np.empty((self.n_links, 2), dtype=np.int64)
        for a in range(self.dim):
            link_vertices[a * n:(a + 1) * n, 0] = sites
            link_vertices[a * n:(a + 1) * n, 1] = up[a]

        vertex_links = np.empty((n, 2 * self.dim), dtype=np.int64)
        for a in range(self.dim):
            vertex_links[:, 2 * a] = a * n + sites
            vertex_links[:, 2 * a + 1] = a * n + down[a]

        if self.dim == 2:
            # Plaquette at s: (s,x), (s+ex,y), (s+ey,x), (s,y), counterclockwise.
            plaquette_links = np.stack(
                [sites, n + up[0], up[1], n + sites], axis=1
            )
            link_plaquettes = np.empty((self.n_links, 2), dtype=np.int64)
            link_plaquettes[:n, 0] = sites
            link_plaquettes[:n, 1] = down[1]
            link_plaquettes[n:, 0] = sites
            link_plaquettes[n:, 1] = down[0]
            cube_plaquettes = np.empty((0, 6), dtype=np.int64)
        else:
            plaquette_links = np.empty((n_plaq, 4), dtype=np.int64)
            link_plaquettes = np.empty((self.n_links, 4), dtype=np.int64)
            for normal in range(3):
                b, c = [a for a in range(3) if a != normal]
                rows = slice(normal * n, (normal + 1) * n)
                plaquette_links[rows] = np.stack(
                    [b * n + sites, c * n + up[b], b * n + up[c], c * n + sites],
                    axis=1,
                )
            for a in range(3):
                others = [b for b in range(3) if b != a]
                cols = []
                for c in others:
                    normal = 3 - a - c
                    cols.append(normal * n + sites)
                    cols.append(normal * n + down[c])
                link_plaquettes[a * n:(a + 1) * n] = np.stack(cols, axis=1)
            # Faces of cube s: for each normal a, the plaquettes at s and s+e_a.
            cube_plaquettes = np.stack(
                [a * n + s for a in range(3) for s in (sites, up[a])], axis=1
            )

        object.__setattr__(self, "link_vertices", _readonly(link_vertices))
        object.__setattr__(self, "vertex_links", _readonly(vertex_links))
        object.__setattr__(self, "plaquette_links", _readonly(plaquette_links))
        object.__setattr__(self, "link_plaquettes", _readonly(link_plaquettes))
        object.__setattr__(self, "cube_plaquettes", _readonly(cube_plaquettes))

    # -- coordinates -------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.n_sites

    def site_index(self, coords) -> np.ndarray | int:
        """Flatten coordinates (last axis = components), applying periodicity."""
        c = np.asarray(coords, dtype=np.int64)
        idx = np.zeros(c.shape[:-1], dtype=np.int64)
        stride = 1
        for a, L in enumerate(self.extents):
            idx = idx + (c[..., a] % L) * stride
            stride *= L
        return int(idx) if idx.ndim == 0 else idx

    def site_coords(self, site) -> np.ndarray:
        s = np.asarray(site, dtype=np.int64)
        out = np.empty(s.shape + (self.dim,), dtype=np.int64)
        rem = s.copy()
        for a, L in enumerate(self.extents):
            out[..., a] = rem % L
            rem = rem // L
        return out

    def link_index(self, coords, axis: int) -> int:
        return int(axis) * self.n_sites + int(self.site_index(coords))

    def link_axis_site(self, link: int) -> tuple[int, int]:
        self.check_link(link)
        return int(link) // self.n_sites, int(link) % self.n_sites

    def plaquette_index(self, coords, normal: int | None = None) -> int:
        s = int(self.site_index(coords))
        if self.dim == 2:
            return s
        if normal is None:
            raise ValueError("3d plaquettes need a normal axis")
        return int(normal) * self.n_sites + s

    # -- validation --------------------------------------------------------
    def check_link(self, link: int) -> None:
        if not 0 <= int(link) < self.n_links:
            raise IndexError(f"link {link} out of range [0, {self.n_links})")

    def check_vertex(self, v: int) -> None:
        if not 0 <= int(v) < self.n_sites:
            raise IndexError(f"vertex {v} out of range [0, {self.n_sites})")

    def check_plaquette(self, p: int) -> None:
        if not 0 <= int(p) < self.n_plaquettes:
            raise IndexError(f"plaquette {p} out of range [0, {self.n_plaquettes})")

    def __repr__(self) -> str:
        return f"Torus(dim={self.dim}, extents={self.extents})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Torus) and other.extents == self.extents

    def __hash__(self) -> int:
        return hash(self.extents)


def build_torus(dim: int, extents: Sequence[int]) -> Torus:
    """Build a periodic lattice.

    Examples
    --------
    >>> t = build_torus(2, [3, 3])
    >>> t.n_vertices, t.n_links, t.n_plaquettes
    (9, 18, 9)
    """
    return Torus(int(dim), tuple(int(e) for e in extents))


def incident_plaquettes(torus: Torus, link: int) -> np.ndarray:
    """Plaquettes whose boundary contains ``link`` (2 in 2d, 4 in 3d).

    On extent-2 axes the two entries may coincide; the multiset is what the
    local field sums over.
    """
    torus.check_link(link)
    return torus.link_plaquettes[int(link)].copy()


def star_links(torus: Torus, vertex: int) -> np.ndarray:
    torus.check_vertex(vertex)
    return torus.vertex_links[int(vertex)].copy()


def boundary_links(torus: Torus, plaquette: int) -> np.ndarray:
    torus.check_plaquette(plaquette)
    return torus.plaquette_links[int(plaquette)].copy()


# ---------------------------------------------------------------------------
# loops


@dataclass(frozen=True)
class LoopSpec:
    """A closed lattice loop given as an ordered list of links.

    ``area`` is the number of enclosed plaquettes for rectangles and 0 for
    straight non-contractible loops.
    """

    torus: Torus
    links: tuple[int, ...]
    kind: str
    area: int
    axes: tuple[int, ...] = ()
    widths: tuple[int, ...] = ()
    corner: tuple[int, ...] = ()

    @property
    def perimeter(self) -> int:
        return len(self.links)

    @property
    def link_array(self) -> np.ndarray:
        return np.asarray(self.links, dtype=np.int64)


def rectangular_loop(
    torus: Torus,
    corner: Sequence[int],
    widths: Sequence[int],
    axes: Sequence[int] = (0, 1),
) -> LoopSpec:
    """Contractible rectangle with lower-left ``corner`` in the plane ``axes``.

    Widths must be strictly smaller than the extents so the rectangle does not
    wrap into a cylinder.
    """
    a, b = (int(x) for x in axes)
    if a == b or not (0 <= a < torus.dim and 0 <= b < torus.dim):
        raise ValueError(f"invalid plane axes {axes}")
    w, h = (int(x) for x in widths)
    if w < 1 or h < 1:
        raise ValueError("widths must be positive")
    if w >= torus.extents[a] or h >= torus.extents[b]:
        raise ValueError(
            f"widths {widths} do not fit a contractible rectangle in {torus.extents}"
        )
    c0 = np.asarray(corner, dtype=np.int64)
    if c0.shape != (torus.dim,):
        raise ValueError("corner must have one coordinate per axis")
    ea = np.eye(torus.dim, dtype=np.int64)[a]
    eb = np.eye(torus.dim, dtype=np.int64)[b]
    links = []
    links += [torus.link_index(c0 + i * ea, a) for i in range(w)]
    links += [torus.link_index(c0 + w * ea + j * eb, b) for j in range(h)]
    links += [torus.link_index(c0 + h * eb + i * ea, a) for i in reversed(range(w))]
    links += [torus.link_index(c0 + j * eb, b) for j in reversed(range(h))]
    return LoopSpec(
        torus, tuple(links), "contractible-rectangle", w * h,
        axes=(a, b), widths=(w, h), corner=tuple(int(x) for x in c0 % torus.extents),
    )


def straight_loop(torus: Torus, axis: int, offset: int | Sequence[int] = 0) -> LoopSpec:
    """Non-contractible straight loop along ``axis``.

    ``offset`` gives the transverse coordinates: an int in 2d, an int or a
    pair (ordered by increasing axis) in 3d.
    """
    axis = int(axis)
    if not 0 <= axis < torus.dim:
        raise ValueError(f"invalid axis {axis}")
    others = [a for a in range(torus.dim) if a != axis]
    off = np.atleast_1d(np.asarray(offset, dtype=np.int64))
    if off.size == 1 and len(others) > 1:
        off = np.repeat(off, len(others))
    if off.size != len(others):
        raise ValueError("offset has the wrong number of components")
    for o, a in zip(off, others):
        if not 0 <= o < torus.extents[a]:
            raise ValueError(f"offset {o} outside extent {torus.extents[a]}")
    c = np.zeros(torus.dim, dtype=np.int64)
    c[others] = off
    e = np.eye(torus.dim, dtype=np.int64)[axis]
    links = tuple(torus.link_index(c + i * e, axis) for i in range(torus.extents[axis]))
    return LoopSpec(torus, links, "straight-noncontractible", 0, axes=(axis,),
                    corner=tuple(int(x) for x in c))


# ---------------------------------------------------------------------------
# regions and partitions


@dataclass(frozen=True)
class RegionCounts:
    """Counts entering the subsystem entropy formulas.

    Attributes
    ----------
    inside : int
        ``|A|``, vertices whose whole star lies in A.
    boundary : int
        ``|∂A|``, vertices with star links both in and out of A.
    outside : int
        ``|Ā|``, vertices whose whole star lies outside A.
    m : int
        Plaquettes whose whole boundary lies in A (``m_A``, also ``m_p``).
    p : int
        Connected components of A (links joined through shared vertices).
    p_bar : int
        Connected components of the complement.
    m_v : int
        Vertex analogue of ``m`` for e particles; equals ``inside``.
    n_links : int
        Number of links in A.
    wraps : bool
        Whether A contains a non-contractible cycle.  The closed-form
        entropies assume it does not.
    """

    inside: int
    boundary: int
    outside: int
    m: int
    p: int
    p_bar: int
    m_v: int
    n_links: int
    wraps: bool = False


@nb.njit(cache=True, nogil=True)
def _find(parent, off, x, dim):
    # Root of x plus the lift of x relative to that root; compresses the path.
    root = x
    while parent[root] != root:
        root = parent[root]
    # second pass: accumulate offsets from x up to root, then rewrite
    acc = np.zeros(dim, dtype=np.int64)
    y = x
    while parent[y] != y:
        for a in range(dim):
            acc[a] += off[y, a]
        y = parent[y]
    y = x
    rem = acc.copy()
    while parent[y] != y:
        nxt = parent[y]
        step = off[y].copy()
        for a in range(dim):
            off[y, a] = rem[a]
            rem[a] -= step[a]
        parent[y] = root
        y = nxt
    return root, acc


@nb.njit(cache=True, nogil=True)
def edges_wrap(n_nodes, tail, head, axis, dim):
    """True if the graph of unit edges ``tail -> head`` (step +1 along
    ``axis``) has a cycle with nonzero lift, i.e. a non-contractible cycle.

    Union-find carrying the lifted displacement of every node relative to its
    root; an edge closing a cycle with a lift mismatch signals wrapping.
    """
    parent = np.arange(n_nodes)
    off = np.zeros((n_nodes, dim), dtype=np.int64)
    for k in range(tail.shape[0]):
        ru, ou = _find(parent, off, tail[k], dim)
        rv, ov = _find(parent, off, head[k], dim)
        ou[axis[k]] += 1
        if ru == rv:
            for a in range(dim):
                if ou[a] != ov[a]:
                    return True
        else:
            parent[rv] = ru
            for a in range(dim):
                off[rv, a] = ou[a] - ov[a]
    return False


def region_wraps(torus: Torus, links) -> bool:
    """Whether the link region contains a cycle that winds around the torus."""
    mask = _as_mask(torus, links)
    ids = np.flatnonzero(mask)
    return bool(edges_wrap(
        torus.n_sites,
        torus.link_vertices[ids, 0].copy(),
        torus.link_vertices[ids, 1].copy(),
        ids // torus.n_sites,
        torus.dim,
    ))


def _components(torus: Torus, mask: np.ndarray) -> int:
    links = np.flatnonzero(mask)
    if links.size == 0:
        return 0
    # Bipartite link-vertex graph; components containing a link are counted.
    rows = np.repeat(links, 2)
    cols = torus.n_links + torus.link_vertices[links].ravel()
    size = torus.n_links + torus.n_sites
    g = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(size, size))
    _, labels = connected_components(g, directed=False)
    return int(np.unique(labels[links]).size)


def _as_mask(torus: Torus, links: Iterable[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(links)
    if arr.dtype == bool:
        if arr.shape != (torus.n_links,):
            raise ValueError("boolean mask has the wrong length")
        return arr.copy()
    mask = np.zeros(torus.n_links, dtype=bool)
    idx = np.asarray(list(arr.ravel()), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= torus.n_links):
        raise IndexError("region contains invalid link ids")
    mask[idx] = True
    return mask


def region_counts(torus: Torus, links) -> RegionCounts:
    """Compute the partition counts of a link region and its complement."""
    mask = _as_mask(torus, links)
    star_in = mask[torus.vertex_links].sum(axis=1)
    deg = torus.vertex_links.shape[1]
    inside = int(np.count_nonzero(star_in == deg))
    outside = int(np.count_nonzero(star_in == 0))
    m = int(np.count_nonzero(mask[torus.plaquette_links].all(axis=1)))
    return RegionCounts(
        inside=inside,
        boundary=torus.n_sites - inside - outside,
        outside=outside,
        m=m,
        p=_components(torus, mask),
        p_bar=_components(torus, ~mask),
        m_v=inside,
        n_links=int(mask.sum()),
        wraps=region_wraps(torus, mask),
    )


@dataclass(frozen=True, eq=False)
class PartitionSpec:
    """Named disjoint link regions on a torus.

    The complement of the union of all regions is available under the name
    ``"rest"`` when nonempty.
    """

    torus: Torus
    masks: Mapping[str, np.ndarray]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.masks)

    def mask(self, *names: str) -> np.ndarray:
        out = np.zeros(self.torus.n_links, dtype=bool)
        for nm in names:
            if nm == "rest":
                out |= ~self.union_mask()
            else:
                out |= self.masks[nm]
        return out

    def union_mask(self) -> np.ndarray:
        out = np.zeros(self.torus.n_links, dtype=bool)
        for m in self.masks.values():
            out |= m
        return out

    def links(self, *names: str) -> np.ndarray:
        return np.flatnonzero(self.mask(*names))

    def counts(self, *names: str) -> RegionCounts:
        """Counts for the union of the named regions (default: first region)."""
        if not names:
            names = (self.names[0],)
        return region_counts(self.torus, self.mask(*names))


def build_partition(torus: Torus, regions) -> PartitionSpec:
    """Build a partition from named (or positional) link sets.

    Parameters
    ----------
    regions : mapping or sequence
        Link id collections or boolean masks.  Positional regions are named
        ``"A"``, ``"B"``, ``"C"``, ...

    Raises
    ------
    ValueError
        If two regions share a link.
    """
    if not isinstance(regions, Mapping):
        regions = {chr(ord("A") + i): r for i, r in enumerate(regions)}
    masks: dict[str, np.ndarray] = {}
    seen = np.zeros(torus.n_links, dtype=bool)
    for name, links in regions.items():
        m = _as_mask(torus, links)
        if np.any(seen & m):
            raise ValueError(f"region {name!r} overlaps a previous region")
        seen |= m
        m.setflags(write=False)
        masks[str(name)] = m
    return PartitionSpec(torus, masks)


def plaquette_region(torus: Torus, plaquettes: Iterable[int]) -> np.ndarray:
    """Union of the boundary links of the given plaquettes, as sorted ids."""
    ps = np.asarray(list(plaquettes), dtype=np.int64)
    for p in ps:
        torus.check_plaquette(p)
    return np.unique(torus.plaquette_links[ps].ravel())


def vertex_star_region(torus: Torus, vertices: Iterable[int]) -> np.ndarray:
    """Union of the star links of the given vertices, as sorted ids.

    Taking whole stars puts every boundary-crossing link in the region.
    """
    vs = np.asarray(list(vertices), dtype=np.int64)
    for v in vs:
        torus.check_vertex(v)
    return np.unique(torus.vertex_links[vs].ravel())
