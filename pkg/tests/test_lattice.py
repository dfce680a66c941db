import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtolab.lattice import (
    build_partition,
    build_torus,
    edges_wrap,
    plaquette_region,
    rectangular_loop,
    region_counts,
    region_wraps,
    star_links,
    straight_loop,
    vertex_star_region,
)

sizes2 = st.tuples(st.integers(2, 6), st.integers(2, 6))
sizes3 = st.tuples(st.integers(2, 4), st.integers(2, 4), st.integers(2, 4))


@pytest.mark.parametrize("dim,ext", [(2, (3, 4)), (3, (2, 3, 4))])
def test_table_sizes(dim, ext):
    t = build_torus(dim, ext)
    n = int(np.prod(ext))
    assert t.n_sites == n
    assert t.n_links == dim * n
    assert t.n_plaquettes == (n if dim == 2 else 3 * n)
    assert t.vertex_links.shape == (n, 2 * dim)
    assert t.link_plaquettes.shape == (t.n_links, 2 * (dim - 1))
    assert t.plaquette_links.shape == (t.n_plaquettes, 4)


@given(sizes2)
def test_link_plaquette_incidence_is_symmetric_2d(ext):
    t = build_torus(2, ext)
    for p in range(t.n_plaquettes):
        for l in t.plaquette_links[p]:
            assert p in t.link_plaquettes[l]
    assert np.bincount(t.plaquette_links.ravel(), minlength=t.n_links).tolist() == [2] * t.n_links


@settings(max_examples=20)
@given(sizes3)
def test_link_plaquette_incidence_is_symmetric_3d(ext):
    t = build_torus(3, ext)
    counts = np.bincount(t.plaquette_links.ravel(), minlength=t.n_links)
    assert np.all(counts == 4)
    for p in range(t.n_plaquettes):
        for l in t.plaquette_links[p]:
            assert p in t.link_plaquettes[l]


@given(sizes2)
def test_every_link_touches_two_vertices(ext):
    t = build_torus(2, ext)
    assert np.all(np.bincount(t.vertex_links.ravel(), minlength=t.n_links) == 2)
    for l in range(t.n_links):
        a, b = t.link_vertices[l]
        assert l in t.vertex_links[a] and l in t.vertex_links[b]


def test_tables_are_read_only():
    t = build_torus(2, (3, 3))
    with pytest.raises(ValueError):
        t.vertex_links[0, 0] = 5


def test_plaquette_boundary_is_a_closed_loop():
    t = build_torus(3, (3, 3, 3))
    # every vertex of a plaquette boundary has even degree within it
    for p in range(t.n_plaquettes):
        ends = t.link_vertices[t.plaquette_links[p]].ravel()
        assert np.all(np.bincount(ends) % 2 == 0)


def test_cube_faces_cover_each_edge_twice():
    t = build_torus(3, (3, 3, 3))
    for c in range(t.n_sites):
        links = t.plaquette_links[t.cube_plaquettes[c]].ravel()
        assert np.all(np.bincount(links) % 2 == 0)


def test_invalid_sizes_rejected():
    with pytest.raises(ValueError):
        build_torus(2, (1, 3))
    with pytest.raises(ValueError):
        build_torus(4, (2, 2, 2, 2))


@given(sizes2, st.data())
def test_rectangle_loop_shape(ext, data):
    t = build_torus(2, ext)
    w = data.draw(st.integers(1, ext[0] - 1))
    h = data.draw(st.integers(1, ext[1] - 1))
    loop = rectangular_loop(t, (0, 0), (w, h))
    assert loop.perimeter == 2 * (w + h)
    assert loop.area == w * h
    assert len(set(loop.links)) == loop.perimeter
    ends = t.link_vertices[loop.link_array].ravel()
    assert np.all(np.bincount(ends) % 2 == 0)


def test_rectangle_must_be_contractible():
    t = build_torus(2, (4, 4))
    with pytest.raises(ValueError):
        rectangular_loop(t, (0, 0), (4, 1))


def test_straight_loop_wraps():
    t = build_torus(3, (3, 4, 5))
    loop = straight_loop(t, 2, (1, 2))
    assert loop.perimeter == 5
    assert region_wraps(t, loop.links)


def test_star_block_counts():
    t = build_torus(2, (8, 8))
    block = [t.site_index((x, y)) for x in range(2, 5) for y in range(2, 5)]
    c = region_counts(t, vertex_star_region(t, block))
    assert (c.inside, c.boundary, c.m, c.p, c.p_bar) == (9, 12, 4, 1, 1)


@given(sizes2, st.data())
def test_region_count_identities(ext, data):
    t = build_torus(2, ext)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=t.n_links, max_size=t.n_links)))
    c = region_counts(t, mask)
    assert c.inside + c.boundary + c.outside == t.n_sites
    assert c.n_links == mask.sum()
    assert c.m_v == c.inside
    c_bar = region_counts(t, ~mask)
    assert (c_bar.inside, c_bar.outside, c_bar.boundary) == (c.outside, c.inside, c.boundary)
    assert c_bar.p == c.p_bar


def test_partition_rejects_overlap_and_reports_rest():
    t = build_torus(2, (4, 4))
    part = build_partition(t, {"A": [0, 1], "B": [2]})
    assert part.counts("A").n_links == 2
    assert part.mask("rest").sum() == t.n_links - 3
    with pytest.raises(ValueError):
        build_partition(t, [[0, 1], [1, 2]])


def test_plaquette_region_is_union_of_boundaries():
    t = build_torus(2, (4, 4))
    links = plaquette_region(t, [0, 1])
    assert links.size == 7
    assert set(star_links(t, 5)) <= set(range(t.n_links))


def test_edges_wrap_on_ring():
    n = 5
    tail = np.arange(n)
    head = (tail + 1) % n
    axis = np.zeros(n, dtype=np.int64)
    assert edges_wrap(n, tail, head, axis, 1)
    assert not edges_wrap(n, tail[:-1].copy(), head[:-1].copy(), axis[:-1].copy(), 1)


def test_wrapping_regions_at_small_size():
    t = build_torus(2, (2, 2))
    assert not region_wraps(t, plaquette_region(t, [0]))
    assert region_wraps(t, plaquette_region(t, [0, 1]))
