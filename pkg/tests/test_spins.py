import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtolab.lattice import build_torus, rectangular_loop
from dtolab.spins import (
    SpinConfig,
    all_up,
    apply_logical,
    apply_vertex_stabilizer,
    apply_x_string,
    build_square_patch,
    build_typeB_strip,
    defects,
    flip_link,
    has_noncontractible_defect_loop,
    local_field,
    loop_product,
    random_config,
    sector_parity,
    winding_parity,
)

GOLDEN = json.loads((Path(__file__).parent / "golden" / "sector_pairing.json").read_text())


@settings(max_examples=30)
@given(st.sampled_from([(2, (3, 4)), (3, (2, 3, 3))]), st.lists(st.integers(0, 10**6), max_size=40))
def test_incremental_cache_matches_recompute(geom, flips):
    t = build_torus(*geom)
    cfg = all_up(t)
    for f in flips:
        before = cfg.n_defects
        d = flip_link(cfg, f % t.n_links)
        assert cfg.n_defects == before + d
    assert cfg.cache_ok()


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_stabilizers_and_logicals_leave_defects_unchanged(seed):
    rng = np.random.default_rng(seed)
    t = build_torus(2, (4, 4))
    cfg = random_config(t, rng)
    plaq = cfg.plaq.copy()
    apply_vertex_stabilizer(cfg, int(rng.integers(t.n_sites)))
    apply_logical(cfg, "W", int(rng.integers(2)), int(rng.integers(4)))
    assert np.array_equal(cfg.plaq, plaq)
    assert cfg.cache_ok()


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_defect_count_is_even_in_2d(seed):
    t = build_torus(2, (5, 3))
    assert random_config(t, np.random.default_rng(seed)).n_defects % 2 == 0


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_cube_products_are_one_in_3d(seed):
    t = build_torus(3, (3, 3, 4))
    cfg = random_config(t, np.random.default_rng(seed))
    assert np.all(cfg.cube_products() == 1)


def test_sector_pairing_matches_golden_file():
    t2 = build_torus(2, (3, 3))
    for axis in (0, 1):
        cfg = all_up(t2)
        apply_logical(cfg, "W", axis)
        flipped = [a for a in (0, 1) if sector_parity(cfg, a) == -1]
        assert flipped == GOLDEN["2d"][f"W:{axis}"]
    t3 = build_torus(3, (3, 3, 3))
    for plane in ((0, 1), (0, 2), (1, 2)):
        cfg = all_up(t3)
        apply_logical(cfg, "V", plane)
        assert cfg.n_defects == 0
        flipped = [a for a in range(3) if sector_parity(cfg, a) == -1]
        assert flipped == GOLDEN["3d"][f"V:{plane[0]},{plane[1]}"]


def test_x_string_creates_pair_at_ends():
    t = build_torus(2, (5, 5))
    cfg = all_up(t)
    path = [t.plaquette_index((x, 2)) for x in range(4)]
    apply_x_string(cfg, path)
    assert sorted(defects(cfg).plaquettes.tolist()) == sorted([path[0], path[-1]])
    with pytest.raises(ValueError):
        apply_x_string(cfg, [0, 12])


def test_wilson_loop_counts_enclosed_defects():
    t = build_torus(2, (6, 6))
    cfg = all_up(t)
    apply_x_string(cfg, [t.plaquette_index((x, 1)) for x in range(1, 5)])
    inner = rectangular_loop(t, (0, 0), (3, 3))
    assert loop_product(cfg, inner.links) == -1
    both = rectangular_loop(t, (0, 0), (5, 3))
    assert loop_product(cfg, both.links) == 1


def test_local_field_range():
    t = build_torus(3, (3, 3, 3))
    cfg = random_config(t, np.random.default_rng(1))
    vals = {local_field(cfg, l) for l in range(t.n_links)}
    assert vals <= {-4, -2, 0, 2, 4}


def test_typeB_strip_wraps_and_full_width_closes():
    t = build_torus(3, (8, 8, 8))
    strip = build_typeB_strip(t, (0, 1), 4)
    assert strip.n_defects == 16
    assert has_noncontractible_defect_loop(strip)
    # two boundary loops each cross a transverse slice once
    assert winding_parity(strip, 0) == 0
    closed = build_typeB_strip(t, (0, 1), 8)
    assert closed.n_defects == 0
    assert not has_noncontractible_defect_loop(closed)
    with pytest.raises(ValueError):
        build_typeB_strip(t, (0, 1), 9)


def test_square_patch_is_contractible_loop():
    t = build_torus(3, (8, 8, 8))
    p = build_square_patch(t, 3)
    assert p.n_defects == 12
    assert not has_noncontractible_defect_loop(p)
    assert build_square_patch(t, 0).n_defects == 0


def test_hex_round_trip():
    t = build_torus(3, (3, 4, 5))
    cfg = random_config(t, np.random.default_rng(3))
    text = cfg.to_hex()
    assert text.startswith("3d:3x4x5:")
    assert SpinConfig.from_hex(text) == cfg
    with pytest.raises(ValueError):
        SpinConfig.from_hex(text, build_torus(3, (3, 4, 4)))


def test_bad_bits_shape():
    with pytest.raises(ValueError):
        SpinConfig(build_torus(2, (3, 3)), np.zeros(5))
