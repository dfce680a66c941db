import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtolab.dynamics import Model
from dtolab.exact import (
    biorthonormalize,
    build_generator_dual,
    build_generator_full,
    build_xy_hamiltonian,
    closed_classes,
    left_null_space,
    lump_to_dual,
    steady_space,
    xy_couplings,
    xy_spectrum_check,
)
from dtolab.lattice import build_torus
from dtolab.oracle import exact_steady_state_2d

T2 = build_torus(2, (2, 2))


@settings(max_examples=15)
@given(st.floats(0, 3), st.floats(0, 2), st.floats(0.2, 1.0))
def test_full_generator_hygiene(h, kv, q2):
    gen = build_generator_full(T2, Model(h=h, q2=q2, kappa_v=kv))
    assert gen.conservation_residual() < 1e-12
    assert gen.min_offdiagonal() >= 0
    assert gen.max_diagonal() <= 1e-15


@settings(max_examples=15)
@given(st.floats(0, 3))
def test_dual_generator_hygiene(h):
    gen = build_generator_dual(3, h)
    assert gen.dim == 256
    assert gen.conservation_residual() < 1e-12
    assert gen.min_offdiagonal() >= 0


@pytest.mark.parametrize("h", [0.0, 0.1, 0.7])
def test_lumping_matches_direct_dual_builder(h):
    full = build_generator_full(T2, Model(h=h))
    lumped = lump_to_dual(full).matrix.toarray()
    direct = build_generator_dual(2, h).matrix.toarray()
    assert np.allclose(lumped, direct, atol=1e-13)


def test_full_builder_refuses_large_systems():
    with pytest.raises(ValueError):
        build_generator_full(build_torus(2, (4, 4)), Model())
    with pytest.raises(ValueError):
        build_generator_full(T2, Model(dim=3))


@pytest.mark.parametrize("L,h,expected", [(2, 0.0, 4), (2, 0.1, 1)])
def test_null_dimension(L, h, expected):
    gen = build_generator_full(build_torus(2, (L, L)), Model(h=h))
    R, rep = steady_space(gen)
    assert rep.null_dim == expected
    assert rep.extra["residual"] < 1e-10
    assert rep.splitting < 1e-10
    assert np.allclose(R.sum(axis=0), 1)


def test_steady_state_matches_enumeration():
    gen = build_generator_full(build_torus(2, (2, 2)), Model(h=0.3))
    R, _ = steady_space(gen)
    assert np.abs(R[:, 0] - exact_steady_state_2d(2, 0.3)).max() < 1e-12


def test_left_null_space_is_dual_to_right():
    gen = build_generator_full(T2, Model(h=0.0))
    R, _ = steady_space(gen)
    Lm = left_null_space(gen, R)
    assert np.allclose(Lm.sum(axis=1), 1)
    assert np.abs(Lm.T @ gen.matrix.toarray()).max() < 1e-10
    B = biorthonormalize(Lm, R)
    assert np.allclose(B.T @ R, np.eye(R.shape[1]))


def test_closed_classes_at_zero_field_are_sectors():
    classes = closed_classes(build_generator_full(T2, Model(h=0.0)))
    assert len(classes) == 4
    assert sum(c.size for c in classes) == 2 ** (T2.n_sites - 1) * 4


@given(st.floats(0.01, 5))
def test_xy_coupling_identities(h):
    c = xy_couplings(h)
    assert math.isclose(c["beta1"] * c["beta2"], 0.25, rel_tol=1e-9)
    assert math.isclose(c["eta"] ** 2 + (c["h_z"] / 2) ** 2, 1.0, rel_tol=1e-12)


def test_xy_hamiltonian_is_symmetric():
    H = build_xy_hamiltonian(2, 0.4)
    assert np.allclose(H, H.T)


@pytest.mark.parametrize("h", [0.1, 1.0])
def test_xy_spectrum_matches_generator(h):
    r = xy_spectrum_check(2, h)
    assert r["mismatch"] < 1e-10
    assert r["max_imag"] < 1e-10
    with pytest.raises(ValueError):
        xy_couplings(0.0)
