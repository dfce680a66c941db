import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtolab.perturb1 import (
    alpha_solutions,
    build_alpha_system,
    effective_matrix,
    gap_scaling,
    gap_table_csv,
)


def test_four_zero_singular_values():
    s = np.linalg.svd(build_alpha_system(4).toarray(), compute_uv=False)
    assert np.sum(s < 1e-12) == 4
    assert np.sort(s)[4] > 1e-3


@settings(max_examples=10)
@given(st.integers(2, 20))
def test_constants_are_null(L):
    M = build_alpha_system(L)
    assert np.abs(M @ np.ones(M.shape[0])).max() < 1e-14


@settings(max_examples=10)
@given(st.integers(2, 24))
def test_solutions_partition_unity_and_symmetry(L):
    sols = alpha_solutions(build_alpha_system(L), L)
    total = sum(g.values for g in sols)
    assert np.abs(total - 1).max() < 1e-10
    a00, a0L, aL0, aLL = sols
    assert a00(0, 0) == 1 and a00(L, L) == 0 and a00(0, L) == 0
    assert a00.symmetry_error() < 1e-10 and aLL.symmetry_error() < 1e-10
    # the off-diagonal corners are exchanged by i <-> j
    assert np.abs(a0L.values - aL0.values.T).max() < 1e-10
    for g in sols:
        assert g.values.min() > -1e-12 and g.values.max() < 1 + 1e-12


def test_wrong_shape_and_small_L():
    with pytest.raises(ValueError):
        build_alpha_system(1)
    with pytest.raises(ValueError):
        alpha_solutions(build_alpha_system(4), 5)


@pytest.mark.parametrize("L", [4, 8, 16])
def test_effective_matrix_structure(L):
    eff = effective_matrix(alpha_solutions(build_alpha_system(L), L), 0.01, L)
    d = eff.deltas
    assert abs(d[3]) < 1e-10
    assert abs(d[1] - d[2]) < 1e-10
    assert np.all(d < 1e-10)
    assert abs(eff.b - eff.c) < 1e-10
    assert np.allclose(np.sort(np.linalg.eigvalsh(eff.matrix)), np.sort(eff.eigenvalues))


def test_splitting_is_linear_in_h():
    sols = alpha_solutions(build_alpha_system(6), 6)
    e1 = effective_matrix(sols, 0.01, 6).eigenvalues
    e2 = effective_matrix(sols, 0.03, 6).eigenvalues
    assert np.allclose(e2, 3 * e1)


def test_gap_scaling_table():
    rows = gap_scaling([8, 16], 0.01)
    assert abs(rows[1]["delta2"]) < abs(rows[0]["delta2"])
    assert math.isclose(rows[0]["delta2_logL"], rows[0]["delta2"] * math.log(8))
    assert gap_table_csv(rows).splitlines()[0] == "L,delta2,delta2_logL,nh_delta2"
    with pytest.raises(ValueError):
        gap_scaling([16, 8], 0.01)
