import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtolab.fits import (
    decay_law_comparison,
    hc_bracket,
    linear_fit,
    loop_law_comparison,
    power_law_exponent,
)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_linear_fit_exact_line(a, b):
    x = np.arange(6.0)
    f = linear_fit(x, a * x + b)
    assert abs(f.slope - a) < 1e-9 and abs(f.intercept - b) < 1e-9
    assert f.rss < 1e-16


def test_linear_fit_needs_points():
    with pytest.raises(ValueError):
        linear_fit([1.0], [2.0])


def test_power_law_exponent():
    x = np.array([8.0, 12.0, 16.0])
    assert abs(power_law_exponent(x, 3 * x**4).slope - 4) < 1e-12
    with pytest.raises(ValueError):
        power_law_exponent([0.0, 1.0], [1.0, 2.0])


def test_loop_law_preference():
    w = np.array([(a, b) for a in range(1, 5) for b in range(1, 5)])
    P, A = 2 * w.sum(axis=1), w.prod(axis=1)
    err = np.full(P.size, 1e-4)
    assert loop_law_comparison(P, A, np.exp(-0.05 * P), err).preferred == "perimeter"
    assert loop_law_comparison(P, A, np.exp(-0.1 * A), err).preferred == "area"
    with pytest.raises(ValueError):
        loop_law_comparison(P, A, np.zeros(P.size), err)


def test_hc_bracket():
    hs = [0.02, 0.005, 0.01, 0.015]
    pref = ["area", "perimeter", "perimeter", "area"]
    assert hc_bracket(hs, pref) == (0.01, 0.015)
    with pytest.raises(ValueError):
        hc_bracket([0.1, 0.2], ["area", "area"])


def test_decay_discrimination():
    t = np.arange(1.0, 200.0)
    err = np.full(t.size, 1e-4)
    power = decay_law_comparison(t, 0.5 * t**-1.5, err)
    expo = decay_law_comparison(t, 0.5 * np.exp(-0.1 * t), err)
    assert power.preferred == "power" and power.ratio > 2
    assert expo.preferred == "exponential" and expo.ratio < 0.5
    assert power.window[1] / power.window[0] == pytest.approx(10)
