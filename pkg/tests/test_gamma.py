import math

import numpy as np
import pytest

from tfslab.gamma import gamma_real, rgamma_real


def test_matches_stdlib_on_positive_axis():
    xs = np.concatenate([
        np.linspace(0.02, 1.0, 40),
        np.linspace(1.0, 30.0, 60),
        np.linspace(30.0, 170.0, 40),
    ])
    worst = max(abs(gamma_real(float(x)) - math.gamma(float(x)))
                / math.gamma(float(x)) for x in xs)
    assert worst <= 1e-12


def test_reflection_matches_stdlib():
    xs = [-0.3, -1.7, -5.25, -20.8, -0.0001, -49.5]
    for x in xs:
        assert gamma_real(x) == pytest.approx(math.gamma(x), rel=1e-12)


def test_rgamma_zero_at_poles():
    for n in range(0, 40):
        assert rgamma_real(-float(n)) == 0.0


def test_rgamma_reciprocal():
    for x in [0.1, 0.5, 1.6, 7.3, 42.0, -2.5, -10.1]:
        assert rgamma_real(x) == pytest.approx(1.0 / math.gamma(x), rel=1e-12)


def test_rgamma_underflows_to_zero_for_large_argument():
    assert rgamma_real(400.0) == 0.0


def test_pole_raises():
    with pytest.raises(ValueError):
        gamma_real(0.0)
    with pytest.raises(ValueError):
        gamma_real(-3.0)


def test_overflow_raises():
    with pytest.raises(OverflowError):
        gamma_real(200.0)
