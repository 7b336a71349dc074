import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from artifact.errors import LightConeSingularity, NonIntegrable, PointwiseUndefined
from artifact.wavegreen import (GreenSpec, fourier_of_green_1d, green_eval, green_fourier,
                                green_mass, green_scaling_check, heat_kernel, subordination_check)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_green_mass_equals_t(d, t):
    assert green_mass(GreenSpec(d), t) == pytest.approx(t, abs=1e-8)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_green_mass_mollified_sphere(t):
    assert green_mass(GreenSpec(3, 1e-3), t) == pytest.approx(t, abs=1e-3)


def test_d3_origin_value_is_continuous():
    g = GreenSpec(3, 0.05)
    assert green_eval(g, 0.3, [0.0, 0.0, 0.0]) == pytest.approx(green_eval(g, 0.3, [1e-4, 0.0, 0.0]), rel=1e-6)


def test_green_pointwise_values():
    assert green_eval(GreenSpec(1), 1.0, 0.3) == 0.5
    assert green_eval(GreenSpec(1), 1.0, 1.3) == 0.0
    assert green_eval(GreenSpec(2), 1.0, [0.6, 0.0]) == pytest.approx(1 / (2 * math.pi * 0.8))


def test_green_errors():
    with pytest.raises(LightConeSingularity):
        green_eval(GreenSpec(2), 1.0, [1.0, 0.0])
    with pytest.raises(PointwiseUndefined):
        green_eval(GreenSpec(3), 1.0, [0.2, 0.0, 0.0])


@given(t=st.floats(0.1, 5.0), x=st.floats(-6.0, 6.0), y=st.floats(-6.0, 6.0))
@settings(max_examples=50, deadline=None)
def test_green_scaling(t, x, y):
    assert green_scaling_check(GreenSpec(1), t, x)
    r = math.hypot(x, y)
    if abs(r - t) > 1e-6:
        assert green_scaling_check(GreenSpec(2), t, [x, y])


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("x", [0.0, 0.5])
def test_subordination_d1(lam, x):
    s = subordination_check(lam, x, 1)
    assert s.lhs == pytest.approx(s.rhs, abs=1e-6)
    assert s.lhs == pytest.approx(math.exp(-lam * x) / (2 * lam), abs=1e-9)


def test_subordination_unit_case():
    assert subordination_check(1.0, 0.0, 1).lhs == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("lam,r", [(0.5, 0.5), (1.0, 1.2), (2.0, 0.3)])
def test_subordination_d2_against_bessel(lam, r):
    s = subordination_check(lam, [r, 0.0], 2)
    ref = special.k0(lam * r) / (2 * math.pi)
    assert s.lhs == pytest.approx(ref, rel=1e-8)
    assert s.rhs == pytest.approx(ref, rel=1e-8)


def test_subordination_d2_origin_diverges():
    with pytest.raises(NonIntegrable):
        subordination_check(1.0, [0.0, 0.0], 2)


@pytest.mark.parametrize("xi", [0.0, 0.7, 3.0])
def test_green_fourier_transform(xi):
    assert fourier_of_green_1d(1.3, xi) == pytest.approx(green_fourier(1.3, xi), abs=1e-12)


def test_heat_kernel_normalised():
    x = np.linspace(-12, 12, 4001)
    assert np.trapezoid(heat_kernel(1, 0.7, x), x) == pytest.approx(1.0, abs=1e-10)
