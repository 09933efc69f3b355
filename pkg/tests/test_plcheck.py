from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brownexit.errors import DiskNotContained, EvaluationFailure, NotInUpperHalfPlane, SpecError
from brownexit.geometry import Disk, HalfPlane, Wedge, slit_plane
from brownexit.plcheck import (BoundedRational, Constant, ExpPower, Polynomial, circular_mean_check,
                               function_from_dict, harmonic_measure_halfplane, harmonic_measure_mc, log_plus,
                               verify_pl)

QUADRANT = Wedge(math.pi / 4)


def test_harmonic_measure_formula():
    assert harmonic_measure_halfplane(1j) == pytest.approx(0.5)
    assert harmonic_measure_halfplane(1 + 1j) == pytest.approx(0.25)
    assert harmonic_measure_halfplane(-1 + 1e-9j) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(NotInUpperHalfPlane):
        harmonic_measure_halfplane(-1j)


@pytest.mark.parametrize("a", [1j, 2 + 0.5j, -0.3 + 1j])
def test_harmonic_measure_mc_agrees(a):
    frac, se = harmonic_measure_mc(a, 20_000, rng=3)
    assert abs(frac - harmonic_measure_halfplane(a)) < 4 * se + 1e-3


def test_log_plus():
    assert np.array_equal(log_plus(np.array([0.5, 1.0, math.e])), [0.0, 0.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(c=st.lists(st.complex_numbers(max_magnitude=5), min_size=1, max_size=5),
       x=st.floats(-2, 2), y=st.floats(-2, 2), r=st.floats(0.01, 3))
def test_subharmonic_mean_inequality(c, x, y, r):
    f = Polynomial(tuple(c))
    if all(v == 0 for v in c):
        return
    res = circular_mean_check(f, complex(x, y), r)
    assert res.holds


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-1, 1), y=st.floats(-1, 1), r=st.floats(0.01, 0.9))
def test_log_modulus_is_harmonic_without_zeros(x, y, r):
    f = BoundedRational((1.0,), (3.0, 1.0))  # 1/(z+3): no zeros, pole at -3
    res = circular_mean_check(f, complex(x, y), r * 1.0, kind="log")
    assert res.mean == pytest.approx(res.center, abs=1e-9)


def test_circular_mean_rejects_singular_disk():
    with pytest.raises(DiskNotContained):
        circular_mean_check(BoundedRational((1.0,), (2.0, 1.0)), 0j, 2.5)
    with pytest.raises(DiskNotContained):
        circular_mean_check(ExpPower(0.5), 1 + 0j, 1.5)


def test_function_specs():
    fs = [Constant(2.0), Constant(0.5 - 0.5j), Polynomial((1.0, 0.5, 0.25)), ExpPower(2.0),
          BoundedRational((1.0, 2.0), (5.0, 1.0, 1.0))]
    z = np.array([0.3 + 0.1j, 2 - 1j])
    for f in fs:
        g = function_from_dict(f.to_dict())
        assert np.allclose(g(z), f(z))
        assert np.allclose(g.log_abs(z), np.log(np.abs(f(z))))
    with pytest.raises(SpecError):
        function_from_dict({"type": "gamma"})
    with pytest.raises(SpecError):
        function_from_dict({"type": "polynomial", "coefficients": []})


def test_verify_constant_and_bounded():
    v = verify_pl(Constant(2.0), QUADRANT, 0.5, n_interior=4_000)
    assert v.conclusion == "bound-holds" and v.K_hat == pytest.approx(2.0)
    v = verify_pl(ExpPower(1.0), Disk(), 0.5, n_interior=4_000)
    assert v.conclusion == "bound-holds"
    assert v.K_hat == pytest.approx(math.e, rel=1e-3)
    v = verify_pl(BoundedRational((1.0,), (2.0, 1.0)), QUADRANT, 0.5, n_interior=4_000)
    assert v.conclusion == "bound-holds" and v.K_hat == pytest.approx(0.5, rel=1e-3)


def test_sharpness_witness():
    v = verify_pl(ExpPower(2.0), QUADRANT, 1.0, n_interior=6_000)
    assert v.conclusion == "hypothesis-unmet"
    assert v.unbounded_witness and v.witness is not None
    assert v.moment_ok is False
    assert v.K_hat == pytest.approx(1.0, rel=1e-3)  # |exp(z^2)| = 1 on both edges


def test_growth_hypothesis_failure():
    v = verify_pl(Polynomial((0.0, 1.0)), QUADRANT, 0.5, n_interior=4_000)
    assert v.conclusion == "hypothesis-unmet" and not v.boundary_bounded
    v = verify_pl(ExpPower(1.0), HalfPlane(0j, math.pi / 2), 0.2, n_interior=4_000)
    assert v.conclusion == "hypothesis-unmet"


def test_evaluation_failures():
    with pytest.raises(EvaluationFailure):
        verify_pl(BoundedRational((1.0,), (-0.5, 1.0)), Disk(), 0.5)
    with pytest.raises(EvaluationFailure):
        verify_pl(ExpPower(0.5), Disk(), 0.5)
    v = verify_pl(BoundedRational((1.0,), (2.0, 1.0)), slit_plane(angle=math.pi), 0.2, n_interior=4_000)
    assert v.conclusion == "hypothesis-unmet" and v.K_hat == math.inf


@pytest.mark.parametrize("f", [Constant(2.0), Polynomial((1.0, 0.5, 0.25)), ExpPower(1.0), ExpPower(2.0),
                               BoundedRational((1.0, 2.0), (5.0, 1.0, 1.0))])
@pytest.mark.parametrize("domain,p", [(Disk(), 0.5), (QUADRANT, 0.5), (QUADRANT, 1.0), (slit_plane(angle=math.pi), 0.2)])
def test_never_violated(f, domain, p):
    # the principle is a theorem: sampling may fail a hypothesis but never the conclusion
    try:
        v = verify_pl(f, domain, p, n_interior=3_000, n_boundary=1024)
    except EvaluationFailure:
        assert any(domain.contains(s) for s in f.singular_points())
        return
    assert v.conclusion != "violated"
