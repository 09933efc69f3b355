from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from brownexit import conformal as cf
from brownexit.errors import BranchPole, QuadratureStall, SpecError
from brownexit.geometry import Disk, SpiralComplement, SpiralSector, Wedge


def koebe_boundary_mean(two_p):
    # (1/2pi) int |1 - e^{it}|^{-2s} dt = Gamma(1-2s) / Gamma(1-s)^2 with s = two_p
    s = two_p
    return special.gamma(1 - 2 * s) / special.gamma(1 - s) ** 2


@pytest.mark.parametrize("two_p", [0.1, 0.25, 0.4])
def test_koebe_norm_matches_gamma_oracle(two_p):
    res = cf.hardy_norm(cf.Koebe(), two_p)
    assert res.finite
    assert res.mean_limit == pytest.approx(koebe_boundary_mean(two_p), rel=1e-6)
    assert res.value == pytest.approx(res.mean_limit ** (1 / two_p), rel=1e-12)


def test_koebe_threshold():
    assert cf.hardy_norm(cf.Koebe(), 0.6).divergent
    assert cf.hardy_norm(cf.Koebe(), 1.0).divergent
    with pytest.raises(QuadratureStall):
        cf.hardy_norm(cf.Koebe(), 0.49)


def test_identity_means_are_powers_of_r():
    for r in (0.1, 0.5, 0.9):
        m, _ = cf.circular_mean(cf.Identity(), 1.3, r)
        assert m == pytest.approx(r ** 1.3, rel=1e-9)
    res = cf.hardy_norm(cf.Identity(), 1.0)
    assert res.finite and res.mean_limit == pytest.approx(1.0, rel=1e-6)


@settings(max_examples=12, deadline=None)
@given(alpha=st.floats(0.3, 2 * math.pi), frac=st.floats(0.05, 0.85))
def test_wedge_power_closed_form(alpha, frac):
    two_p = 2 * frac * (math.pi / 2) / alpha
    f = cf.WedgePower(alpha)
    res = cf.hardy_norm(f, two_p)
    assert res.finite
    assert res.mean_limit == pytest.approx(f.closed_form_mean(two_p), rel=1e-5)


@settings(max_examples=12, deadline=None)
@given(order=st.floats(0.0, 1.2), gap=st.floats(0.3, 2 * math.pi), frac=st.floats(0.05, 0.8))
def test_hansen_closed_form(order, gap, frac):
    f = cf.HansenSpiral(order, gap, 0.3)
    two_p = 2 * frac * (math.pi / 2) / (gap * math.cos(order) ** 2)
    res = cf.hardy_norm(f, two_p)
    assert res.finite
    assert res.mean_limit == pytest.approx(f.closed_form_mean(two_p), rel=1e-5)


def test_hansen_reduces_to_wedge_map_at_order_zero():
    z = 0.9 * np.exp(1j * np.linspace(0, 6, 50)) * np.linspace(0, 1, 50)
    h = cf.HansenSpiral(0.0, math.pi / 2, -math.pi / 4)
    assert np.allclose(h(z), cf.WedgePower(math.pi / 2)(z), rtol=1e-12)


@pytest.mark.parametrize("f,target", [
    (cf.Identity(), Disk()),
    (cf.Koebe(), SpiralComplement(0.0, 0.25, (math.pi,))),
    (cf.HansenSpiral(0.0, math.pi / 2, -math.pi / 4), Wedge(math.pi / 4)),
    (cf.HansenSpiral(0.5, 1.5, 0.2), SpiralSector(0.5, 0.2, 1.7)),
    (cf.WedgePower(1.2), Wedge(0.6)),
])
def test_image_membership(f, target):
    assert cf.image_membership_check(f, target, 20_000, rng=1) == 1.0


def test_image_membership_detects_wrong_target():
    assert cf.image_membership_check(cf.Koebe(), Disk(), 5_000) < 0.9


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0, 0.95), phi=st.floats(0, 2 * math.pi))
def test_poisson_kernel_mass(r, phi):
    b = r * complex(math.cos(phi), math.sin(phi))
    mass, _ = integrate.quad(lambda t: float(cf.poisson_kernel(b, t)), 0, 2 * math.pi, limit=500,
                             epsabs=1e-13, epsrel=1e-13, points=[phi])
    assert mass / (2 * math.pi) == pytest.approx(1.0, abs=1e-10)


def test_poisson_kernel_reproduces_harmonic_functions():
    b = 0.3 - 0.4j
    val, _ = integrate.quad(lambda t: math.cos(2 * t) * float(cf.poisson_kernel(b, t)), 0, 2 * math.pi)
    assert val / (2 * math.pi) == pytest.approx((b ** 2).real, abs=1e-10)


@pytest.mark.parametrize("f,two_p", [(cf.Koebe(), 0.3), (cf.WedgePower(math.pi / 2), 1.2),
                                     (cf.HansenSpiral(0.4, 2.0, 0.0), 0.5)])
@pytest.mark.parametrize("b", [0.3j, -0.5 + 0.2j])
def test_basepoint_norm_two_routes(f, two_p, b):
    res = cf.hardy_norm_at(f, two_p, b)
    assert res.finite
    assert res.mean_limit == pytest.approx(cf.kernel_boundary_mean(f, two_p, b), rel=1e-6)


def test_radial_means_nondecreasing():
    res = cf.hardy_norm(cf.Koebe(), 0.4)
    means = [m for _, _, m in res.radial_trace]
    assert all(b >= a - 1e-9 for a, b in zip(means, means[1:]))
    div = cf.hardy_norm(cf.Koebe(), 0.6)
    means = [m for _, _, m in div.radial_trace]
    assert all(b >= a - 1e-9 for a, b in zip(means, means[1:]))


@settings(max_examples=8, deadline=None)
@given(angle=st.floats(0, 2 * math.pi))
def test_rotation_invariance(angle):
    base = cf.hardy_norm(cf.Koebe(), 0.4).mean_limit
    rot = cf.hardy_norm(cf.Rotation(cf.Koebe(), angle), 0.4).mean_limit
    assert rot == pytest.approx(base, rel=1e-6)


def test_branch_pole_and_specs():
    with pytest.raises(BranchPole):
        cf.Koebe()(1.0)
    with pytest.raises(BranchPole):
        cf.WedgePower(1.0)(-1.0)
    for f in (cf.Identity(), cf.Koebe(), cf.MobiusAuto(0.2j), cf.HansenSpiral(0.3, 1.0, 0.5),
              cf.WedgePower(1.0), cf.Rotation(cf.Koebe(), 0.4), cf.Composed(cf.Koebe(), 0.1 + 0.2j)):
        g = cf.map_from_dict(f.to_dict())
        z = np.array([0.1 + 0.2j, -0.3j])
        assert np.allclose(g(z), f(z))
    with pytest.raises(SpecError):
        cf.map_from_dict({"type": "riemann"})
    with pytest.raises(SpecError):
        cf.MobiusAuto(1.0)


def test_mobius_auto_inverse_and_composition():
    phi = cf.MobiusAuto(0.4 - 0.2j)
    z = np.array([0.0, 0.5j, -0.7 + 0.1j])
    assert np.allclose(phi.inverse(phi(z)), z)
    assert phi(0.0) == pytest.approx(0.4 - 0.2j)
    comp = cf.Composed(cf.Koebe(), 0.4 - 0.2j)
    assert np.allclose(comp(z), cf.Koebe()(phi(z)))


def test_map_examples():
    assert cf.Koebe()(0j) == 0
    assert cf.Koebe()(-1 + 1e-12) == pytest.approx(-0.25, abs=1e-9)
    assert cf.HansenSpiral(0.0, math.pi, 0.0)(0j) == pytest.approx(1j, abs=1e-15)
