import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_tunnel import warped_geometry as wg
from spectral_tunnel.errors import DomainError, InsufficientDataError, SingularityError


def test_sphere_area_values():
    assert wg.sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert wg.sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert wg.sphere_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)
    with pytest.raises(DomainError):
        wg.sphere_area(1)


def test_params_derived_quantities():
    p = wg.Params(3, 3.0, 2.0, 0.2)
    assert p.critical_gamma == 2.0
    assert p.supercritical
    assert p.green_shift == pytest.approx(1.9)
    assert p.target == pytest.approx(1.8)
    assert not wg.Params(3, 1.9, 2.0, 0.2).supercritical
    with pytest.raises(DomainError):
        wg.Params(2, 3.0, 0.0, 0.1)
    with pytest.raises(DomainError):
        wg.Params(3, 3.0, 0.0, 0.0)


@pytest.mark.parametrize("r, n, expected", [(1.3, 3, 0.0), (math.pi / 4, 3, 2.0), (1.0, 3, -2.0)])
def test_ricci_radial_examples(r, n, expected):
    warp = {0.0: wg.euclidean(), 2.0: wg.round_sphere(), -2.0: wg.hyperbolic_cap()}[expected]
    assert wg.ricci_radial(warp, n, r) == pytest.approx(expected, abs=1e-13)


def test_ricci_tangential_examples():
    assert wg.ricci_tangential(wg.euclidean(), 4, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert wg.ricci_tangential(wg.round_sphere(), 3, math.pi / 3) == pytest.approx(2.0, rel=1e-13)
    assert wg.ricci_tangential(wg.cylinder(), 3, 0.7) == pytest.approx(1.0, rel=1e-15)


def test_ricci_min_examples():
    r = np.linspace(0.0, math.pi, 101)
    np.testing.assert_allclose(wg.ricci_min(wg.round_sphere(), 3, r).ric_min, 2.0, rtol=1e-12)
    cyl = wg.ricci_min(wg.cylinder(), 3, np.linspace(0, 6, 7))
    np.testing.assert_array_equal(cyl.ric_min, 0.0)
    assert np.all(cyl.ric_mixed == 0)


def test_ricci_min_at_neck_is_radial():
    from spectral_tunnel.neck_profile import build_neck_profile

    f = build_neck_profile()
    warp = wg.WarpProfile(f.f, wg.Interval(-2, 2, wg.BOUNDARY, wg.BOUNDARY), f.df, f.d2f)
    sample = wg.ricci_min(warp, 3, np.array([0.0]))
    assert sample.ric_rr[0] < 0
    assert sample.ric_min[0] == sample.ric_rr[0]
    assert sample.ric_rr[0] == pytest.approx(-2 * f.d2f(0.0) / f(0.0), rel=1e-14)


def test_pole_series_of_sphere_and_fit():
    assert wg.round_sphere().pole_series(0.0)[0] == pytest.approx(-1 / 6, rel=1e-14)
    assert wg.round_sphere().pole_series(math.pi)[0] == pytest.approx(-1 / 6, rel=1e-12)
    no_third = wg.WarpProfile(np.sin, wg.Interval(0.0, math.pi), np.cos, lambda r: -np.sin(r))
    assert no_third.pole_series(0.0)[0] == pytest.approx(-1 / 6, rel=1e-7)


def test_curvature_near_pole_uses_series():
    r = np.array([1e-9, 1e-6, 5e-4])
    np.testing.assert_allclose(wg.ricci_radial(wg.round_sphere(), 3, r), 2.0, rtol=1e-12)
    np.testing.assert_allclose(wg.ricci_tangential(wg.round_sphere(), 3, r), 2.0, rtol=1e-12)
    with pytest.raises(SingularityError):
        wg.ricci_radial(wg.round_sphere(), 3, r, at_pole="error")


def test_finite_difference_fallback_matches_analytic():
    warp = wg.WarpProfile(np.sin, wg.Interval(0.0, math.pi))
    r = np.linspace(0.3, 2.8, 50)
    _, d1, d2 = warp.derivatives(r)
    np.testing.assert_allclose(d1, np.cos(r), atol=1e-10)
    np.testing.assert_allclose(d2, -np.sin(r), atol=1e-7)


def test_laplacian_examples():
    euc = wg.euclidean()
    u = wg.RadialFunction(lambda r: 1 / r, lambda r: -1 / r ** 2, lambda r: 2 / r ** 3)
    assert wg.laplacian_radial(euc, 3, u, 1.7) == pytest.approx(0.0, abs=1e-15)
    sq = wg.RadialFunction(lambda r: r * r, lambda r: 2 * r, lambda r: 2 + 0 * r)
    assert wg.laplacian_radial(euc, 5, sq, 0.8) == pytest.approx(10.0, rel=1e-15)
    assert wg.laplacian_radial(euc, 5, sq, 0.0, at_pole="limit") == pytest.approx(10.0)
    with pytest.raises(SingularityError):
        wg.laplacian_radial(euc, 5, sq, 0.0)


def test_laplacian_of_neck_power():
    from spectral_tunnel.neck_profile import build_neck_profile

    f = build_neck_profile()
    warp = wg.WarpProfile(f.f, wg.Interval(-2, 2, wg.BOUNDARY, wg.BOUNDARY), f.df, f.d2f)
    for n in (3, 4, 6):
        k = 2 - n
        u = wg.RadialFunction(lambda r: f(r) ** k, lambda r: k * f(r) ** (k - 1) * f.df(r),
                              lambda r: k * (k - 1) * f(r) ** (k - 2) * f.df(r) ** 2
                              + k * f(r) ** (k - 1) * f.d2f(r))
        x = np.linspace(-0.9, 0.9, 31)
        lap = wg.laplacian_radial(warp, n, u, x)
        np.testing.assert_allclose(lap, (2 - n) * f.d2f(x) / f(x) * u(x), rtol=1e-12, atol=1e-14)


def test_fiber_factor_examples():
    np.testing.assert_array_equal(wg.fiber_factor(wg.euclidean(), 0.0, np.array([0.5, 2.0])), 1.0)
    assert wg.fiber_factor(wg.round_sphere(), 0.0, 1.0) == pytest.approx(0.7080734182735712, rel=1e-14)
    assert wg.fiber_factor(wg.hyperbolic_cap(), 0.0, 1e-8) == pytest.approx(1.0, abs=1e-15)
    a, da, d2a = wg.fiber_factor_derivatives(wg.round_sphere(), math.pi, np.array([1e-4, 0.5]))
    np.testing.assert_allclose(a, (np.sin([1e-4, 0.5]) / [1e-4, 0.5]) ** 2, rtol=1e-14)
    with pytest.raises(DomainError):
        wg.fiber_factor(wg.round_sphere(), 0.0, 0.0)


def test_fiber_factor_derivatives_continuous_across_cutoff():
    warp = wg.round_sphere()
    s = warp.pole_cutoff
    below = wg.fiber_factor_derivatives(warp, 0.0, np.array([s * (1 - 1e-9)]))
    above = wg.fiber_factor_derivatives(warp, 0.0, np.array([s * (1 + 1e-9)]))
    for lo, hi in zip(below, above):
        assert lo[0] == pytest.approx(hi[0], rel=1e-8, abs=1e-8)


def test_rate_check_examples():
    r = wg.dyadic_radii(0.5, 8)
    assert wg.rate_check(r, r, "o(1)").passed
    assert not wg.rate_check(r, np.ones_like(r), "o(1)").passed
    a = wg.fiber_factor(wg.round_sphere(), 0.0, r)
    rep = wg.rate_check(r, a - 1, "o(1)")
    assert rep.passed and rep.slope == pytest.approx(2.0, abs=0.05)
    assert wg.rate_check(r, np.zeros_like(r), "o(r^-2)").slope == math.inf
    with pytest.raises(InsufficientDataError):
        wg.rate_check(r[:4], r[:4], "o(1)")


def test_invariants_reported():
    assert all(wg.round_sphere().check_invariants().values())
    assert all(wg.warped_circle().check_invariants().values())


@settings(max_examples=40, deadline=None)
@given(radius=st.floats(0.2, 5.0), n=st.integers(3, 8), frac=st.floats(0.05, 0.95))
def test_scaled_sphere_is_einstein(radius, n, frac):
    warp = wg.round_sphere(radius)
    r = frac * math.pi * radius
    expected = (n - 1) / radius ** 2
    assert wg.ricci_radial(warp, n, r) == pytest.approx(expected, rel=1e-11)
    assert wg.ricci_tangential(warp, n, r) == pytest.approx(expected, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(K=st.floats(-3.0, 3.0).filter(lambda k: abs(k) > 1e-3), n=st.integers(3, 7),
       frac=st.floats(0.05, 0.9))
def test_space_forms_have_constant_ricci(K, n, frac):
    r_max = math.pi / math.sqrt(K) if K > 0 else 2.0
    warp = wg.space_form(K, r_max)
    r = frac * r_max
    sample = wg.ricci_min(warp, n, np.array([r]))
    assert sample.ric_rr[0] == pytest.approx((n - 1) * K, rel=1e-10)
    assert sample.ric_ee[0] == pytest.approx((n - 1) * K, rel=1e-8)
