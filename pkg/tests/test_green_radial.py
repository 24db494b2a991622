import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_tunnel import models
from spectral_tunnel import warped_geometry as wg
from spectral_tunnel.errors import DomainError, NoPositiveSolution, RadiusTooLarge
from spectral_tunnel.green_radial import (
    extract_w, green_asymptotics_check, green_coefficient, green_solve, model_green)

# n = 3, gamma = 3, lambda = 2, epsilon = 0.2 on the unit S^3.  With u = g / sin s
# the radial equation becomes g'' + k^2 g = 0, k^2 = 1 - (2 - 1.9)/3.
GAMMA, LAM, EPS = 3.0, 2.0, 0.2
K_S3 = math.sqrt(1 - (2 - (LAM - EPS / 2)) / GAMMA)
B_S3 = 1 / (12 * math.pi)
U_HALF_SINGLE = 0.50240678798154798764
U_HALF_ANTIPODAL = 1.0048135759630959753


def s3_single(s):
    return B_S3 * np.sin(K_S3 * (np.pi - s)) / (np.sin(K_S3 * np.pi) * np.sin(s))


def s3_antipodal(s):
    return B_S3 * (np.sin(K_S3 * (np.pi - s)) + np.sin(K_S3 * s)) / (np.sin(K_S3 * np.pi) * np.sin(s))


@pytest.fixture(scope="module")
def params():
    return wg.Params(3, GAMMA, LAM, EPS)


@pytest.fixture(scope="module")
def sphere_green(params):
    return green_solve(models.sphere_model(params))


@pytest.fixture(scope="module")
def antipodal_green(params):
    return green_solve(models.antipodal_sphere_model(params))


def test_closed_form_oracle_matches_frozen_values():
    assert s3_single(np.pi / 2) == pytest.approx(U_HALF_SINGLE, rel=1e-15)
    assert s3_antipodal(np.pi / 2) == pytest.approx(U_HALF_ANTIPODAL, rel=1e-15)


def test_green_coefficient():
    assert green_coefficient(3, 3.0) == pytest.approx(B_S3, rel=1e-15)
    assert green_coefficient(4, 1.0) == pytest.approx(1 / (2 * 2 * math.pi ** 2), rel=1e-15)


def test_euclidean_is_exact():
    p = wg.Params(3, 3.0, 0.05, 0.1)
    sol = green_solve(models.euclidean_model(p))
    s = np.geomspace(1e-5, 9.9, 200)
    w, dw, d2w = sol.w(0.0, s)
    np.testing.assert_allclose(w, 1.0, atol=1e-9)
    np.testing.assert_allclose(sol(s), sol.b * s ** -1.0, rtol=1e-9)
    assert np.max(np.abs(dw * s)) < 1e-9


@pytest.mark.parametrize("n", [3, 4, 5])
def test_euclidean_w_identically_one_all_dimensions(n):
    sol = green_solve(models.euclidean_model(wg.Params(n, 3.0, 0.05, 0.1)))
    s = np.geomspace(1e-4, 9.0, 100)
    np.testing.assert_allclose(sol.w(0.0, s)[0], 1.0, atol=1e-9)


def test_delta_mass_identity(sphere_green, antipodal_green):
    assert sphere_green.delta_mass(0.0) == pytest.approx(1.0, abs=1e-6)
    for x in (0.0, math.pi):
        assert antipodal_green.delta_mass(x) == pytest.approx(1.0, abs=1e-6)
    euc = green_solve(models.euclidean_model(wg.Params(3, 3.0, 0.05, 0.1)))
    assert euc.delta_mass(0.0) == pytest.approx(1.0, abs=1e-6)


def test_sphere_single_basepoint_closed_form(sphere_green):
    assert float(sphere_green(np.pi / 2)[0]) == pytest.approx(U_HALF_SINGLE, rel=1e-9)
    s = np.linspace(0.01, np.pi - 0.01, 300)
    np.testing.assert_allclose(sphere_green(s), s3_single(s), rtol=1e-9)
    assert sphere_green.metadata["method"] == "singular-regular"


def test_sphere_antipodal_closed_form(antipodal_green):
    u, du, _ = antipodal_green.derivatives(np.pi / 2)
    assert u[0] == pytest.approx(U_HALF_ANTIPODAL, rel=1e-9)
    assert abs(du[0]) < 1e-10
    s = np.linspace(0.01, np.pi - 0.01, 300)
    np.testing.assert_allclose(antipodal_green(s), s3_antipodal(s), rtol=1e-9)
    assert antipodal_green.metadata["method"] == "symmetric"


def test_sphere_rates(sphere_green, antipodal_green):
    for sol, x in ((sphere_green, 0.0), (antipodal_green, 0.0), (antipodal_green, math.pi)):
        reports = green_asymptotics_check(sol, x)
        assert len(reports[0].samples) >= 6
        assert all(r.passed for r in reports)


@pytest.mark.parametrize("n", [4, 5])
def test_higher_dimensional_spheres(n):
    p = wg.Params(n, 3.0, n - 1.0, 0.2)
    sol = green_solve(models.sphere_model(p))
    assert sol.metadata["residual"] < 1e-8
    assert sol.delta_mass(0.0) == pytest.approx(1.0, abs=1e-6)
    assert all(r.passed for r in green_asymptotics_check(sol))


def test_reconstruction_identity(sphere_green):
    s = np.geomspace(1e-4, 1.5, 50)
    w = extract_w(sphere_green, 0.0, s)[0]
    np.testing.assert_allclose(w * sphere_green.b * s ** -1.0, sphere_green(s), rtol=1e-11)


def test_corrupted_profile_fails_rate_check(sphere_green):
    radii = wg.dyadic_radii(2.0 ** -4, 11)
    w, dw, _ = sphere_green.w(0.0, radii)
    # a 10% error in the singular coefficient leaves w bounded away from 1
    assert not wg.rate_check(radii, 1.1 * w - 1, "o(1)").passed
    assert not wg.rate_check(radii, dw + 0.5 / radii, "o(r^-1)").passed


def test_shift_above_first_eigenvalue_has_no_positive_solution():
    p = wg.Params(3, 3.0, 2.0, 0.2)
    with pytest.raises(NoPositiveSolution):
        green_solve(models.sphere_model(p), mu=2.5)


def test_w_outside_chart_rejected(sphere_green):
    with pytest.raises(DomainError):
        sphere_green.w(0.0, [4.0])
    with pytest.raises(DomainError):
        sphere_green.chart_branch(1.0)


def test_two_sided_bound(sphere_green):
    C = sphere_green.two_sided_constant(0.0)
    assert 1.0 <= C < 100.0


@pytest.mark.parametrize("K, F, R, exact", [
    (1.0, 2.0, 0.8, lambda r: np.cos(np.sqrt(3.0) * r) / (4 * np.pi * np.sin(r))),
    (-1.0, 0.5, 1.5, lambda r: np.cosh(np.sqrt(0.5) * r) / (4 * np.pi * np.sinh(r))),
    (-1.0, 3.0, 0.8, lambda r: np.cos(np.sqrt(2.0) * r) / (4 * np.pi * np.sinh(r))),
    (0.0, 1.0, 1.5, lambda r: np.cos(r) / (4 * np.pi * r)),
    # no regular admixture selects the even series, so cosh rather than exp(-r)
    (0.0, -1.0, 1.0, lambda r: np.cosh(r) / (4 * np.pi * r)),
])
def test_model_green_closed_forms(K, F, R, exact):
    g = model_green(K, F, 1.0, R, 3)
    r = np.linspace(0.01, R, 200)
    np.testing.assert_allclose(g(r), exact(r), rtol=1e-9)
    assert g.rate_report().passed


def test_model_green_radius_too_large():
    with pytest.raises(RadiusTooLarge):
        model_green(0.0, 1.0, 1.0, 2.0, 3)
    with pytest.raises(RadiusTooLarge):
        model_green(1.0, 0.0, 1.0, 3.5, 3)


@pytest.mark.parametrize("K, F, R", [(1.0, 2.0, 0.8), (-1.0, 0.5, 1.5), (0.0, 1.0, 1.2)])
def test_cross_solver_agreement(K, F, R):
    # potential -F with zero shift rescales to Lap u = -(F/gamma) u - delta/gamma
    p = wg.Params(3, GAMMA, LAM, EPS)
    sol = green_solve(models.space_form_model(p, K, F, R), mu=0.0)
    ref = model_green(K, F / GAMMA, 1 / GAMMA, R, 3)
    r = np.linspace(0.02, R, 100)
    np.testing.assert_allclose(sol(r), ref(r), rtol=1e-8)


@settings(max_examples=15, deadline=None)
@given(gamma=st.floats(2.2, 6.0), eps=st.floats(0.05, 0.5))
def test_sphere_green_positive_and_normalised(gamma, eps):
    sol = green_solve(models.sphere_model(wg.Params(3, gamma, 2.0, eps)))
    s = np.linspace(0.05, np.pi - 0.05, 50)
    assert np.all(sol(s) > 0)
    assert sol.delta_mass(0.0) == pytest.approx(1.0, abs=1e-6)
    assert green_asymptotics_check(sol)[0].passed
