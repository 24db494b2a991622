import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_tunnel import models, spectral
from spectral_tunnel import warped_geometry as wg
from spectral_tunnel.errors import PreconditionError

PARAMS = wg.Params(3, 3.0, 2.0, 0.2)
ONE = wg.RadialFunction(lambda r: np.ones_like(r), lambda r: np.zeros_like(r),
                        lambda r: np.zeros_like(r))


@pytest.fixture(scope="module")
def sphere():
    return models.sphere_model(PARAMS)


def test_round_sphere_first_eigenvalue(sphere):
    res = spectral.lambda1_radial(sphere, cells=2048)
    assert res.lambda1 == pytest.approx(2.0, abs=1e-10)
    assert res.fiber_mode_gap >= 0
    assert res.sign_ratio > 0
    assert res.bc == "pole-regular/pole-regular"


@pytest.mark.parametrize("n", [4, 5])
def test_higher_spheres(n):
    model = models.sphere_model(wg.Params(n, 3.0, n - 1.0, 0.2))
    assert spectral.lambda1_radial(model, cells=2048).lambda1 == pytest.approx(n - 1, abs=1e-10)


def test_dirichlet_ball_converges_to_pi_squared():
    ball = models.euclidean_model(PARAMS, r_max=1.0)
    errors = []
    for cells in (512, 1024, 2048):
        lam = spectral.lambda1_radial(ball, gamma=1.0, cells=cells, fiber_gap=False).lambda1
        errors.append(abs(lam - math.pi ** 2))
    assert errors[-1] < 1e-4
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.1)
    res = spectral.lambda1_radial(ball, gamma=1.0, cells=1024, extrapolate=True, fiber_gap=False)
    assert res.extrapolated == pytest.approx(math.pi ** 2, rel=1e-7)


def test_cylinder_constant_ground_state_and_first_mode():
    cyl = models.cylinder_model(PARAMS)
    res = spectral.lambda1_radial(cyl, cells=1024)
    assert res.lambda1 == pytest.approx(0.0, abs=1e-10)
    assert res.bc == "periodic"
    q = spectral.rayleigh_quotient(cyl, np.cos, cells=4096)
    assert q == pytest.approx(PARAMS.gamma, rel=1e-6)


def test_warped_circle_refinement_is_stable():
    model = models.ModelManifold(PARAMS, wg.warped_circle(), (), None, name="warped-circle")
    coarse = spectral.lambda1_radial(model, cells=4096, extrapolate=True)
    fine = spectral.lambda1_radial(model, cells=8192, extrapolate=True)
    assert coarse.extrapolated == pytest.approx(fine.extrapolated, abs=1e-8)
    assert fine.fiber_mode_gap >= 0
    assert fine.sign_ratio > 0


def test_defect_of_constant_on_sphere(sphere):
    r = np.linspace(0.0, math.pi, 101)
    defect = spectral.supersolution_defect(sphere, ONE, r)
    np.testing.assert_allclose(defect.D, 0.2, atol=1e-12)
    assert defect.nonnegative


def test_defect_needs_positive_candidate(sphere):
    neg = wg.RadialFunction(lambda r: np.cos(r), lambda r: -np.sin(r), lambda r: -np.cos(r))
    with pytest.raises(PreconditionError):
        spectral.supersolution_defect(sphere, neg, np.linspace(0.1, 3.0, 10))


def test_defect_and_eigenvalue_are_consistent(sphere):
    rep = spectral.eig_vs_defect_consistency(sphere, ONE, np.linspace(0, math.pi, 51), cells=1024)
    assert rep.consistent
    assert rep.lambda1 >= rep.bound


def test_radial_grid_focus_keeps_endpoints():
    faces = spectral.radial_grid(wg.Interval(-1.0, 1.0), 100, focus=[(0.0, 0.01, 50.0)])
    assert faces[0] == -1.0 and faces[-1] == 1.0
    assert np.all(np.diff(faces) > 0)
    h = np.diff(faces)
    assert h[50] < h[0] / 10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=6, max_size=6).filter(
    lambda c: max(abs(x) for x in c) > 1e-3))
def test_rayleigh_quotient_bounded_below(coef):
    model = models.sphere_model(PARAMS)
    disc = spectral.discretize(model, cells=512)
    lam = spectral.lambda1_radial(model, cells=512, fiber_gap=False).lambda1
    fn = lambda r: sum(c * np.cos(k * r) for k, c in enumerate(coef))
    q = spectral.rayleigh_quotient(model, fn, disc=disc)
    assert q >= lam - 1e-8
