"""Radial Green functions of ``-gamma Delta + V - mu`` with unit masses at poles.

Near a basepoint at geodesic distance ``s`` we write
``u = b s^{2-n} w(s)`` with ``b = 1/(gamma (n-2) |S^{n-1}|)``.  With
``m = phi'/phi - 1/s`` (regular, ``O(s)``) the equation becomes

    w'' + (3-n) w'/s + (n-1) m w' = Q w,
    Q = (V - mu)/gamma - (n-1)(2-n) m/s,

whose indicial roots are ``0`` and ``n-2``.  The Frobenius branch starting at
``w(0) = 1`` fixes the unit mass; the second root is the regular solution of
the original equation, and its coefficient (the admixture) is the free
parameter fixed by the far end.  Everything is linear, so shooting reduces to
superposing two basis solutions and solving a small linear system.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import warped_geometry as wg
from .errors import (DomainError, InsufficientDataError, NoPositiveSolution,
                     RadiusTooLarge, SolverDiverged)
from .models import ModelManifold

R_INNER = 1e-5
RTOL = 1e-12
ATOL = 1e-12
RESIDUAL_TOL = 1e-8


def green_coefficient(n: int, gamma: float = 1.0, mass: float = 1.0) -> float:
    """Leading coefficient ``mass / (gamma (n-2) |S^{n-1}|)`` of the singularity."""
    return mass / (gamma * (n - 2) * wg.sphere_area(n))


def _frobenius_start(n: int, Q0: float, s: float):
    """Start values of the mass-one Frobenius branch (no ``s^{n-2}`` admixture)."""
    if n == 3:
        c2 = 0.5 * Q0
        return 1 + c2 * s * s, 2 * c2 * s
    if n == 4:
        k = 0.5 * Q0
        return 1 + k * s * s * math.log(s), k * (2 * s * math.log(s) + s)
    c2 = Q0 / (2.0 * (4 - n))
    return 1 + c2 * s * s, 2 * c2 * s


def _stack(y, d1, d2):
    d1, d2 = np.broadcast_arrays(np.atleast_1d(d1), np.atleast_1d(d2))
    return np.vstack([d1, d2]).reshape(np.shape(y))


class _PolarChart:
    """Coefficients of the radial equation in the distance ``s`` to a pole."""

    def __init__(self, model: ModelManifold, pole: float, mu: float, gamma: float):
        self.model = model
        self.warp = model.warp
        self.pole = pole
        self.sigma = model.warp.pole_direction(pole)
        self.n = model.n
        self.mu = mu
        self.gamma = gamma

    def r(self, s):
        return self.pole + self.sigma * np.asarray(s, dtype=float)

    def m_terms(self, s):
        """Return ``(m, m/s)``; the cap expansion is used near the pole."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        phi, d1 = self.warp.derivatives(self.r(s), order=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = self.sigma * d1 / phi - 1.0 / s
        m_s = m / s
        small = s < self.warp.pole_cutoff
        if np.any(small):
            c3, c5, c7 = self.warp.pole_series(self.pole)
            t = s[small]
            t2 = t * t
            den = 1 + t2 * (c3 + t2 * (c5 + t2 * c7))
            m_s[small] = (2 * c3 + t2 * (4 * c5 + t2 * 6 * c7)) / den
            m[small] = t * m_s[small]
        return m, m_s

    def q_potential(self, s):
        return (self.model.V(self.r(s)) - self.mu) / self.gamma

    def w_rhs(self, s, y):
        w, dw = y
        m, m_s = self.m_terms(s)
        Q = self.q_potential(s) - (self.n - 1) * (2 - self.n) * m_s
        d2w = Q * w - (self.n - 1) * m * dw - (3 - self.n) * dw / s
        return _stack(y, dw, d2w)

    def u_rhs(self, s, y):
        u, du = y
        m, _ = self.m_terms(s)
        d2u = self.q_potential(s) * u - (self.n - 1) * (1.0 / s + m) * du
        return _stack(y, du, d2u)


def _integrate(rhs, s0, s1, y0, rtol, atol):
    sol = solve_ivp(lambda s, y: rhs(s, y).ravel(), (s0, s1), y0, method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        raise SolverDiverged(f"integration failed: {sol.message}",
                             {"interval": (s0, s1), "reached": float(sol.t[-1])})
    return sol


class SingularBranch:
    """Green branch around a basepoint, ``w = Y1 + A * Y2``."""

    def __init__(self, chart: _PolarChart, s_end: float, s_inner: float = R_INNER,
                 rtol: float = RTOL, atol: float = ATOL):
        self.chart = chart
        self.s_inner = s_inner
        self.s_end = s_end
        n = chart.n
        m, m_s = chart.m_terms(s_inner)
        Q0 = float(chart.q_potential(s_inner) - (n - 1) * (2 - n) * m_s[0])
        d2 = float(chart.q_potential(s_inner)) / (2 * n)
        y1 = _frobenius_start(n, Q0, s_inner)
        y2 = (s_inner ** (n - 2) * (1 + d2 * s_inner ** 2),
              (n - 2) * s_inner ** (n - 3) + n * d2 * s_inner ** (n - 1))
        self.sol1 = _integrate(chart.w_rhs, s_inner, s_end, y1, rtol, atol)
        self.sol2 = _integrate(chart.w_rhs, s_inner, s_end, y2, rtol,
                               atol * s_inner ** (n - 2))
        self.A = 0.0

    def w(self, s):
        """``(w, w', w'')`` at distances ``s`` from the basepoint."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < self.s_inner * (1 - 1e-12)) or np.any(s > self.s_end * (1 + 1e-12)):
            raise DomainError("distance outside the resolved polar chart")
        y = self.sol1.sol(s) + self.A * self.sol2.sol(s)
        d2 = self.chart.w_rhs(s, y)[1]
        return y[0], y[1], d2

    def basis_u(self, s):
        """``u`` and ``du/dr`` of both basis solutions at a single distance."""
        n, b, sigma = self.chart.n, self.b, self.chart.sigma
        out = []
        for sol in (self.sol1, self.sol2):
            w, dw = sol.sol(s)
            out.append((b * s ** (2 - n) * w, sigma * b * s ** (2 - n) * (dw + (2 - n) * w / s)))
        return out

    def u(self, s):
        n, b = self.chart.n, self.b
        w, dw, d2w = self.w(s)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lead = b * s ** (2 - n)
        u = lead * w
        du = self.chart.sigma * lead * (dw + (2 - n) * w / s)
        d2u = lead * (d2w + 2 * (2 - n) * dw / s + (2 - n) * (1 - n) * w / s ** 2)
        return u, du, d2u

    def residual(self, samples: int = 400) -> float:
        """Max ODE residual of the dense solution, derivatives by finite differences."""
        lo, hi = self.s_inner * 4, self.s_end * (1 - 1e-6)
        s = np.geomspace(lo, hi, samples)
        h = 1e-3 * s
        y = lambda t: self.sol1.sol(t) + self.A * self.sol2.sol(t)
        fd = lambda k: (-y(s + 2 * h)[k] + 8 * y(s + h)[k] - 8 * y(s - h)[k] + y(s - 2 * h)[k]) / (12 * h)
        state = y(s)
        rhs = self.chart.w_rhs(s, state)
        err = np.maximum(np.abs(fd(0) - state[1]), np.abs(fd(1) - rhs[1]) * s)
        return float(np.max(err / np.maximum(1.0, np.abs(state[0]))))


class RegularBranch:
    """Solution regular at a pole that carries no mass, ``u = C * y``."""

    def __init__(self, chart: _PolarChart, s_end: float, s_inner: float = R_INNER,
                 rtol: float = RTOL, atol: float = ATOL):
        self.chart = chart
        self.s_inner = s_inner
        self.s_end = s_end
        d2 = float(chart.q_potential(s_inner)) / (2 * chart.n)
        y0 = (1 + d2 * s_inner ** 2, 2 * d2 * s_inner)
        self.sol = _integrate(chart.u_rhs, s_inner, s_end, y0, rtol, atol)
        self.C = 1.0

    def basis_u(self, s):
        y, dy = self.sol.sol(s)
        return y, self.chart.sigma * dy

    def u(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        # below the start radius the two-term series is exact to O(s^4)
        inner = s < self.s_inner
        y = self.sol.sol(np.maximum(s, self.s_inner))
        d2 = self.chart.u_rhs(np.maximum(s, self.s_inner), y)[1]
        if np.any(inner):
            c = float(self.chart.q_potential(self.s_inner)) / (2 * self.chart.n)
            y[0, inner] = 1 + c * s[inner] ** 2
            y[1, inner] = 2 * c * s[inner]
            d2[inner] = 2 * c
        return self.C * y[0], self.C * self.chart.sigma * y[1], self.C * d2

    def residual(self, samples: int = 400) -> float:
        s = np.geomspace(self.s_inner * 4, self.s_end * (1 - 1e-6), samples)
        h = 1e-3 * s
        y = self.sol.sol
        fd = lambda k: (-y(s + 2 * h)[k] + 8 * y(s + h)[k] - 8 * y(s - h)[k] + y(s - 2 * h)[k]) / (12 * h)
        state = y(s)
        rhs = self.chart.u_rhs(s, state)
        err = np.maximum(np.abs(fd(0) - state[1]), np.abs(fd(1) - rhs[1]) * s)
        return float(np.max(err / np.maximum(1.0, np.abs(state[0]))))


@dataclass
class GreenSolution:
    """Positive radial Green function with its normalised profiles."""

    model: ModelManifold
    b: float
    mu: float
    branches: list
    split: Optional[float]
    metadata: Dict[str, float] = field(default_factory=dict)

    def _branch_index(self, r):
        if self.split is None:
            return np.zeros(np.shape(r), dtype=int)
        first = self.branches[0]
        s = first.chart.sigma * (r - first.chart.pole)
        return np.where(s <= first.chart.sigma * (self.split - first.chart.pole), 0, 1)

    def derivatives(self, r):
        """``(u, u', u'')`` in the model coordinate ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = self._branch_index(r)
        out = np.zeros((3, r.size))
        for k, br in enumerate(self.branches):
            sel = idx == k
            if np.any(sel):
                s = br.chart.sigma * (r[sel] - br.chart.pole)
                out[:, sel] = np.vstack(br.u(s))
        return out[0], out[1], out[2]

    def __call__(self, r):
        return self.derivatives(r)[0]

    def as_radial(self) -> wg.RadialFunction:
        return wg.RadialFunction(lambda r: self.derivatives(r)[0],
                                 lambda r: self.derivatives(r)[1],
                                 lambda r: self.derivatives(r)[2])

    @property
    def basepoints(self):
        return self.model.basepoints

    def chart_branch(self, basepoint: float) -> SingularBranch:
        for br in self.branches:
            if isinstance(br, SingularBranch) and br.chart.pole == basepoint:
                return br
        raise DomainError(f"{basepoint} is not a basepoint of this solution")

    def chart_radius(self, basepoint: float) -> float:
        return self.model.warp.domain.length

    def w(self, basepoint: float, s):
        """``(w, w', w'')`` of the profile ``u / (b s^{2-n})`` around ``basepoint``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s <= 0) or np.any(s > self.chart_radius(basepoint)):
            raise DomainError("radius outside the polar chart")
        br = self.chart_branch(basepoint)
        inside = s <= br.s_end
        n = self.model.n
        out = np.zeros((3, s.size))
        if np.any(inside):
            out[:, inside] = np.vstack(br.w(np.maximum(s[inside], br.s_inner)))
        if np.any(~inside):
            t = s[~inside]
            u, du, d2u = self.derivatives(br.chart.r(t))
            du = br.chart.sigma * du
            lead = 1.0 / (self.b * t ** (2 - n))
            w = lead * u
            dw = lead * (du - (2 - n) * u / t)
            d2w = lead * (d2u - 2 * (2 - n) * du / t + (2 - n) * (3 - n) * u / t ** 2)
            out[:, ~inside] = np.vstack([w, dw, d2w])
        return out[0], out[1], out[2]

    def delta_mass(self, basepoint: float, levels: int = 6) -> float:
        """Flux ``-gamma * int_{|x|=rho} du/dr`` extrapolated to ``rho -> 0``."""
        br = self.chart_branch(basepoint)
        rho = br.s_inner * 8 * 2.0 ** np.arange(levels)
        w, dw, _ = br.w(rho)
        phi = self.model.warp(br.chart.r(rho))
        n = self.model.n
        flux = (phi / rho) ** (n - 1) * ((n - 2) * w - rho * dw) / (n - 2)
        return float(np.polyval(np.polyfit(rho, flux, 2), 0.0))

    def two_sided_constant(self, basepoint: float) -> float:
        """Smallest ``C`` with ``C^-1 <= w <= C`` on the resolved chart."""
        br = self.chart_branch(basepoint)
        w = br.w(np.geomspace(br.s_inner, br.s_end, 400))[0]
        return float(max(np.max(w), 1.0 / np.min(w)))

    def write_csv(self, path, basepoint: Optional[float] = None, samples: int = 1001):
        basepoint = self.basepoints[0] if basepoint is None else basepoint
        br = self.chart_branch(basepoint)
        s = np.geomspace(br.s_inner, br.s_end, samples)
        u = self.derivatives(br.chart.r(s))[0]
        w, dw, d2w = self.w(basepoint, s)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["r", "u", "w", "dw", "ddw"])
            for row in zip(s, u, w, dw, d2w):
                out.writerow([f"{v:.17g}" for v in row])


def _symmetric(model: ModelManifold, samples: int = 64) -> bool:
    dom = model.warp.domain
    x = np.linspace(0.0, dom.length, samples + 2)[1:-1]
    left, right = dom.r_min + x, dom.r_max - x
    same = lambda a, b: np.all(np.abs(a - b) <= 1e-10 * np.maximum(1.0, np.abs(a)))
    return bool(same(model.warp(left), model.warp(right)) and same(model.V(left), model.V(right)))


def _check_spectral_gap(model: ModelManifold, mu: float, cells: int = 2048):
    from .spectral import lambda1_radial

    lam1 = lambda1_radial(model, cells=cells, fiber_gap=False).lambda1
    if not mu < lam1 - 1e-9:
        raise NoPositiveSolution(
            f"lambda - epsilon/2 = {mu:.6g} is not below lambda_1 = {lam1:.6g}")
    return lam1


def green_solve(model: ModelManifold, s_inner: float = R_INNER, mu: Optional[float] = None,
                check_spectrum: bool = True) -> GreenSolution:
    """Solve ``-gamma Delta u + V u = mu u + sum of unit masses at the basepoints``.

    ``mu`` defaults to ``lambda - epsilon/2``.
    """
    p = model.params
    mu = p.green_shift if mu is None else mu
    n, gamma = p.n, p.gamma
    dom = model.warp.domain
    if not isinstance(dom, wg.Interval) or not model.basepoints:
        raise DomainError("green_solve needs an interval model with at least one basepoint")
    b = green_coefficient(n, gamma)
    meta = {}
    if model.closed and check_spectrum:
        meta["lambda1"] = _check_spectral_gap(model, mu)
    charts = {p_: _PolarChart(model, p_, mu, gamma) for p_, _ in model.warp.poles}
    mid = 0.5 * (dom.r_min + dom.r_max)
    half = 0.5 * dom.length

    if len(model.basepoints) == 2:
        x1, x2 = model.basepoints
        br1 = SingularBranch(charts[x1], half, s_inner)
        br2 = SingularBranch(charts[x2], half, s_inner)
        br1.b = br2.b = b
        if _symmetric(model):
            (_, d1), (_, d2) = br1.basis_u(half)
            br1.A = br2.A = -d1 / d2
            meta["method"] = "symmetric"
        else:
            (u1, d1), (v1, e1) = br1.basis_u(half)
            (u2, d2), (v2, e2) = br2.basis_u(half)
            # u1 + A v1 = u2 + B v2 and the same for r-derivatives
            M = np.array([[v1, -v2], [e1, -e2]])
            rhs = np.array([u2 - u1, d2 - d1])
            br1.A, br2.A = _solve2(M, rhs)
            meta["method"] = "two-sided"
        branches, split = [br1, br2], mid
    elif dom.closed:
        x1 = model.basepoints[0]
        other = dom.r_max if x1 == dom.r_min else dom.r_min
        br1 = SingularBranch(charts[x1], half, s_inner)
        br1.b = b
        reg = RegularBranch(charts[other], half, s_inner)
        (u1, d1), (v1, e1) = br1.basis_u(half)
        y, dy = reg.basis_u(half)
        M = np.array([[v1, -y], [e1, -dy]])
        rhs = np.array([-u1, -d1])
        br1.A, reg.C = _solve2(M, rhs)
        branches, split = [br1, reg], mid
        meta["method"] = "singular-regular"
    else:
        x1 = model.basepoints[0]
        if x1 != dom.r_min or dom.right != wg.BOUNDARY:
            raise DomainError("open models need the basepoint at the left pole")
        br1 = SingularBranch(charts[x1], dom.length, s_inner)
        br1.b = b
        if model.far_condition == "decay":
            R = dom.length
            phi, dphi = model.warp.derivatives(np.asarray(dom.r_max), order=1)
            (u1, d1), (v1, e1) = br1.basis_u(R)
            c1 = phi * d1 + (n - 2) * dphi * u1
            c2 = phi * e1 + (n - 2) * dphi * v1
            br1.A = float(-c1 / c2) if c2 != 0 else 0.0
        branches, split = [br1], None
        meta["method"] = f"open-{model.far_condition}"

    sol = GreenSolution(model, b, mu, branches, split, meta)
    meta["admixture"] = [float(getattr(br, "A", getattr(br, "C", 0.0))) for br in branches]
    meta["residual"] = max(br.residual() for br in branches)
    _check_positive(sol)
    return sol


def _solve2(M, rhs):
    if not np.all(np.isfinite(M)) or np.linalg.cond(M) > 1e14:
        raise SolverDiverged("matching system is singular", {"matrix": M.tolist()})
    return (float(v) for v in np.linalg.solve(M, rhs))


def _check_positive(sol: GreenSolution, samples: int = 2000):
    dom = sol.model.warp.domain
    r = np.linspace(dom.r_min, dom.r_max, samples + 2)[1:-1]
    for x in sol.basepoints:
        r = r[np.abs(r - x) > 2 * R_INNER]
    u = sol(r)
    if np.any(~(u > 0)):
        i = int(np.argmin(u))
        raise NoPositiveSolution(f"Green function changes sign near r = {r[i]:.6g}")


def extract_w(sol: GreenSolution, basepoint: float, radii):
    """Sampled ``(w, w', w'')`` at the given distances from ``basepoint``."""
    return sol.w(basepoint, radii)


def green_asymptotics_check(sol: GreenSolution, basepoint: Optional[float] = None,
                            levels: int = 11, start: float = 2.0 ** -4):
    """Rate reports for ``|w - 1|``, ``|w'|`` and ``|w''|`` on dyadic radii."""
    basepoint = sol.basepoints[0] if basepoint is None else basepoint
    br = sol.chart_branch(basepoint)
    radii = wg.dyadic_radii(start, levels)
    if radii[-1] > 1e-4 or radii[-1] < br.s_inner:
        raise InsufficientDataError("dyadic radii must reach below 1e-4 within the resolved chart")
    w, dw, d2w = sol.w(basepoint, radii)
    return (wg.rate_check(radii, w - 1, "o(1)"),
            wg.rate_check(radii, dw, "o(r^-1)"),
            wg.rate_check(radii, d2w, "o(r^-2)"))


# ---------------------------------------------------------------------------
# model Green function on a space form


@dataclass
class ModelGreen:
    K: float
    F: float
    a: float
    R: float
    n: int
    b: float
    r_inner: float
    sol: object = field(repr=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.sol.sol(r)[0]

    def derivative(self, r):
        return self.sol.sol(np.asarray(r, dtype=float))[1]

    def normalised_excess(self, r):
        """``G r^{n-2} / b - 1``, which tends to zero at the centre."""
        r = np.asarray(r, dtype=float)
        return self(r) * r ** (self.n - 2) / self.b - 1.0

    def rate_report(self, start: float = 2.0 ** -4, levels: int = 11) -> wg.RateReport:
        radii = wg.dyadic_radii(min(start, self.R / 2), levels)
        return wg.rate_check(radii, self.normalised_excess(radii), "o(1)")


def model_green(K: float, F: float, a: float, R: float, n: int,
                r_inner: float = R_INNER) -> ModelGreen:
    """Radial solution of ``Delta G = -F G - a delta`` on the ball ``B(R)`` of ``M_K``.

    Integrated directly in ``G`` (not in the normalised profile) with the
    closed-form mean curvature of geodesic spheres in ``M_K``; the branch is the
    one with no regular admixture.
    """
    k = math.sqrt(abs(K))
    if K > 0 and R >= math.pi / k:
        raise RadiusTooLarge("ball reaches the antipodal point")
    if K > 0:
        mean = lambda r: k / np.tan(k * r)
    elif K < 0:
        mean = lambda r: k / np.tanh(k * r)
    else:
        mean = lambda r: 1.0 / r

    def rhs(r, y):
        return [y[1], -(n - 1) * mean(r) * y[1] - F * y[0]]

    b = a / ((n - 2) * wg.sphere_area(n))
    # the mean curvature is 1/r - K r/3 + O(r^3), so m/s -> -K/3 at the centre
    Q0 = -F + (n - 1) * (n - 2) * (-K / 3.0)
    w0, dw0 = _frobenius_start(n, Q0, r_inner)
    lead = b * r_inner ** (2 - n)
    y0 = [lead * w0, lead * (dw0 + (2 - n) * w0 / r_inner)]
    sol = solve_ivp(rhs, (r_inner, R), y0, method="DOP853", rtol=1e-12,
                    atol=1e-14 * b, dense_output=True)
    if sol.status != 0:
        raise SolverDiverged(f"model Green integration failed: {sol.message}")
    out = ModelGreen(K, F, a, R, n, b, r_inner, sol)
    r = np.geomspace(r_inner, R, 2000)
    G, dG = out(r), out.derivative(r)
    if np.any(G <= 0) or np.any(dG >= 0):
        raise RadiusTooLarge(f"no positive decreasing solution on (0, {R:g}]")
    return out
