"""Closed-form geometry of rotationally symmetric metrics.

A metric ``dr^2 + phi(r)^2 g_round`` on an interval or a circle is described
by a :class:`WarpProfile`.  Everything here is a pure function of the profile;
curvatures are returned per unit direction (radial and tangential Ricci).

Near a pole (``phi(p) = 0``, ``|phi'(p)| = 1``) the ratios ``phi''/phi`` and
``(1 - phi'^2)/phi^2`` are evaluated from the odd cap expansion
``phi = s + c3 s^3 + c5 s^5 + c7 s^7`` in the distance ``s`` to the pole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, InsufficientDataError, SingularityError

POLE = "pole"
BOUNDARY = "boundary"
PERIODIC = "periodic"

EPS = np.finfo(float).eps
TOL = 1e-9


def _close(a, b, tol=TOL):
    """Absolute-or-relative closeness, whichever is looser."""
    return np.abs(a - b) <= tol * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


@dataclass(frozen=True)
class Params:
    n: int
    gamma: float
    lam: float = 0.0
    epsilon: float = 0.1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"dimension must be an integer >= 3, got {self.n}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def critical_gamma(self) -> float:
        return (self.n - 1) / (self.n - 2)

    @property
    def supercritical(self) -> bool:
        return self.gamma > self.critical_gamma

    @property
    def green_shift(self) -> float:
        """Spectral shift of the Green equation, ``lambda - epsilon/2``."""
        return self.lam - 0.5 * self.epsilon

    @property
    def target(self) -> float:
        """Bound certified after surgery, ``lambda - epsilon``."""
        return self.lam - self.epsilon


@dataclass(frozen=True)
class Interval:
    r_min: float
    r_max: float
    left: str = POLE
    right: str = POLE

    def __post_init__(self):
        if not self.r_max > self.r_min:
            raise DomainError("empty interval")
        for end in (self.left, self.right):
            if end not in (POLE, BOUNDARY):
                raise DomainError(f"unknown end condition {end!r}")

    @property
    def length(self) -> float:
        return self.r_max - self.r_min

    @property
    def closed(self) -> bool:
        return self.left == POLE and self.right == POLE


@dataclass(frozen=True)
class Circle:
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise DomainError("circle period must be positive")

    @property
    def length(self) -> float:
        return self.period

    closed = True


def _fd_derivative(fun, r, k):
    """Fourth-order centred difference of order ``k`` in 1..3."""
    h = EPS ** (1.0 / (4 + k)) * np.maximum(1.0, np.abs(r))
    if k == 1:
        return (-fun(r + 2 * h) + 8 * fun(r + h) - 8 * fun(r - h) + fun(r - 2 * h)) / (12 * h)
    if k == 2:
        return (-fun(r + 2 * h) + 16 * fun(r + h) - 30 * fun(r)
                + 16 * fun(r - h) - fun(r - 2 * h)) / (12 * h * h)
    if k == 3:
        return (-fun(r + 3 * h) + 8 * fun(r + 2 * h) - 13 * fun(r + h)
                + 13 * fun(r - h) - 8 * fun(r - 2 * h) + fun(r - 3 * h)) / (8 * h ** 3)
    raise ValueError(k)


class WarpProfile:
    """Radial warp ``phi`` of the metric ``dr^2 + phi(r)^2 g_round``.

    Derivative callables are optional; missing ones are replaced by
    fourth-order centred differences of ``phi`` (which must then be evaluable
    slightly outside the domain).
    """

    def __init__(self, phi: Callable, domain: Union[Interval, Circle],
                 dphi: Optional[Callable] = None, d2phi: Optional[Callable] = None,
                 d3phi: Optional[Callable] = None, name: str = "custom",
                 pole_cutoff: float = 1e-3):
        self.phi = phi
        self.domain = domain
        self.name = name
        self.pole_cutoff = pole_cutoff
        self.analytic = (dphi is not None, d2phi is not None, d3phi is not None)
        self._d = [
            dphi or (lambda r: _fd_derivative(phi, r, 1)),
            d2phi or (lambda r: _fd_derivative(phi, r, 2)),
            d3phi or (lambda r: _fd_derivative(phi, r, 3)),
        ]
        self._series = {}

    def __repr__(self):
        return f"WarpProfile({self.name!r}, {self.domain})"

    def __call__(self, r):
        return self.phi(np.asarray(r, dtype=float))

    def derivatives(self, r, order: int = 2):
        """Return ``(phi, phi', ..., phi^(order))`` at ``r``."""
        r = np.asarray(r, dtype=float)
        out = [self.phi(r)]
        for k in range(order):
            out.append(self._d[k](r))
        return tuple(np.broadcast_to(v, r.shape).astype(float) for v in out)

    @property
    def poles(self):
        """List of ``(position, direction)``; direction points into the domain."""
        if isinstance(self.domain, Circle):
            return []
        out = []
        if self.domain.left == POLE:
            out.append((self.domain.r_min, 1.0))
        if self.domain.right == POLE:
            out.append((self.domain.r_max, -1.0))
        return out

    def pole_direction(self, p: float) -> float:
        for q, sigma in self.poles:
            if q == p:
                return sigma
        raise DomainError(f"{p} is not a pole of {self!r}")

    def pole_series(self, p: float):
        """Odd cap coefficients ``(c3, c5, c7)`` at the pole ``p``.

        ``c3`` comes from ``phi'''`` when it is analytic; the rest are fitted
        by polynomial extrapolation of ``(psi(s) - s)/s^3`` in ``s^2`` on a
        dyadic sequence of distances.
        """
        if p in self._series:
            return self._series[p]
        sigma = self.pole_direction(p)
        h = 0.1 * min(1.0, 0.5 * self.domain.length)
        s = h / 2.0 ** np.arange(4)
        g = (self.phi(p + sigma * s) - s) / s ** 3
        if self.analytic[2]:
            c3 = float(sigma * self._d[2](np.asarray(p, dtype=float))) / 6.0
            vander = np.vander(s[:3] ** 2, 4, increasing=True)[:, 1:]
            c5, c7, _ = np.linalg.solve(vander, g[:3] - c3)
        else:
            vander = np.vander(s ** 2, 4, increasing=True)
            c3, c5, c7, _ = np.linalg.solve(vander, g)
        coef = (float(c3), float(c5), float(c7))
        self._series[p] = coef
        return coef

    def _near_poles(self, r):
        """Yield ``(mask, s, (c3, c5, c7))`` for points within the cutoff of a pole."""
        for p, sigma in self.poles:
            s = sigma * (r - p)
            mask = (s >= 0) & (s < self.pole_cutoff)
            if np.any(mask):
                yield mask, s[mask], self.pole_series(p)

    def check_invariants(self, samples: int = 2001) -> dict:
        """Numerical check of positivity, cap conditions and periodicity."""
        dom = self.domain
        report = {}
        if isinstance(dom, Circle):
            r = np.linspace(0.0, dom.period, samples)
            report["positive"] = bool(np.all(self.phi(r) > 0))
            vals = self.derivatives(np.array([0.0, dom.period]), order=3)
            report["periodic"] = bool(all(_close(v[0], v[1], 1e-6) for v in vals))
            return report
        r = np.linspace(dom.r_min, dom.r_max, samples)[1:-1]
        report["positive"] = bool(np.all(self.phi(r) > 0))
        for p, sigma in self.poles:
            v0, v1, v2 = (float(x) for x in self.derivatives(np.asarray(p), order=2))
            report[f"cap@{p:g}"] = bool(abs(v0) <= TOL and abs(abs(v1) - 1) <= 1e-6
                                        and abs(v2) <= 1e-6)
        return report


@dataclass(frozen=True)
class RadialFunction:
    """A radial function with its first two derivatives."""

    f: Callable
    df: Callable
    d2f: Callable

    def __call__(self, r):
        return self.f(np.asarray(r, dtype=float))

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return self.f(r), self.df(r), self.d2f(r)

    @classmethod
    def constant(cls, c: float = 1.0):
        return cls(lambda r: np.full_like(r, c, dtype=float),
                   lambda r: np.zeros_like(r, dtype=float),
                   lambda r: np.zeros_like(r, dtype=float))


@dataclass(frozen=True)
class CurvatureSample:
    r: np.ndarray
    ric_rr: np.ndarray
    ric_ee: np.ndarray
    ric_mixed: np.ndarray
    ric_min: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ric_min", np.minimum(self.ric_rr, self.ric_ee))


@dataclass(frozen=True)
class RateReport:
    claimed: str
    samples: tuple
    slope: float
    passed: bool
    margin: float = 0.5


# ---------------------------------------------------------------------------
# curvature


def sphere_area(n: int) -> float:
    """Volume of the unit round sphere ``S^(n-1)``."""
    if n < 2:
        raise DomainError(f"sphere_area needs n >= 2, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def sectional_curvatures(warp: WarpProfile, r, at_pole: str = "series"):
    """Return ``(K_rad, K_sph) = (-phi''/phi, (1 - phi'^2)/phi^2)``.

    ``K_rad`` is the sectional curvature of planes containing the radial
    direction, ``K_sph`` that of planes tangent to the fibre.
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    phi, d1, d2 = warp.derivatives(r, order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rad = -d2 / phi
        k_sph = (1.0 - d1 * d1) / (phi * phi)
    for mask, s, (c3, c5, c7) in warp._near_poles(r):
        if at_pole == "error":
            raise SingularityError("curvature requested within the pole cutoff")
        s2 = s * s
        den = 1.0 + s2 * (c3 + s2 * (c5 + s2 * c7))
        k_rad[mask] = -(6 * c3 + s2 * (20 * c5 + s2 * 42 * c7)) / den
        k_sph[mask] = -(6 * c3 + s2 * ((9 * c3 * c3 + 10 * c5)
                                        + s2 * (30 * c3 * c5 + 14 * c7))) / den ** 2
    if scalar:
        return k_rad[0], k_sph[0]
    return k_rad, k_sph


def ricci_radial(warp: WarpProfile, n: int, r, at_pole: str = "series"):
    """``Ric(d_r, d_r) = -(n-1) phi''/phi``."""
    r = np.asarray(r, dtype=float)
    phi, _, d2 = (np.atleast_1d(v) for v in warp.derivatives(r, order=2))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(n - 1) * d2 / phi
    rr = np.atleast_1d(r)
    for mask, s, (c3, c5, c7) in warp._near_poles(rr):
        if at_pole == "error":
            raise SingularityError("ricci_radial evaluated within the pole cutoff")
        s2 = s * s
        den = 1.0 + s2 * (c3 + s2 * (c5 + s2 * c7))
        out[mask] = -(n - 1) * (6 * c3 + s2 * (20 * c5 + s2 * 42 * c7)) / den
    return out[0] if r.ndim == 0 else out


def ricci_tangential(warp: WarpProfile, n: int, r, at_pole: str = "series"):
    """Ricci curvature of a unit fibre direction, ``-phi''/phi + (n-2)(1-phi'^2)/phi^2``."""
    r = np.asarray(r, dtype=float)
    rr = np.atleast_1d(r)
    phi, d1, d2 = warp.derivatives(rr, order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -d2 / phi + (n - 2) * (1.0 - d1 * d1) / (phi * phi)
    for mask, s, (c3, c5, c7) in warp._near_poles(rr):
        if at_pole == "error":
            raise SingularityError("ricci_tangential evaluated within the pole cutoff")
        s2 = s * s
        den = 1.0 + s2 * (c3 + s2 * (c5 + s2 * c7))
        k_rad = -(6 * c3 + s2 * (20 * c5 + s2 * 42 * c7)) / den
        k_sph = -(6 * c3 + s2 * ((9 * c3 * c3 + 10 * c5)
                                 + s2 * (30 * c3 * c5 + 14 * c7))) / den ** 2
        out[mask] = k_rad + (n - 2) * k_sph
    return out[0] if r.ndim == 0 else out


def ricci_min(warp: WarpProfile, n: int, r, at_pole: str = "series") -> CurvatureSample:
    r = np.asarray(r, dtype=float)
    rr = ricci_radial(warp, n, r, at_pole)
    ee = ricci_tangential(warp, n, r, at_pole)
    # a radial conformal fibre has no mixed component
    return CurvatureSample(r, rr, ee, np.zeros_like(np.asarray(rr, dtype=float)))


def laplacian_radial(warp: WarpProfile, n: int, u: RadialFunction, r, at_pole: str = "error"):
    """``u'' + (n-1)(phi'/phi) u'`` for a radial function ``u``.

    At a pole the first-order term is singular; with ``at_pole="limit"`` the
    regular limit ``n u''(p)`` is used (valid when ``u'(p) = 0``).
    """
    r = np.asarray(r, dtype=float)
    rr = np.atleast_1d(r)
    phi, d1 = warp.derivatives(rr, order=1)
    _, du, d2u = (np.atleast_1d(v) for v in u.evaluate(rr))
    at = phi == 0
    if np.any(at) and at_pole != "limit":
        raise SingularityError("laplacian evaluated at a pole")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = d2u + (n - 1) * (d1 / phi) * du
    out = np.where(at, n * d2u, out)
    return out[0] if r.ndim == 0 else out


# ---------------------------------------------------------------------------
# fibre factor and asymptotic rates


def fiber_factor_derivatives(warp: WarpProfile, pole: float, s):
    """``a(s) = (phi(p + sigma s)/s)^2`` and its first two ``s``-derivatives.

    ``s`` is the geodesic distance to the pole ``pole``.
    """
    sigma = warp.pole_direction(pole)
    s = np.asarray(s, dtype=float)
    ss = np.atleast_1d(s)
    if np.any(ss <= 0):
        raise DomainError("fibre factor needs positive distance to the pole")
    if np.any(ss >= warp.domain.length):
        raise DomainError("distance exceeds the polar chart")
    psi, d1, d2 = warp.derivatives(pole + sigma * ss, order=2)
    d1 = sigma * d1
    q = psi / ss
    dq = d1 / ss - psi / ss ** 2
    d2q = d2 / ss - 2 * d1 / ss ** 2 + 2 * psi / ss ** 3
    small = ss < warp.pole_cutoff
    if np.any(small):
        c3, c5, c7 = warp.pole_series(pole)
        t = ss[small]
        t2 = t * t
        q[small] = 1.0 + t2 * (c3 + t2 * (c5 + t2 * c7))
        dq[small] = t * (2 * c3 + t2 * (4 * c5 + t2 * 6 * c7))
        d2q[small] = 2 * c3 + t2 * (12 * c5 + t2 * 30 * c7)
    a = q * q
    da = 2 * q * dq
    d2a = 2 * dq * dq + 2 * q * d2q
    if s.ndim == 0:
        return a[0], da[0], d2a[0]
    return a, da, d2a


def fiber_factor(warp: WarpProfile, pole: float, s):
    return fiber_factor_derivatives(warp, pole, s)[0]


_RATE_POWER = {"o(1)": 0, "o(r^-1)": 1, "o(r^-2)": 2}


def rate_check(radii: Sequence[float], values: Sequence[float], claimed: str,
               margin: float = 0.5, min_levels: int = 6) -> RateReport:
    """Decide a claim ``q = o(r^-k)`` from samples on shrinking radii.

    The claim passes when the log-log slope of ``|q| r^k`` against ``r`` is at
    least ``margin``.  Exact zeros count as decay (they are floored at 1e-300).
    """
    if claimed not in _RATE_POWER:
        raise ValueError(f"unknown rate claim {claimed!r}")
    r = np.asarray(radii, dtype=float)
    q = np.abs(np.asarray(values, dtype=float))
    if r.size < min_levels:
        raise InsufficientDataError(f"rate_check needs {min_levels} levels, got {r.size}")
    order = np.argsort(-r)
    r, q = r[order], q[order]
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise InsufficientDataError("radii must be distinct and positive")
    k = _RATE_POWER[claimed]
    scaled = q * r ** k
    samples = tuple(zip(r.tolist(), q.tolist()))
    if np.all(scaled == 0):
        return RateReport(claimed, samples, math.inf, True, margin)
    slope = float(np.polyfit(np.log(r), np.log(np.maximum(scaled, 1e-300)), 1)[0])
    return RateReport(claimed, samples, slope, slope >= margin, margin)


def dyadic_radii(start: float, levels: int):
    return start / 2.0 ** np.arange(levels)


# ---------------------------------------------------------------------------
# builtin profiles


def euclidean(r_max: float = 10.0) -> WarpProfile:
    return WarpProfile(lambda r: r * 1.0, Interval(0.0, r_max, POLE, BOUNDARY),
                       lambda r: np.ones_like(r), lambda r: np.zeros_like(r),
                       lambda r: np.zeros_like(r), name="euclidean")


def round_sphere(radius: float = 1.0) -> WarpProfile:
    k = 1.0 / radius
    return WarpProfile(lambda r: np.sin(k * r) / k, Interval(0.0, math.pi * radius),
                       lambda r: np.cos(k * r), lambda r: -k * np.sin(k * r),
                       lambda r: -k * k * np.cos(k * r), name="sphere")


def hyperbolic_cap(r_max: float = 2.0) -> WarpProfile:
    return WarpProfile(np.sinh, Interval(0.0, r_max, POLE, BOUNDARY), np.cosh, np.sinh,
                       np.cosh, name="hyperbolic-cap")


def space_form(K: float, r_max: float) -> WarpProfile:
    """Polar warp of the simply connected space form of curvature ``K``."""
    if K == 0:
        return euclidean(r_max)
    k = math.sqrt(abs(K))
    if K > 0:
        if r_max > math.pi / k:
            raise DomainError("radius exceeds the diameter of the sphere")
        right = POLE if math.isclose(r_max, math.pi / k) else BOUNDARY
        return WarpProfile(lambda r: np.sin(k * r) / k, Interval(0.0, r_max, POLE, right),
                           lambda r: np.cos(k * r), lambda r: -k * np.sin(k * r),
                           lambda r: -k * k * np.cos(k * r), name=f"space-form(K={K:g})")
    return WarpProfile(lambda r: np.sinh(k * r) / k, Interval(0.0, r_max, POLE, BOUNDARY),
                       lambda r: np.cosh(k * r), lambda r: k * np.sinh(k * r),
                       lambda r: k * k * np.cosh(k * r), name=f"space-form(K={K:g})")


def cylinder(period: float = 2 * math.pi) -> WarpProfile:
    return WarpProfile(lambda r: np.ones_like(r, dtype=float), Circle(period),
                       lambda r: np.zeros_like(r), lambda r: np.zeros_like(r),
                       lambda r: np.zeros_like(r), name="cylinder")


def warped_circle(period: float = 2 * math.pi, amplitude: float = 0.3) -> WarpProfile:
    w = 2 * math.pi / period
    return WarpProfile(lambda r: 1 + amplitude * np.cos(w * r), Circle(period),
                       lambda r: -amplitude * w * np.sin(w * r),
                       lambda r: -amplitude * w * w * np.cos(w * r),
                       lambda r: amplitude * w ** 3 * np.sin(w * r), name="warped-circle")
