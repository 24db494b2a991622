"""Even convex neck functions and the smooth cutoff used for blending.

The canonical neck has ``f'' = c exp(-1/(1 - x^2))`` on ``(-1, 1)`` and zero
outside, normalised so that ``f'(1) = 1`` and ``f(1) = 1``.  Writing
``f(x) = f(0) + x f'(x) - c int_0^x t bump(t) dt`` and substituting
``s = 1 - t^2`` turns the last integral into
``(G(1) - G(1 - x^2))/2`` with ``G(s) = s e^{-1/s} - E1(1/s)``, so only
``f'`` needs numerical quadrature.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate, interpolate, special

from .errors import ConstructionError, DomainError

QUAD_TOL = 1e-14


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _G(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] * np.exp(-1.0 / s[pos]) - special.exp1(1.0 / s[pos])
    return out


@functools.lru_cache(maxsize=None)
def bump_constants():
    """Return ``(c, f0)``: the bump normalisation and ``f(0)``."""
    mass, err = integrate.quad(lambda t: np.exp(-1.0 / (1.0 - t * t)), 0.0, 1.0,
                               epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    if not err < 1e-12:
        raise ConstructionError(f"bump normalisation did not converge (error {err:.2e})")
    c = 1.0 / mass
    return c, 0.5 * c * float(_G(1.0))


@dataclass(frozen=True)
class NeckProfile:
    """A neck function with derivatives up to third order.

    ``exact_signs`` optionally maps constraint names to callables returning
    the exact sign of the constraint margin; it is used where the margin
    underflows (the canonical bump is ``exp(-1/(1-x^2))``).
    """

    f: Callable
    df: Callable
    d2f: Callable
    d3f: Optional[Callable]
    family: str = "custom"
    params: Dict[str, float] = field(default_factory=dict)
    exact_signs: Dict[str, Callable] = field(default_factory=dict)

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    def derivatives(self, x, order: int = 2):
        x = np.asarray(x, dtype=float)
        funcs = (self.f, self.df, self.d2f, self.d3f)[: order + 1]
        if order >= 3 and self.d3f is None:
            raise DomainError(f"profile {self.family!r} has no third derivative")
        return tuple(np.asarray(g(x), dtype=float) for g in funcs)


def _canonical_df(x):
    c, _ = bump_constants()
    x = np.asarray(x, dtype=float)
    ax = np.minimum(np.abs(x), 1.0).ravel()
    if ax.size == 0:
        return np.zeros_like(x)
    # shared adaptive subdivision keeps the quadrature error smooth in x
    val, _ = integrate.quad_vec(lambda s: ax * _bump(ax * s), 0.0, 1.0,
                                epsabs=QUAD_TOL, epsrel=QUAD_TOL, norm="max")
    return np.sign(x) * (c * val).reshape(x.shape)


def _canonical_f(x):
    c, f0 = bump_constants()
    x = np.asarray(x, dtype=float)
    ax = np.abs(np.atleast_1d(x))
    inner = ax < 1
    out = ax.copy()
    if np.any(inner):
        xi = ax[inner]
        out[inner] = (f0 + xi * _canonical_df(xi)
                      - 0.5 * c * (float(_G(1.0)) - _G(1.0 - xi * xi)))
    return out.reshape(x.shape)


def _canonical_d2f(x):
    c, _ = bump_constants()
    return c * _bump(x)


def _canonical_d3f(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    xi = x[inside]
    out[inside] = _canonical_d2f(xi) * (-2.0 * xi / (1.0 - xi * xi) ** 2)
    return out


def build_neck_profile() -> NeckProfile:
    c, f0 = bump_constants()
    inside = lambda x: (np.abs(np.asarray(x)) < 1).astype(float)
    signs = {
        "slope_below_one": inside,
        "convex": inside,
        "third_negative": lambda x: np.sign(x) * inside(x),
    }
    return NeckProfile(_canonical_f, _canonical_df, _canonical_d2f, _canonical_d3f,
                       family="canonical", params={"c": c, "f0": f0}, exact_signs=signs)


def sqrt_profile(delta: float = 0.1) -> NeckProfile:
    """``sqrt(x^2 + delta^2)``; convex but never equal to ``|x|``."""
    d2 = delta * delta
    return NeckProfile(
        lambda x: np.sqrt(x * x + d2),
        lambda x: x / np.sqrt(x * x + d2),
        lambda x: d2 / (x * x + d2) ** 1.5,
        lambda x: -3 * d2 * x / (x * x + d2) ** 2.5,
        family="sqrt", params={"delta": delta})


def xcoth_profile() -> NeckProfile:
    """``x coth x``, continued by 1 at the origin."""

    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = x / np.tanh(x)
        return np.where(np.abs(x) < 1e-8, 1.0 + x * x / 3, out)

    def df(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 1 / np.tanh(x) - x / np.sinh(x) ** 2
        return np.where(np.abs(x) < 1e-4, 2 * x / 3, out)

    def d2f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 2 * (x / np.tanh(x) - 1) / np.sinh(x) ** 2
        return np.where(np.abs(x) < 1e-3, 2.0 / 3 - 2 * x * x / 5, out)

    def d3f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            sh, ch = np.sinh(x), np.cosh(x)
            out = (2 * (ch / sh - x / sh ** 2) - 4 * (x * ch / sh - 1) * ch / sh) / sh ** 2
        return np.where(np.abs(x) < 1e-2, -4 * x / 5, out)

    return NeckProfile(f, df, d2f, d3f, family="xcoth")


def cosh_profile(k: float = 0.4) -> NeckProfile:
    """``cosh x - k x^2``: even and convex, but the third derivative is positive on (0, 1)."""
    return NeckProfile(
        lambda x: np.cosh(x) - k * x * x,
        lambda x: np.sinh(x) - 2 * k * x,
        lambda x: np.cosh(x) - 2 * k,
        np.sinh,
        family="cosh", params={"k": k})


def sampled_profile(x, values) -> NeckProfile:
    """Monotone-cubic interpolant of a sampled table on ``x >= 0``, mirrored evenly.

    Sampled profiles carry no third derivative.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if x[0] != 0 or np.any(np.diff(x) <= 0):
        raise DomainError("sampled profile needs increasing abscissae starting at 0")
    pchip = interpolate.PchipInterpolator(x, values, extrapolate=False)
    d1, d2 = pchip.derivative(1), pchip.derivative(2)
    top = x[-1]

    def ev(g, odd, tail):
        def h(t):
            t = np.asarray(t, dtype=float)
            a = np.abs(t)
            out = np.where(a <= top, g(np.minimum(a, top)), tail(a))
            return np.sign(t) * out if odd else out
        return h

    return NeckProfile(ev(pchip, False, lambda a: a), ev(d1, True, lambda a: np.ones_like(a)),
                       ev(d2, False, lambda a: np.zeros_like(a)), None, family="sampled")


# ---------------------------------------------------------------------------
# cutoff


def _ramp(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _ramp_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / tp ** 2
    return out


def _ramp_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) * (1.0 / tp ** 4 - 2.0 / tp ** 3)
    return out


@dataclass(frozen=True)
class CutoffEta:
    lower: float = 1.0 / 3.0
    upper: float = 2.0 / 3.0

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        width = self.upper - self.lower
        s = np.clip((np.abs(x) - self.lower) / width, 0.0, 1.0)
        A, B = _ramp(s), _ramp(1 - s)
        dA, dB = _ramp_d1(s), -_ramp_d1(1 - s)
        d2A, d2B = _ramp_d2(s), _ramp_d2(1 - s)
        S = A + B
        g = A / S
        num = dA * B - A * dB
        dg = num / S ** 2
        dnum = d2A * B - A * d2B
        d2g = (dnum * S - 2 * num * (dA + dB)) / S ** 3
        return x, width, g, dg, d2g

    def __call__(self, x):
        return self._parts(x)[2]

    def derivatives(self, x):
        """Return ``(eta, eta', eta'')``."""
        x, width, g, dg, d2g = self._parts(x)
        return g, np.sign(x) * dg / width, d2g / width ** 2


def build_cutoff() -> CutoffEta:
    return CutoffEta()


# ---------------------------------------------------------------------------
# validation


@dataclass
class ConstraintResult:
    name: str
    passed: bool
    worst_margin: float
    location: float


@dataclass
class NeckReport:
    constraints: Dict[str, ConstraintResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints.values())

    def failed(self):
        return [name for name, c in self.constraints.items() if not c.passed]


def _strict(name, x, margin, profile):
    """Strict positivity of ``margin``.

    Where the margin is lost to underflow or roundoff (|margin| < 1e-14) the
    profile's exact sign rule, if any, decides.
    """
    if margin.size == 0:
        return ConstraintResult(name, True, np.inf, np.nan)
    i = int(np.argmin(margin))
    ok = margin > 0
    rule = profile.exact_signs.get(name)
    if rule is not None:
        ok |= (margin > -1e-14) & (np.asarray(rule(x)) > 0)
    return ConstraintResult(name, bool(np.all(ok)), float(margin[i]), float(x[i]))


def validate_neck(profile: NeckProfile, grid_size: int = 4096) -> NeckReport:
    """Evaluate every neck constraint on a uniform grid over [-2, 2]."""
    if grid_size < 1000:
        raise DomainError("grid_size must be at least 1000")
    x = np.linspace(-2.0, 2.0, grid_size)
    f, df, d2f = profile.derivatives(x, order=2)
    fm = profile(-x)
    ax = np.abs(x)
    inner = ax < 1
    out = {}

    def record(name, margin, where, passed):
        i = int(np.argmin(margin)) if margin.size else 0
        out[name] = ConstraintResult(name, bool(passed), float(margin[i]) if margin.size
                                     else np.inf, float(where[i]) if where.size else np.nan)

    asym = -np.abs(f - fm)
    record("even", asym, x, np.all(asym >= -1e-12))
    record("positive", f, x, np.all(f > 0))
    outer = ~inner
    dev = -np.abs(f[outer] - ax[outer])
    record("equals_abs_outside", dev, x[outer], np.all(dev >= -1e-9))
    out["slope_below_one"] = _strict("slope_below_one", x[inner], 1 - np.abs(df[inner]), profile)
    out["convex"] = _strict("convex", x[inner], d2f[inner], profile)
    if profile.d3f is None:
        out["third_negative"] = ConstraintResult("third_negative", False, np.nan, np.nan)
    else:
        pos = (x > 0) & (x < 1)
        d3 = profile.d3f(x[pos])
        out["third_negative"] = _strict("third_negative", x[pos], -d3, profile)
    above = f - ax
    record("above_abs", above, x, np.all(above >= -1e-12))
    # f - |x| must vanish faster than t^4 at x = 1; gaps below 1e-14 are at
    # the roundoff floor and count as resolved zeros
    t = 2.0 ** -np.arange(3, 11)
    gap = np.abs(profile(1 - t) - (1 - t))
    ratio = gap / t ** 4
    live = gap > 1e-14
    flat = bool(np.all(np.diff(ratio[live]) <= 0)
                and (not live[-1] or ratio[-1] <= 1e-6))
    record("flat_contact", -np.where(live, ratio, 0.0), 1 - t, flat)
    return NeckReport(out)


@dataclass
class MarginReport:
    min_margin: float
    argmin: float
    x: np.ndarray
    margin: np.ndarray
    tol: float = 1e-12
    interior: float = 0.95

    @property
    def interior_min(self) -> float:
        return float(np.min(self.margin[self.x <= self.interior]))

    @property
    def passed(self) -> bool:
        """Nonnegative up to ``tol``, and strictly positive away from ``x = 1``."""
        return self.min_margin >= -self.tol and self.interior_min > 0


def neck_margin(profile: NeckProfile, x):
    """``f''/f - |x f'/f - 1|/2 - |x/f - 1|/2`` at ``x``."""
    f, df, d2f = profile.derivatives(x, order=2)
    return d2f / f - 0.5 * np.abs(x * df / f - 1) - 0.5 * np.abs(x / f - 1)


def property_of_f_check(profile: NeckProfile, grid_size: int = 4096) -> MarginReport:
    x = np.linspace(0.5, 1.0, grid_size)
    m = neck_margin(profile, x)
    i = int(np.argmin(m))
    return MarginReport(float(m[i]), float(x[i]), x, m)
