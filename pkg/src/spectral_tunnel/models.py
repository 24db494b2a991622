"""Rotationally symmetric model manifolds with marked basepoints."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import warped_geometry as wg
from .errors import DomainError

FAR_CONDITIONS = ("decay", "free")


@dataclass(frozen=True)
class ModelManifold:
    """A warped product with a potential and up to two basepoints.

    Basepoints must be poles of the warp.  ``potential`` defaults to the
    pointwise Ricci minimum.  ``far_condition`` selects the Green function
    branch at a ``boundary`` end: ``"decay"`` imposes the flat decay condition
    ``phi u' + (n-2) phi' u = 0``, ``"free"`` keeps the pure singular branch.
    """

    params: wg.Params
    warp: wg.WarpProfile
    basepoints: Tuple[float, ...] = ()
    potential: Optional[Callable] = None
    far_condition: str = "decay"
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "basepoints", tuple(float(b) for b in self.basepoints))
        if len(set(self.basepoints)) != len(self.basepoints):
            raise DomainError("basepoints must be distinct")
        poles = [p for p, _ in self.warp.poles]
        for b in self.basepoints:
            if b not in poles:
                raise DomainError(f"basepoint {b} is not a pole of {self.warp!r}")
        if self.far_condition not in FAR_CONDITIONS:
            raise DomainError(f"unknown far condition {self.far_condition!r}")

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def closed(self) -> bool:
        return self.warp.domain.closed

    def V(self, r):
        r = np.asarray(r, dtype=float)
        if self.potential is not None:
            return np.broadcast_to(np.asarray(self.potential(r), dtype=float), r.shape)
        return wg.ricci_min(self.warp, self.n, r).ric_min

    def with_params(self, params: wg.Params) -> "ModelManifold":
        return ModelManifold(params, self.warp, self.basepoints, self.potential,
                             self.far_condition, self.name)

    def potential_bounds(self, samples: int = 2001):
        """``(inf V, sup |V|)`` on a sample grid, echoing the bounds used near basepoints."""
        dom = self.warp.domain
        lo, hi = (0.0, dom.period) if isinstance(dom, wg.Circle) else (dom.r_min, dom.r_max)
        v = self.V(np.linspace(lo, hi, samples))
        return float(np.min(v)), float(np.max(np.abs(v)))


def constant(c: float) -> Callable:
    return lambda r: np.full_like(np.asarray(r, dtype=float), c)


def euclidean_model(params: wg.Params, r_max: float = 10.0) -> ModelManifold:
    return ModelManifold(params, wg.euclidean(r_max), (0.0,), constant(0.0), "decay",
                         name="euclidean")


def sphere_model(params: wg.Params, basepoints=(0.0,)) -> ModelManifold:
    """Unit round sphere; ``Ric_min = n - 1``."""
    return ModelManifold(params, wg.round_sphere(), tuple(basepoints), None, name="sphere")


def antipodal_sphere_model(params: wg.Params) -> ModelManifold:
    return sphere_model(params, (0.0, math.pi))


def hyperbolic_cap_model(params: wg.Params, r_max: float = 2.0) -> ModelManifold:
    return ModelManifold(params, wg.hyperbolic_cap(r_max), (0.0,), None, "decay",
                         name="hyperbolic-cap")


def cylinder_model(params: wg.Params, period: float = 2 * math.pi) -> ModelManifold:
    return ModelManifold(params, wg.cylinder(period), (), None, name="cylinder")


def space_form_model(params: wg.Params, K: float, F: float, R: float) -> ModelManifold:
    """Ball of radius ``R`` in the space form ``M_K`` with potential ``-F``."""
    return ModelManifold(params, wg.space_form(K, R), (0.0,), constant(-F), "free",
                         name=f"space-form(K={K:g},F={F:g})")
