"""First eigenvalue of ``-gamma Delta + V`` on rotationally symmetric models.

Radial functions reduce the operator to the weighted Sturm-Liouville form
``-gamma w^{-1} (w psi')' + V psi`` with volume weight
``w = |S^{n-1}| phi^{n-1}``.  It is discretised by a cell-centred finite
volume scheme: unknowns sit at cell centres, fluxes use the weight at cell
faces, and masses use Simpson's rule on each cell.  The weight vanishes at
poles, so regularity there is the natural (zero-flux) condition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from . import warped_geometry as wg
from .errors import DomainError, PreconditionError, SolverDiverged
from .models import ModelManifold

DEFAULT_CELLS = 8192
CONSISTENCY_SLACK = 1e-6


def radial_grid(domain, cells: int, focus: Optional[Sequence] = None):
    """Cell faces on ``domain``.

    ``focus`` is a list of ``(centre, width, factor)``; the cell density is
    ``1 + sum factor * exp(-(d/width)^2)``, mapped smoothly so that the scheme
    stays second order.
    """
    if isinstance(domain, wg.Circle):
        lo, hi = 0.0, domain.period
    else:
        lo, hi = domain.r_min, domain.r_max
    if not focus:
        return np.linspace(lo, hi, cells + 1)
    fine = np.linspace(lo, hi, 40 * cells + 1)
    density = np.ones_like(fine)
    for centre, width, factor in focus:
        d = fine - centre
        if isinstance(domain, wg.Circle):
            d = (d + 0.5 * domain.period) % domain.period - 0.5 * domain.period
        density += factor * np.exp(-(d / width) ** 2)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fine))])
    faces = np.interp(np.linspace(0.0, cdf[-1], cells + 1), cdf, fine)
    faces[0], faces[-1] = lo, hi
    return faces


@dataclass
class Discretization:
    faces: np.ndarray
    centers: np.ndarray
    mass: np.ndarray
    flux: np.ndarray  # one coefficient per interior (or periodic) face
    boundary: np.ndarray  # Dirichlet diagonal contributions, per cell
    potential: np.ndarray
    periodic: bool
    bc: str

    def stiffness(self, extra_potential=None):
        v = self.potential if extra_potential is None else self.potential + extra_potential
        N = self.centers.size
        diag = v * self.mass + self.boundary
        if self.periodic:
            k = self.flux  # face j joins cell j-1 and cell j (mod N)
            diag = diag + k + np.roll(k, -1)
            left = (np.arange(N) - 1) % N
            right = np.arange(N)
            off = sparse.coo_matrix((-k, (left, right)), shape=(N, N))
            return (sparse.diags(diag, 0) + off + off.T).tocsr()
        k = self.flux
        diag = diag.copy()
        diag[:-1] += k
        diag[1:] += k
        return sparse.diags([diag, -k, -k], [0, 1, -1], format="csr")

    def quadratic_form(self, psi, extra_potential=None):
        v = self.potential if extra_potential is None else self.potential + extra_potential
        if self.periodic:
            jumps = psi - np.roll(psi, 1)
        else:
            jumps = np.diff(psi)
        energy = np.sum(self.flux * jumps ** 2) + np.sum((v * self.mass + self.boundary) * psi ** 2)
        return energy, np.sum(self.mass * psi ** 2)


def discretize(model: ModelManifold, gamma: Optional[float] = None, cells: int = DEFAULT_CELLS,
               focus=None) -> Discretization:
    gamma = model.params.gamma if gamma is None else gamma
    n = model.n
    dom = model.warp.domain
    faces = radial_grid(dom, cells, focus)
    centers = 0.5 * (faces[1:] + faces[:-1])
    area = wg.sphere_area(n)

    def weight(r):
        return area * np.abs(model.warp(r)) ** (n - 1)

    wf, wc = weight(faces), weight(centers)
    h = np.diff(faces)
    mass = h / 6.0 * (wf[:-1] + 4 * wc + wf[1:])
    boundary = np.zeros_like(centers)
    if isinstance(dom, wg.Circle):
        gaps = np.diff(centers, prepend=centers[-1] - dom.period)
        flux = gamma * wf[:-1] / gaps
        periodic, bc = True, "periodic"
    else:
        flux = gamma * wf[1:-1] / np.diff(centers)
        periodic = False
        tags = []
        for end, face, cell, idx in ((dom.left, faces[0], centers[0], 0),
                                     (dom.right, faces[-1], centers[-1], -1)):
            if end == wg.POLE:
                tags.append("pole-regular")
            else:
                boundary[idx] += gamma * weight(face) / abs(cell - face)
                tags.append("dirichlet")
        bc = "/".join(tags)
    return Discretization(faces, centers, mass, flux, boundary, model.V(centers),
                          periodic, bc)


@dataclass
class SpectralResult:
    lambda1: float
    method: str
    cells: int
    bc: str
    fiber_mode_gap: float = float("nan")
    extrapolated: Optional[float] = None
    sign_ratio: float = float("nan")
    centers: Optional[np.ndarray] = field(default=None, repr=False)
    eigenvector: Optional[np.ndarray] = field(default=None, repr=False)


def _smallest_eigenpair(disc: Discretization, extra_potential=None):
    """Smallest eigenpair of ``A psi = lambda M psi``.

    Tridiagonal problems are located by LAPACK bisection and then polished by
    shifted inverse iteration with banded solves; the eigenvalue reported is
    the Rayleigh quotient of the polished vector.  Periodic problems drop one
    link to get a tridiagonal lower bound (rank-one interlacing) and use it as
    the shift for shift-invert Lanczos.
    """
    A = disc.stiffness(extra_potential)
    scale = 1.0 / np.sqrt(disc.mass)
    d = A.diagonal() * scale * scale
    e = A.diagonal(1) * scale[:-1] * scale[1:]
    if disc.periodic:
        k0 = disc.flux[0]  # link between the last and the first cell
        d_cut = d.copy()
        d_cut[0] -= k0 * scale[0] ** 2
        d_cut[-1] -= k0 * scale[-1] ** 2
        vals, vecs = linalg.eigh_tridiagonal(d_cut, e, select="i", select_range=(0, 1))
        shift = vals[0] - 1e-3 * max(1.0, abs(vals[1] - vals[0]))
        S = (sparse.diags(scale) @ A @ sparse.diags(scale)).tocsc()
        try:
            vals, vecs = splinalg.eigsh(S, k=1, sigma=shift, which="LM", v0=vecs[:, 0])
        except splinalg.ArpackError as exc:
            raise SolverDiverged(f"eigensolver failed: {exc}") from exc
        y = vecs[:, 0]
    else:
        vals, vecs = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        lam, y = float(vals[0]), vecs[:, 0]
        shift = lam - 1e-6 * max(1.0, abs(lam))
        band = np.zeros((3, d.size))
        band[0, 1:], band[1], band[2, :-1] = e, d - shift, e
        for _ in range(2):
            y = linalg.solve_banded((1, 1), band, y)
            y /= np.linalg.norm(y)
    psi = y * scale
    psi = psi / psi[np.argmax(np.abs(psi))]
    energy, norm = disc.quadratic_form(psi, extra_potential)
    return float(energy / norm), psi


def lambda1_radial(model: ModelManifold, gamma: Optional[float] = None,
                   cells: int = DEFAULT_CELLS, focus=None, extrapolate: bool = False,
                   fiber_gap: bool = True) -> SpectralResult:
    """Smallest eigenvalue of the radial operator.

    Closed models are the intended use; ``boundary`` ends get a Dirichlet
    condition, which only makes sense for bounded balls.
    """
    gamma = model.params.gamma if gamma is None else gamma
    disc = discretize(model, gamma, cells, focus)
    lam, psi = _smallest_eigenpair(disc)
    res = SpectralResult(lam, "radial-eig", cells, disc.bc, centers=disc.centers,
                         eigenvector=psi)
    res.sign_ratio = float(np.min(psi) / np.max(psi))
    if fiber_gap:
        # first fibre harmonic adds gamma * mu_1 / phi^2 with mu_1 = n - 1
        extra = gamma * (model.n - 1) / model.warp(disc.centers) ** 2
        lam_fiber, _ = _smallest_eigenpair(disc, extra)
        res.fiber_mode_gap = lam_fiber - lam
    if extrapolate:
        fine = lambda1_radial(model, gamma, 2 * cells, focus, False, False)
        res.extrapolated = (4.0 * fine.lambda1 - lam) / 3.0
    return res


def rayleigh_quotient(model: ModelManifold, testfn: Callable, gamma: Optional[float] = None,
                      cells: int = DEFAULT_CELLS, focus=None, disc: Optional[Discretization] = None):
    """Discrete Rayleigh quotient of ``testfn`` on the eigensolver's grid.

    Being the same quadratic form, it is never below the discrete ``lambda_1``.
    """
    disc = disc or discretize(model, gamma, cells, focus)
    psi = np.asarray(testfn(disc.centers), dtype=float)
    energy, norm = disc.quadratic_form(psi)
    if not norm > 0:
        raise DomainError("test function vanishes on the grid")
    return float(energy / norm)


@dataclass
class DefectProfile:
    r: np.ndarray
    D: np.ndarray
    min: float
    argmin: float

    @property
    def nonnegative(self) -> bool:
        return self.min >= 0


def supersolution_defect(model: ModelManifold, u: wg.RadialFunction, r,
                         lam: Optional[float] = None, epsilon: Optional[float] = None,
                         gamma: Optional[float] = None) -> DefectProfile:
    """``D = -gamma Delta u + V u - (lambda - epsilon) u`` at the points ``r``."""
    p = model.params
    gamma = p.gamma if gamma is None else gamma
    lam = p.lam if lam is None else lam
    epsilon = p.epsilon if epsilon is None else epsilon
    r = np.atleast_1d(np.asarray(r, dtype=float))
    val = np.asarray(u(r), dtype=float)
    if np.any(~(val > 0)):
        raise PreconditionError("candidate supersolution must be positive")
    lap = wg.laplacian_radial(model.warp, model.n, u, r, at_pole="limit")
    D = -gamma * lap + model.V(r) * val - (lam - epsilon) * val
    i = int(np.argmin(D))
    return DefectProfile(r, D, float(D[i]), float(r[i]))


@dataclass
class ConsistencyReport:
    consistent: bool
    min_defect: float
    lambda1: float
    bound: float
    slack: float = CONSISTENCY_SLACK


def eig_vs_defect_consistency(model: ModelManifold, u: wg.RadialFunction, r,
                              lam: Optional[float] = None, epsilon: Optional[float] = None,
                              cells: int = DEFAULT_CELLS, focus=None,
                              slack: float = CONSISTENCY_SLACK) -> ConsistencyReport:
    """Check that a nonnegative defect implies ``lambda_1 >= lambda - epsilon``."""
    p = model.params
    lam = p.lam if lam is None else lam
    epsilon = p.epsilon if epsilon is None else epsilon
    defect = supersolution_defect(model, u, r, lam, epsilon)
    eig = lambda1_radial(model, cells=cells, focus=focus, fiber_gap=False)
    bound = lam - epsilon
    ok = (not defect.nonnegative) or eig.lambda1 >= bound - slack
    return ConsistencyReport(bool(ok), defect.min, eig.lambda1, bound, slack)
