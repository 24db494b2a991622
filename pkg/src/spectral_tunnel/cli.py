"""Command line experiment runner.

Each subcommand reads a YAML config (or a named preset), runs one experiment,
writes CSV data plus ``report.json`` into the output directory and exits with
0 when every check passed, 1 when a check failed and 2 on a bad config.

    spectral-tunnel toy-identity --preset toy
    spectral-tunnel tunnel-build --preset dumbbell --out runs/dumbbell
    spectral-tunnel threshold-scan --preset sharpness-handle
    spectral-tunnel compare runs/a/report.json runs/b/report.json
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml
from scipy import interpolate

from . import green_radial, models, neck_profile, spectral, tunnel
from . import warped_geometry as wg
from .errors import ConfigError, NotAdmissible, SchemaMismatch, TunnelError

log = logging.getLogger("spectral_tunnel")

SCHEMA_VERSION = 1
WORKERS_ENV = "TUNNEL_WORKERS"
EXPERIMENTS = ("toy-identity", "neck-check", "green-solve", "tunnel-build", "defect-scan",
               "lambda1", "threshold-scan", "asymptotics")
MODEL_KINDS = ("euclidean", "sphere", "hyperbolic-cap", "cylinder", "warped-circle",
               "space-form", "custom")
TOPOLOGIES = ("single", "dumbbell", "handle")
PROFILES = ("canonical", "sqrt", "xcoth", "cosh")

DEFAULTS: Dict[str, Any] = {
    "experiment": "toy-identity",
    "params": {"n": 3, "gamma": 3.0, "lam": 2.0, "epsilon": 0.2},
    "model": {
        "kind": "sphere",
        "topology": "single",
        "r_max": 10.0,
        "curvature": 1.0,
        "potential": 0.0,
        "period": 2 * math.pi,
        "profile_file": None,
    },
    "numerics": {
        "grid": 4096,
        "cells": 8192,
        "dims": [3, 4, 5],
        "profile": "canonical",
        "r0": None,
        "r0_floor": 1e-4,
        "bisections": 10,
        "scan_levels": 40,
        "gamma_min": 1.2,
        "gamma_max": 4.0,
        "gamma_steps": 15,
        "rate_start": 2.0 ** -4,
        "rate_levels": 7,
        "test_functions": 100,
    },
    "output": {"dir": "out"},
    "seed": 0,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "toy": {"experiment": "toy-identity"},
    "neck": {"experiment": "neck-check"},
    "green-sphere": {"experiment": "green-solve", "params": {"gamma": 3.0, "lam": 2.0}},
    "green-euclidean": {"experiment": "green-solve", "model": {"kind": "euclidean"},
                        "params": {"gamma": 1.0, "lam": 0.05, "epsilon": 0.1}},
    "dumbbell": {"experiment": "tunnel-build", "model": {"topology": "dumbbell"}},
    "handle": {"experiment": "tunnel-build", "model": {"topology": "handle"}},
    "defect-subcritical": {"experiment": "defect-scan", "params": {"gamma": 1.9},
                           "model": {"topology": "dumbbell"}},
    "lambda1-sphere": {"experiment": "lambda1"},
    "lambda1-circle": {"experiment": "lambda1", "model": {"kind": "warped-circle"}},
    "sharpness-dumbbell": {"experiment": "threshold-scan", "model": {"topology": "dumbbell"},
                           "numerics": {"bisections": 0}},
    "sharpness-handle": {"experiment": "threshold-scan", "model": {"topology": "handle"},
                         "numerics": {"bisections": 0}},
    "asymptotics": {"experiment": "asymptotics", "params": {"epsilon": 1.0},
                    "model": {"topology": "dumbbell"}},
}

RANGES = {
    ("params", "n"): (3, 12),
    ("params", "gamma"): (0.1, 100.0),
    ("params", "epsilon"): (1e-6, 10.0),
    ("numerics", "grid"): (16, 2 ** 22),
    ("numerics", "cells"): (64, 2 ** 22),
    ("numerics", "r0_floor"): (1e-8, 1.0),
    ("numerics", "bisections"): (0, 60),
    ("numerics", "scan_levels"): (1, 40),
    ("numerics", "gamma_steps"): (1, 1000),
    ("numerics", "rate_levels"): (6, 30),
    ("numerics", "test_functions"): (1, 10000),
}


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _validate(cfg: dict) -> dict:
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg['experiment']!r}")
    if cfg["model"]["kind"] not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {cfg['model']['kind']!r}")
    if cfg["model"]["topology"] not in TOPOLOGIES:
        raise ConfigError(f"unknown topology {cfg['model']['topology']!r}")
    if cfg["numerics"]["profile"] not in PROFILES:
        raise ConfigError(f"unknown neck profile {cfg['numerics']['profile']!r}")
    for (section, key), (lo, hi) in RANGES.items():
        value = cfg[section][key]
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not lo <= value <= hi:
            raise ConfigError(f"{section}.{key} = {value!r} outside [{lo}, {hi}]")
    for key in ("grid", "cells", "bisections", "scan_levels", "gamma_steps", "rate_levels",
                "test_functions"):
        if int(cfg["numerics"][key]) != cfg["numerics"][key]:
            raise ConfigError(f"numerics.{key} must be an integer")
    num = cfg["numerics"]
    if not num["gamma_min"] < num["gamma_max"]:
        raise ConfigError("numerics.gamma_min must be below gamma_max")
    if num["r0"] is not None and not 0 < float(num["r0"]) <= 1:
        raise ConfigError("numerics.r0 must lie in (0, 1]")
    if cfg["model"]["kind"] == "custom" and not cfg["model"]["profile_file"]:
        raise ConfigError("model.profile_file is required for custom models")
    if any(int(d) != d or d < 3 for d in num["dims"]):
        raise ConfigError("numerics.dims must be integers >= 3")
    return cfg


def load_config(path: Optional[str] = None, preset: Optional[str] = None,
                experiment: Optional[str] = None, grid: Optional[int] = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    explicit = False
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
        cfg = _merge(cfg, PRESETS[preset])
        explicit = "experiment" in PRESETS[preset]
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        cfg = _merge(cfg, data)
        explicit = explicit or "experiment" in data
    if experiment is not None:
        if not explicit:
            cfg["experiment"] = experiment
        elif cfg["experiment"] != experiment:
            raise ConfigError(f"config is for {cfg['experiment']!r}, not {experiment!r}")
    if grid is not None:
        cfg["numerics"]["grid"] = grid
    return _validate(cfg)


def make_params(cfg: dict) -> wg.Params:
    p = cfg["params"]
    try:
        return wg.Params(int(p["n"]), float(p["gamma"]), float(p["lam"]), float(p["epsilon"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def _custom_warp(path: str) -> wg.WarpProfile:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read profile file {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] < 2 or data.shape[0] < 8:
        raise ConfigError("profile file needs columns r, phi and at least 8 rows")
    r, phi = data[:, 0], data[:, 1]
    spline = interpolate.CubicSpline(r, phi)
    tags = [wg.POLE if abs(v) < 1e-12 else wg.BOUNDARY for v in (phi[0], phi[-1])]
    return wg.WarpProfile(spline, wg.Interval(float(r[0]), float(r[-1]), *tags),
                          spline.derivative(1), spline.derivative(2), spline.derivative(3),
                          name=Path(path).stem)


def make_model(cfg: dict, params: Optional[wg.Params] = None, basepoints=None):
    """Model (or pair of models for a dumbbell) described by the config."""
    params = params or make_params(cfg)
    m = cfg["model"]
    kind, topology = m["kind"], m["topology"]
    if kind == "sphere":
        base = models.sphere_model(params)
        if topology == "handle":
            return models.antipodal_sphere_model(params)
    elif kind == "euclidean":
        base = models.euclidean_model(params, float(m["r_max"]))
    elif kind == "hyperbolic-cap":
        base = models.hyperbolic_cap_model(params, float(m["r_max"]))
    elif kind == "space-form":
        base = models.space_form_model(params, float(m["curvature"]), float(m["potential"]),
                                       float(m["r_max"]))
    elif kind == "cylinder":
        base = models.cylinder_model(params, float(m["period"]))
    elif kind == "warped-circle":
        base = models.ModelManifold(params, wg.warped_circle(float(m["period"])),
                                    name="warped-circle")
    else:
        warp = _custom_warp(m["profile_file"])
        poles = [p for p, _ in warp.poles]
        base = models.ModelManifold(params, warp, tuple(poles[:1]), name=warp.name)
    if topology == "handle":
        raise ConfigError(f"handle topology needs a sphere model, not {kind!r}")
    if topology == "dumbbell":
        if not base.basepoints:
            raise ConfigError(f"model {kind!r} has no basepoint for surgery")
        return [base, base]
    return base


def make_profile(name: str) -> neck_profile.NeckProfile:
    return {
        "canonical": neck_profile.build_neck_profile,
        "sqrt": neck_profile.sqrt_profile,
        "xcoth": neck_profile.xcoth_profile,
        "cosh": neck_profile.cosh_profile,
    }[name]()


# ---------------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    experiment: str
    config: dict
    checks: List[dict] = field(default_factory=list)
    scalars: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    wall_clock: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def check(self, name: str, passed: bool, value=None, threshold=None):
        self.checks.append({"name": name, "passed": bool(passed), "value": _plain(value),
                            "threshold": _plain(threshold)})
        return passed

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def failed(self):
        return [c["name"] for c in self.checks if not c["passed"]]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "passed": self.passed,
            "checks": self.checks,
            "scalars": {k: _plain(v) for k, v in self.scalars.items()},
            "artifacts": self.artifacts,
            "wall_clock": self.wall_clock,
            "config": self.config,
        }

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "report.json"
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, allow_nan=True)
        return path


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([v if isinstance(v, str) else f"{v:.17g}" for v in row])
    return str(path)


# ---------------------------------------------------------------------------
# experiments


def run_toy_identity(cfg, report, out: Path):
    profile = make_profile(cfg["numerics"]["profile"])
    grid = int(cfg["numerics"]["grid"])
    x = np.linspace(-1.5, 1.5, grid)
    u_cols = []
    for n in cfg["numerics"]["dims"]:
        n = int(n)
        f = profile(x)
        rel = np.abs(tunnel.toy_identity_defect(profile, n, x)) / f ** (2 - n)
        worst = float(np.max(rel))
        report.check(f"toy_identity_n{n}", worst <= 1e-10, worst, 1e-10)
        coarse = tunnel.toy_identity_fd_residual(profile, n, grid)
        fine = tunnel.toy_identity_fd_residual(profile, n, 4 * grid)
        report.check(f"fd_refinement_n{n}", coarse >= 10 * fine, coarse / fine, 10.0)
        report.scalars[f"toy_max_relative_n{n}"] = worst
        u_cols.append(rel)
    dims = [int(n) for n in cfg["numerics"]["dims"]]
    report.artifacts.append(_write_rows(out / "toy_identity.csv",
                                        ["x"] + [f"relative_n{n}" for n in dims],
                                        zip(x, *u_cols)))


def run_neck_check(cfg, report, out: Path):
    profile = make_profile(cfg["numerics"]["profile"])
    grid = int(cfg["numerics"]["grid"])
    rep = neck_profile.validate_neck(profile, grid)
    for c in rep.constraints.values():
        report.check(c.name, c.passed, c.worst_margin)
    margin = neck_profile.property_of_f_check(profile, grid)
    report.check("neck_margin", margin.passed, margin.min_margin, -1e-12)
    report.scalars["neck_margin_min"] = margin.min_margin
    report.scalars["neck_margin_argmin"] = margin.argmin
    x = np.linspace(-1.5, 1.5, grid)
    d3 = profile.d3f(x) if profile.d3f is not None else np.full_like(x, np.nan)
    report.artifacts.append(_write_rows(out / "neck.csv", ["x", "f", "df", "d2f", "d3f"],
                                        zip(x, profile(x), profile.df(x), profile.d2f(x), d3)))


def run_green_solve(cfg, report, out: Path):
    model = make_model(cfg)
    if isinstance(model, list):
        model = model[0]
    sol = green_radial.green_solve(model)
    res = sol.metadata["residual"]
    report.check("ode_residual", res <= green_radial.RESIDUAL_TOL, res, green_radial.RESIDUAL_TOL)
    for x in sol.basepoints:
        mass = sol.delta_mass(x)
        report.check(f"delta_mass_at_{x:g}", abs(mass - 1) <= 1e-6, mass, 1e-6)
        report.scalars[f"delta_mass_{x:g}"] = mass
    reports = green_radial.green_asymptotics_check(sol)
    for name, rep in zip(("w_minus_one", "dw", "d2w"), reports):
        report.check(f"rate_{name}", rep.passed, rep.slope, rep.margin)
        report.scalars[f"rate_slope_{name}"] = rep.slope
    report.scalars["admixture"] = sol.metadata["admixture"]
    report.scalars["two_sided_constant"] = sol.two_sided_constant(sol.basepoints[0])
    path = out / "green.csv"
    sol.write_csv(path, samples=int(cfg["numerics"]["grid"]))
    report.artifacts.append(str(path))


def _surgery(cfg, gamma=None):
    params = make_params(cfg)
    gamma = params.gamma if gamma is None else gamma
    model = make_model(cfg, wg.Params(params.n, gamma, params.lam, params.epsilon))
    if not isinstance(model, list) and cfg["model"]["topology"] != "handle":
        raise ConfigError("tunnel experiments need topology dumbbell or handle")
    return tunnel.Surgery.prepare(model, gamma, params.lam, params.epsilon)


def run_tunnel_build(cfg, report, out: Path):
    num = cfg["numerics"]
    params = make_params(cfg)
    surgery = _surgery(cfg)
    profile = make_profile(num["profile"])
    if num["r0"] is not None:
        asm = tunnel.assemble_tunnel(None, 0, 0, 0, float(num["r0"]), profile, surgery=surgery)
        scan = tunnel.region_defect_scan(asm)
        r0 = asm.r0
    else:
        try:
            found = tunnel.r0_search(None, params.gamma, params.lam, params.epsilon, profile,
                                     surgery=surgery, floor=float(num["r0_floor"]),
                                     bisections=int(num["bisections"]))
        except NotAdmissible as exc:
            report.check("r0_found", False, None)
            report.scalars["tested"] = [[r, ok] for r, ok, _ in exc.tested]
            return
        asm, scan, r0 = found.assembly, found.defect, found.r0
        report.scalars["tested"] = [[r, ok] for r, ok, _ in found.tested]
    report.scalars["topology"] = asm.topology
    report.scalars["r0_star"] = r0
    report.check("r0_positive", r0 > 0, r0, 0.0)
    report.check("interface_matching", asm.interface["passed"], asm.interface["max"],
                 tunnel.MATCH_TOL)
    report.check("min_defect_nonnegative", scan.nonnegative, scan.min, 0.0)
    agree = tunnel.curvature_agreement(asm, np.linspace(-r0, r0, int(num["grid"])))
    worst = max(agree["ric_rr"], agree["ric_ee"])
    report.check("curvature_two_routes", worst <= 1e-10, worst, 1e-10)
    report.check("mixed_ricci", agree["mixed"] <= 1e-12, agree["mixed"], 1e-12)
    report.scalars["min_defect_region_I"] = scan.min_region_I
    report.scalars["min_defect_region_II"] = scan.min_region_II
    if asm.model.closed:
        eig = spectral.lambda1_radial(asm.model, cells=int(num["cells"]), focus=asm.focus)
        bound = params.target - 1e-5
        report.check("lambda1_certified", eig.lambda1 >= bound, eig.lambda1, bound)
        report.check("fiber_mode_gap", eig.fiber_mode_gap >= 0, eig.fiber_mode_gap, 0.0)
        report.scalars["lambda1"] = eig.lambda1
    path = out / "tunnel.csv"
    asm.write_csv(path, samples=int(num["grid"]))
    report.artifacts.append(str(path))


def run_defect_scan(cfg, report, out: Path):
    num = cfg["numerics"]
    params = make_params(cfg)
    surgery = _surgery(cfg)
    profile = make_profile(num["profile"])
    radii = tunnel.dyadic_candidates(surgery.r0_max, float(num["r0_floor"]))
    radii = radii[: int(num["scan_levels"])]
    rows = []
    for r0 in radii:
        asm = tunnel.assemble_tunnel(None, 0, 0, 0, float(r0), profile, surgery=surgery)
        scan = tunnel.region_defect_scan(asm)
        rows.append((r0, scan.center, scan.center_relative, scan.min_region_I,
                     scan.min_region_II, scan.structural["neck_coefficient_center"]))
    coeff = params.gamma * (params.n - 2) - (params.n - 1)
    centre_signs = [np.sign(r[1]) for r in rows]
    # the neck term dominates at the centre once r0 is small
    expected = np.sign(coeff) if coeff != 0 else centre_signs[-1]
    report.check("center_sign_matches_coefficient", centre_signs[-1] == expected,
                 rows[-1][2], 0.0)
    report.scalars["neck_coefficient"] = coeff
    report.scalars["center_relative"] = [r[2] for r in rows]
    report.scalars["all_center_negative"] = bool(all(s < 0 for s in centre_signs))
    report.artifacts.append(_write_rows(
        out / "defect_scan.csv",
        ["r0", "D_center", "D_center_relative", "min_region_I", "min_region_II",
         "neck_coefficient_center"], rows))


def random_test_functions(model, count: int, seed: int):
    """Smooth random radial test functions (low Fourier modes, regular at poles)."""
    rng = np.random.default_rng(seed)
    dom = model.warp.domain
    if isinstance(dom, wg.Circle):
        lo, length = 0.0, dom.period
    else:
        lo, length = dom.r_min, dom.length
    funcs = []
    for _ in range(count):
        coef = rng.normal(size=6) / (1 + np.arange(6)) ** 2
        if isinstance(dom, wg.Circle):
            phase = rng.uniform(0, 2 * np.pi, 6)
            fn = (lambda c, ph: lambda r: sum(
                ck * np.cos(2 * np.pi * k * (r - lo) / length + ph[k])
                for k, ck in enumerate(c)))(coef, phase)
        else:
            fn = (lambda c: lambda r: sum(
                ck * np.cos(np.pi * k * (r - lo) / length) for k, ck in enumerate(c)))(coef)
        funcs.append(fn)
    return funcs


def run_lambda1(cfg, report, out: Path):
    num = cfg["numerics"]
    model = make_model(cfg)
    if isinstance(model, list):
        model = model[0]
    if not model.closed:
        raise ConfigError("lambda1 needs a closed model; open models are certified by defect only")
    cells = int(num["cells"])
    eig = spectral.lambda1_radial(model, cells=cells, extrapolate=True)
    report.scalars["lambda1"] = eig.lambda1
    report.scalars["lambda1_extrapolated"] = eig.extrapolated
    report.scalars["fiber_mode_gap"] = eig.fiber_mode_gap
    report.check("fiber_mode_gap", eig.fiber_mode_gap >= 0, eig.fiber_mode_gap, 0.0)
    report.check("ground_state_one_signed", eig.sign_ratio >= -1e-10, eig.sign_ratio, 0.0)
    disc = spectral.discretize(model, cells=cells)
    worst = math.inf
    for fn in random_test_functions(model, int(num["test_functions"]), int(cfg["seed"])):
        q = spectral.rayleigh_quotient(model, fn, disc=disc)
        worst = min(worst, q - eig.lambda1)
    report.check("rayleigh_upper_bound", worst >= -1e-8, worst, -1e-8)
    report.artifacts.append(_write_rows(out / "lambda1.csv", ["r", "eigenvector"],
                                        zip(eig.centers, eig.eigenvector)))


def _threshold_point(args):
    cfg, gamma = args
    start = time.perf_counter()
    try:
        surgery = _surgery(cfg, gamma)
        found = tunnel.r0_search(None, gamma, surgery.params.lam, surgery.params.epsilon,
                                 make_profile(cfg["numerics"]["profile"]), surgery=surgery,
                                 floor=float(cfg["numerics"]["r0_floor"]),
                                 bisections=int(cfg["numerics"]["bisections"]))
        return gamma, True, found.r0, time.perf_counter() - start
    except NotAdmissible:
        return gamma, False, float("nan"), time.perf_counter() - start


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be positive")
    return value


def threshold_scan(cfg) -> List[tuple]:
    num = cfg["numerics"]
    gammas = np.linspace(num["gamma_min"], num["gamma_max"], int(num["gamma_steps"]))
    jobs = [(cfg, round(float(g), 12)) for g in gammas]
    workers = worker_count()
    if workers == 1:
        rows = [_threshold_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_threshold_point, jobs))
    return sorted(rows, key=lambda r: r[0])


def locate_flip(rows) -> Optional[float]:
    """First admissible gamma above the last inadmissible one."""
    last_bad = max((g for g, ok, *_ in rows if not ok), default=-math.inf)
    above = [g for g, ok, *_ in rows if ok and g > last_bad]
    return min(above) if above else None


def run_threshold_scan(cfg, report, out: Path):
    params = make_params(cfg)
    rows = threshold_scan(cfg)
    flip = locate_flip(rows)
    critical = params.critical_gamma
    report.scalars["gamma_hat"] = flip
    report.scalars["critical_gamma"] = critical
    report.check("flip_found", flip is not None, flip)
    report.check("flip_above_critical", flip is not None and flip > critical, flip, critical)
    sub = [ok for g, ok, *_ in rows if g <= critical]
    report.check("subcritical_not_admissible", not any(sub), sum(sub), 0)
    report.artifacts.append(_write_rows(out / "threshold_scan.csv",
                                        ["gamma", "admissible", "r0_star", "seconds"],
                                        [(g, str(ok), r, s) for g, ok, r, s in rows]))


def run_asymptotics(cfg, report, out: Path):
    num = cfg["numerics"]
    surgery = _surgery(cfg)
    radii = wg.dyadic_radii(float(num["rate_start"]), int(num["rate_levels"]))
    rates = tunnel.blend_asymptotics(surgery, radii)
    for name, rep in rates.items():
        report.check(f"blend_{name}", rep.passed, rep.slope, rep.margin)
    side = surgery.sides[0]
    for name, rep in zip(("w_minus_one", "dw", "d2w"),
                         green_radial.green_asymptotics_check(side.green, side.basepoint)):
        report.check(f"green_{name}", rep.passed, rep.slope, rep.margin)
    rows = [[r0] + [q for _, q in [rep.samples[i] for rep in rates.values()]]
            for i, r0 in enumerate(sorted(radii, reverse=True))]
    report.artifacts.append(_write_rows(out / "asymptotics.csv", ["r0"] + list(rates), rows))


RUNNERS = {
    "toy-identity": run_toy_identity,
    "neck-check": run_neck_check,
    "green-solve": run_green_solve,
    "tunnel-build": run_tunnel_build,
    "defect-scan": run_defect_scan,
    "lambda1": run_lambda1,
    "threshold-scan": run_threshold_scan,
    "asymptotics": run_asymptotics,
}


def run(cfg: dict, out: Optional[Path] = None) -> RunReport:
    """Run one configured experiment and write its report."""
    out = Path(out or cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(cfg["experiment"], cfg)
    start = time.perf_counter()
    try:
        RUNNERS[cfg["experiment"]](cfg, report, out)
    except ConfigError:
        raise
    except TunnelError as exc:
        report.check(f"{type(exc).__name__}", False, str(exc))
    report.wall_clock = time.perf_counter() - start
    report.artifacts.append(str(report.write(out)))
    return report


# ---------------------------------------------------------------------------
# baselines

IGNORED_KEYS = ("wall_clock", "artifacts", "config")


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(value, list) and value and isinstance(value[0], dict) and "name" in value[0]:
        for item in value:
            _flatten(f"{prefix}.{item['name']}", {k: v for k, v in item.items() if k != "name"}, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out[prefix] = value


def compare_baseline(report: dict, baseline: dict, rel: float = 1e-9, abs_tol: float = 1e-9,
                     tolerances: Optional[Dict[str, float]] = None) -> List[dict]:
    """Scalar-by-scalar differences beyond tolerance; an empty list means equal."""
    if report.get("schema_version") != baseline.get("schema_version"):
        raise SchemaMismatch(f"schema {report.get('schema_version')} vs "
                             f"{baseline.get('schema_version')}")
    tolerances = tolerances or {}
    a, b = {}, {}
    _flatten("", {k: v for k, v in report.items() if k not in IGNORED_KEYS}, a)
    _flatten("", {k: v for k, v in baseline.items() if k not in IGNORED_KEYS}, b)
    diffs = []
    for key in sorted(set(a) | set(b)):
        if key not in a or key not in b:
            diffs.append({"key": key, "report": a.get(key), "baseline": b.get(key)})
            continue
        x, y = a[key], b[key]
        if isinstance(x, (int, float)) and isinstance(y, (int, float)) \
                and not isinstance(x, bool) and not isinstance(y, bool):
            if math.isnan(x) and math.isnan(y):
                continue
            tol = tolerances.get(key, max(abs_tol, rel * max(abs(x), abs(y))))
            if not abs(x - y) <= tol:
                diffs.append({"key": key, "report": x, "baseline": y, "difference": x - y})
        elif x != y:
            diffs.append({"key": key, "report": x, "baseline": y})
    return diffs


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-tunnel",
                                     description="Spectral Ricci bounds under surgery: experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
        p.add_argument("--out", help="output directory")
        p.add_argument("--grid", type=int, help="override numerics.grid")
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("compare")
    p.add_argument("report")
    p.add_argument("baseline")
    p.add_argument("--rel", type=float, default=1e-9)
    p.add_argument("--abs", type=float, default=1e-9, dest="abs_tol")
    p.add_argument("--quiet", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    if args.command == "compare":
        try:
            with open(args.report) as fh:
                report = json.load(fh)
            with open(args.baseline) as fh:
                baseline = json.load(fh)
            diffs = compare_baseline(report, baseline, args.rel, args.abs_tol)
        except (OSError, json.JSONDecodeError, SchemaMismatch) as exc:
            log.error("compare: %s", exc)
            return 2
        for d in diffs:
            log.warning("%s: %s != %s", d["key"], d["report"], d["baseline"])
        log.info("%d difference(s)", len(diffs))
        return 0 if not diffs else 1
    try:
        cfg = load_config(args.config, args.preset, args.command, args.grid)
        if args.out:
            cfg["output"]["dir"] = args.out
        report = run(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    for c in report.checks:
        log.info("%-4s %-36s %s", "ok" if c["passed"] else "FAIL", c["name"], c["value"])
    if not report.passed:
        log.warning("failed checks: %s", ", ".join(report.failed()))
    log.info("report: %s (%.1fs)", Path(report.artifacts[-1]), report.wall_clock)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
