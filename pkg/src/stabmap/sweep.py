"""Ray scheduling, geometric predictor, and stability-region assembly.

Each ray marches outward from the anchor with geometrically growing
distance (s <- alpha * s), solving a warm-started equilibrium and checking
the spectrum at every step.  The first definite stable->unstable sign
change brackets the corrector; leaving the box while still stable closes
the ray at Smax.  A vanished equilibrium is treated as a fold-type bracket.
Rays are independent and run on a worker pool; assembly is ordered by ray
index so repeated runs are byte-identical.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import __version__
from .boundary import (
    BoundaryPoint,
    BoundarySystem,
    Bracket,
    ParameterPlane,
    correct,
    normalize_plane,
    smax,
)
from .equilibrium import solve_equilibrium
from .errors import AnchorUnstable, NoEquilibrium, StructuralError
from .modal import jacobian_exact
from .model import rhs
from .params import bind, dumps_spec, read_param

BOX_TOL = 1e-9


@dataclass(frozen=True)
class SweepConfig:
    plane: ParameterPlane
    rays: int = 100
    s0: float = 0.1
    alpha: float = 1.05
    deadband: float = 1e-8

    def __post_init__(self):
        if self.rays < 4:
            raise StructuralError("need at least 4 rays")
        if not self.alpha > 1.0:
            raise StructuralError("step growth rate alpha must exceed 1")
        if not self.s0 > 0.0:
            raise StructuralError("initial distance s0 must be positive")

    def thetas(self):
        return [i * 2.0 * math.pi / self.rays for i in range(1, self.rays + 1)]


@dataclass
class StabilityRegion:
    points: list
    anchor: tuple
    plane: ParameterPlane
    config: SweepConfig
    spec_hash: str
    n_failed: int = 0
    metadata: dict = field(default_factory=dict)


def plane_for_spec(spec, axes, original_bounds) -> ParameterPlane:
    """Normalized plane anchored at the spec's current parameter values."""
    anchor = tuple(read_param(spec, p) for p in axes)
    return normalize_plane(axes, original_bounds, anchor)


def spec_ray_system(spec, plane: ParameterPlane, theta: float) -> BoundarySystem:
    """BoundarySystem whose parameter vector binds two spec paths."""

    def bound_spec(k):
        orig = plane.to_original(k)
        s = bind(spec, plane.axes[0], orig[0])
        return bind(s, plane.axes[1], orig[1])

    def f(x, k):
        return rhs(bound_spec(k), x)

    def jac(x, k):
        return jacobian_exact(bound_spec(k), x)

    def solve_eq(k, x_guess):
        return solve_equilibrium(bound_spec(k), x_guess=x_guess).x_star

    n = spec.n_states
    return BoundarySystem(f=f, jac=jac, solve_eq=solve_eq, n=n,
                          plane=plane, theta=theta)


def _critical_pair(J):
    w, vr = scipy.linalg.eig(J, right=True)
    i = int(np.argmax(w.real))
    lam = w[i]
    if lam.imag < 0.0:
        j = int(np.argmin(np.abs(w - lam.conjugate())))
        lam, i = w[j], j
    return lam, vr[:, i]


def sweep_ray(sys: BoundarySystem, x0, sigma0, config: SweepConfig,
              trace=None) -> BoundaryPoint:
    """March one ray outward and pin its boundary crossing.

    `x0` is the anchor equilibrium and `sigma0` its max Re(lambda); the
    caller guarantees sigma0 < -deadband.  `trace`, when given, collects the
    raw predictor distances before box clipping.
    """
    theta = sys.theta
    s_cap = smax(sys.plane, theta)
    dead = config.deadband
    s_def = 0.0            # last distance with a definitely stable verdict
    x_def = np.asarray(x0, dtype=float)
    sigma_def = sigma0
    x_prev = x_def
    s = config.s0
    while True:
        s = config.alpha * s
        if trace is not None:
            trace.append(s)
        clipped = s >= s_cap - BOX_TOL
        s_eval = min(s, s_cap)
        try:
            x_eval = sys.solve_eq(sys.k_of_s(s_eval), x_prev)
        except NoEquilibrium:
            br = Bracket(s_def, s_eval, x_def, None)
            pt = correct(sys, br)
            return _clip_to_box(sys, pt, s_cap)
        lam, vec = _critical_pair(sys.jac(x_eval, sys.k_of_s(s_eval)))
        sigma = lam.real
        if sigma > dead:
            br = Bracket(s_def, s_eval, x_def, x_eval,
                         sigma_lo=sigma_def, sigma_hi=sigma,
                         lam_crit=lam, eigvec=vec)
            pt = correct(sys, br)
            return _clip_to_box(sys, pt, s_cap)
        if clipped:
            # stable (or only marginal) all the way to the box edge
            return BoundaryPoint(
                theta=theta, s_star=s_cap, k_star=sys.k_of_s(s_cap),
                omega_star=math.nan, freq_hz=math.nan, status="box_exit",
                residual=math.nan, x_star=x_eval,
            )
        x_prev = x_eval
        if sigma < -dead:
            s_def, x_def, sigma_def = s_eval, x_eval, sigma
        # marginal verdicts keep marching without moving the bracket base


def _clip_to_box(sys: BoundarySystem, pt: BoundaryPoint, s_cap: float) -> BoundaryPoint:
    """Crossings the corrector pins beyond the box collapse to a box exit."""
    if pt.status in ("hopf", "fold") and pt.s_star > s_cap + BOX_TOL:
        return BoundaryPoint(
            theta=pt.theta, s_star=s_cap, k_star=sys.k_of_s(s_cap),
            omega_star=math.nan, freq_hz=math.nan, status="box_exit",
            residual=math.nan, diagnostics=pt.diagnostics,
        )
    return pt


def _spec_hash(spec) -> str:
    return hashlib.sha256(dumps_spec(spec).encode()).hexdigest()[:16]


def _ray_task(args):
    spec, plane, theta, config, x0, sigma0 = args
    sys = spec_ray_system(spec, plane, theta)
    try:
        return sweep_ray(sys, x0, sigma0, config)
    except Exception as exc:  # per-ray failures must not abort the region
        return BoundaryPoint(
            theta=theta, s_star=math.nan, k_star=np.full(2, math.nan),
            omega_star=math.nan, freq_hz=math.nan, status="corrector_failed",
            residual=math.nan, diagnostics={"error": repr(exc)},
        )


def worker_count(requested=None) -> int:
    env = os.environ.get("STABMAP_THREADS")
    n = requested or (int(env) if env else None) or os.cpu_count() or 1
    if env:
        n = min(n, int(env))
    return max(1, n)


def sweep_region(spec, config: SweepConfig, workers=None) -> StabilityRegion:
    """Run every ray of the configured plane; deterministic point ordering."""
    res = solve_equilibrium(spec)
    J0 = jacobian_exact(spec, res.x_star)
    sigma0 = float(np.max(scipy.linalg.eigvals(J0).real))
    if sigma0 >= -config.deadband:
        raise AnchorUnstable(
            f"anchor operating point has max Re(lambda) = {sigma0:.3e}"
        )
    tasks = [(spec, config.plane, theta, config, res.x_star, sigma0)
             for theta in config.thetas()]
    nw = worker_count(workers)
    if nw > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=nw) as pool:
            points = list(pool.map(_ray_task, tasks, chunksize=1))
    else:
        points = [_ray_task(t) for t in tasks]
    n_failed = sum(p.status == "corrector_failed" for p in points)
    return StabilityRegion(
        points=points,
        anchor=tuple(config.plane.k0),
        plane=config.plane,
        config=config,
        spec_hash=_spec_hash(spec),
        n_failed=n_failed,
    )


# ---------------------------------------------------------------------------
# output files

BOUNDARY_HEADER = ("ray,theta_rad,s_star,k1_norm,k2_norm,"
                   "k1_orig,k2_orig,freq_hz,status,residual")


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_boundary_csv(region: StabilityRegion, path):
    lines = [BOUNDARY_HEADER]
    delta = np.asarray(region.plane.delta)
    for i, p in enumerate(region.points, start=1):
        k = np.asarray(p.k_star, dtype=float)
        orig = k * delta
        lines.append(",".join([
            str(i), _fmt(float(p.theta)), _fmt(float(p.s_star)),
            _fmt(float(k[0])), _fmt(float(k[1])),
            _fmt(float(orig[0])), _fmt(float(orig[1])),
            _fmt(float(p.freq_hz)), p.status, _fmt(float(p.residual)),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def region_meta(region: StabilityRegion) -> dict:
    cfg = region.config
    return {
        "tool_version": __version__,
        "spec_hash": region.spec_hash,
        "plane": {
            "axes": list(region.plane.axes),
            "delta": list(region.plane.delta),
            "k_lb": list(region.plane.k_lb),
            "k_ub": list(region.plane.k_ub),
            "anchor_norm": list(region.plane.k0),
            "anchor_orig": list(np.asarray(region.plane.k0)
                                * np.asarray(region.plane.delta)),
        },
        "config": {"rays": cfg.rays, "s0": cfg.s0, "alpha": cfg.alpha,
                   "deadband": cfg.deadband},
        "n_failed": region.n_failed,
        "status_counts": {
            s: sum(p.status == s for p in region.points)
            for s in ("hopf", "fold", "box_exit", "no_equilibrium",
                      "corrector_failed")
        },
    }


def write_meta(meta: dict, path):
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
