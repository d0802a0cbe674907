"""Command-line interface: equilibrium | modes | sweep | simulate | aggregate.

Data goes to files (or stdout for `equilibrium`); all diagnostics go to
stderr.  Exit codes: 0 success, 1 structural/config error, 2 partial ray
failures (sweep output is still written for the successful rays).
"""

from __future__ import annotations

import argparse
import hashlib
import importlib.resources
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .boundary import smax
from .equilibrium import solve_equilibrium
from .errors import AnchorUnstable, DomainError, NoEquilibrium, StructuralError
from .modal import is_stable, jacobian, spectrum, top_participants
from .model import aggregate
from .params import (bind, default_spec, dumps_spec, load_spec, read_param,
                     save_spec, validate_spec)
from .state import StateLayout
from .sweep import (SweepConfig, plane_for_spec, region_meta, sweep_region,
                    worker_count, write_boundary_csv, write_meta)
from .timedomain import Scenario, simulate, write_timeseries_csv

DEFAULT_CONFIG_CANDIDATES = ("default_farm.toml",
                             os.path.join("config", "default_farm.toml"))


def _log(msg):
    print(msg, file=sys.stderr)


def _load_config(args):
    if args.config:
        spec = load_spec(args.config)
    else:
        for cand in DEFAULT_CONFIG_CANDIDATES:
            if os.path.exists(cand):
                spec = load_spec(cand)
                break
        else:
            ref = importlib.resources.files("stabmap").joinpath(
                "data/default_farm.toml")
            spec = load_spec_text(ref.read_text(encoding="utf-8"))
    if args.units:
        if any(u != spec.units[0] for u in spec.units):
            raise StructuralError("--units needs a config with identical units")
        spec = default_like(spec, args.units)
    return validate_spec(spec)


def load_spec_text(text):
    from .params import loads_spec

    return loads_spec(text)


def default_like(spec, n):
    import dataclasses

    return dataclasses.replace(
        spec, units=(spec.units[0],) * n, feeders=(spec.feeders[0],) * n,
        system_mva=None,
    )


def _spec_hash(spec):
    return hashlib.sha256(dumps_spec(spec).encode()).hexdigest()[:16]


def _manifest(subcommand, spec, args_ns, outputs):
    opts = {k: v for k, v in sorted(vars(args_ns).items())
            if k not in ("func",) and v is not None}
    return {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config_hash": _spec_hash(spec),
        "resolved_options": {k: (list(v) if isinstance(v, tuple) else v)
                             for k, v in opts.items()},
        "outputs": sorted(outputs),
    }


def cmd_equilibrium(args):
    spec = _load_config(args)
    res = solve_equilibrium(spec)
    layout = StateLayout(spec.n_units)
    doc = {
        "residual_norm": res.residual_norm,
        "iterations": res.iterations,
        "homotopy_steps": res.homotopy_steps,
        "states": dict(zip(layout.names(), (float(v) for v in res.x_star))),
    }
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_modes(args):
    spec = _load_config(args)
    res = solve_equilibrium(spec)
    rep = spectrum(jacobian(spec, res.x_star))
    layout = StateLayout(spec.n_units)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "modes.csv")
    order = np.argsort(-rep.eigenvalues.real)
    lines = ["index,re,im,freq_hz,damping_ratio,top_states"]
    for rank, i in enumerate(order):
        lam = rep.eigenvalues[i]
        tops = top_participants(rep, int(i), layout, k=5)
        tops_s = "|".join(f"{n}:{p:.4f}" for n, p in tops)
        lines.append(",".join([
            str(rank), repr(float(lam.real)), repr(float(lam.imag)),
            repr(float(rep.frequencies_hz[i])),
            repr(float(rep.damping_ratios[i])), tops_s,
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = _manifest("modes", spec, args, ["modes.csv"])
    meta["verdict"] = is_stable(rep)
    meta["max_real"] = rep.max_real
    write_meta(meta, os.path.join(args.out, "meta.json"))
    _log(f"modes: {len(order)} eigenvalues, verdict {meta['verdict']}")
    return 0


def _parse_range(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise StructuralError(f"bad range {text!r}, expected lo:hi") from None
    return lo, hi


def cmd_sweep(args):
    spec = _load_config(args)
    axes = tuple(p.strip() for p in args.plane.split(","))
    if len(axes) != 2:
        raise StructuralError("--plane needs two comma-separated parameter paths")
    plane = plane_for_spec(spec, axes, (_parse_range(args.range1),
                                        _parse_range(args.range2)))
    config = SweepConfig(plane=plane, rays=args.rays, s0=args.s0,
                         alpha=args.alpha, deadband=args.deadband)
    t0 = time.perf_counter()
    region = sweep_region(spec, config, workers=args.workers)
    wall = time.perf_counter() - t0
    os.makedirs(args.out, exist_ok=True)
    write_boundary_csv(region, os.path.join(args.out, "boundary.csv"))
    meta = _manifest("sweep", spec, args, ["boundary.csv"])
    meta.update(region_meta(region))
    write_meta(meta, os.path.join(args.out, "meta.json"))
    _log(f"sweep: {config.rays} rays in {wall:.1f}s on "
         f"{worker_count(args.workers)} workers; "
         f"status counts {meta['status_counts']}")
    if region.n_failed:
        _log(f"sweep: {region.n_failed} rays failed")
        return 2
    return 0


def _parse_event(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise StructuralError(f"bad event {text!r}, expected time:path:value")
    return float(parts[0]), parts[1], float(parts[2])


def cmd_simulate(args):
    spec = _load_config(args)
    res = solve_equilibrium(spec)
    events = tuple(_parse_event(e) for e in (args.event or ()))
    outputs = tuple(s.strip() for s in args.outputs.split(",")) if args.outputs else ()
    scenario = Scenario(t_end=args.t_end, events=events, outputs=outputs,
                        dt_out=args.dt_out)
    sim = simulate(spec, res.x_star, scenario)
    os.makedirs(args.out, exist_ok=True)
    write_timeseries_csv(sim, os.path.join(args.out, "timeseries.csv"))
    meta = _manifest("simulate", spec, args, ["timeseries.csv"])
    meta["escaped"] = bool(sim.escaped)
    meta["escape_time"] = sim.escape_time
    write_meta(meta, os.path.join(args.out, "meta.json"))
    if sim.escaped:
        _log(f"simulate: finite escape at t = {sim.escape_time:.4f} s")
    else:
        _log(f"simulate: bounded over {args.t_end} s")
    return 0


def cmd_aggregate(args):
    spec = _load_config(args)
    parts = [float(v) for v in args.groups.split(":")]
    total = sum(parts)
    if total <= 0:
        raise StructuralError("group ratios must be positive")
    agg = aggregate(spec, [p / total for p in parts])
    save_spec(agg, args.out)
    _log(f"aggregate: {spec.n_units} units -> {agg.n_units} groups "
         f"({args.groups}) written to {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="stabmap",
        description="Small-signal stability region mapping for DFIG farms",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="farm description TOML")
        p.add_argument("--units", type=int,
                       help="override unit count (identical-unit configs)")

    p = sub.add_parser("equilibrium", help="solve and print the operating point")
    common(p)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("modes", help="eigenvalues and participation factors")
    common(p)
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("sweep", help="map a stability region in a 2-D plane")
    common(p)
    p.add_argument("--plane", required=True,
                   help="two parameter paths, e.g. unit1.omega_mref,unit1.Qgref")
    p.add_argument("--range1", required=True, help="axis-1 bounds lo:hi")
    p.add_argument("--range2", required=True, help="axis-2 bounds lo:hi")
    p.add_argument("--rays", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.05)
    p.add_argument("--s0", type=float, default=0.1)
    p.add_argument("--deadband", type=float, default=1e-8)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="nonlinear time-domain scenario")
    common(p)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--event", action="append",
                   help="time:path:value, e.g. 5.0:grid.V:0.8 (repeatable)")
    p.add_argument("--outputs", help="comma-separated signal names")
    p.add_argument("--dt-out", type=float, default=1e-3)
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aggregate", help="write an aggregated farm description")
    common(p)
    p.add_argument("--groups", required=True, help="capacity ratios, e.g. 2:1")
    p.add_argument("--out", default="aggregated_farm.toml")
    p.set_defaults(func=cmd_aggregate)
    return ap


def _join_range_flags(argv):
    """Fold `--range1 -0.2:0.2` into one token so argparse accepts the value."""
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok in ("--range1", "--range2") and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None):
    ap = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    argv = _join_range_flags(list(argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map to the structural-error code
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (StructuralError, DomainError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return 1
    except (NoEquilibrium, AnchorUnstable) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
