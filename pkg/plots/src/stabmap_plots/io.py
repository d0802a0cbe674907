"""Strict readers for the stabmap output files."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

BOUNDARY_HEADER = ("ray,theta_rad,s_star,k1_norm,k2_norm,"
                   "k1_orig,k2_orig,freq_hz,status,residual")
MODES_HEADER = "index,re,im,freq_hz,damping_ratio,top_states"

STATUSES = ("hopf", "fold", "box_exit", "no_equilibrium", "corrector_failed")


class ParseError(ValueError):
    pass


class MetaMismatch(ValueError):
    """CSV de-normalized values disagree with the meta.json echoes."""


@dataclass
class BoundaryData:
    rays: np.ndarray
    theta: np.ndarray
    s_star: np.ndarray
    k_norm: np.ndarray     # (n, 2)
    k_orig: np.ndarray     # (n, 2)
    freq_hz: np.ndarray
    status: list
    residual: np.ndarray
    meta: dict


def _float(text, path, row):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{path}: row {row}: bad number {text!r}") from None


def read_meta(directory):
    path = os.path.join(directory, "meta.json")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_boundary(directory) -> BoundaryData:
    """Parse boundary.csv + meta.json and verify the de-normalization echo.

    Every row's original-unit coordinates must equal the normalized ones
    times the plane scale from meta.json, bit-exactly; a mismatch means the
    files do not belong together.
    """
    path = os.path.join(directory, "boundary.csv")
    meta = read_meta(directory)
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != BOUNDARY_HEADER:
        raise ParseError(f"{path}: row 1: expected header {BOUNDARY_HEADER!r}")
    delta = meta["plane"]["delta"]
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 10:
            raise ParseError(f"{path}: row {i}: expected 10 fields, "
                             f"got {len(parts)}")
        status = parts[8]
        if status not in STATUSES:
            raise ParseError(f"{path}: row {i}: unknown status {status!r}")
        vals = [_float(parts[j], path, i) for j in
                (0, 1, 2, 3, 4, 5, 6, 7, 9)]
        k1n, k2n, k1o, k2o = vals[3], vals[4], vals[5], vals[6]
        for kn, ko, d, ax in ((k1n, k1o, delta[0], 1), (k2n, k2o, delta[1], 2)):
            expect = kn * d
            same = (expect == ko) or (math.isnan(expect) and math.isnan(ko))
            if not same:
                raise MetaMismatch(
                    f"{path}: row {i}: axis {ax} de-normalization "
                    f"{kn!r} * {d!r} = {expect!r} != {ko!r}")
        rows.append((vals, status))
    arr = np.array([v for v, _ in rows])
    return BoundaryData(
        rays=arr[:, 0].astype(int), theta=arr[:, 1], s_star=arr[:, 2],
        k_norm=arr[:, 3:5], k_orig=arr[:, 5:7], freq_hz=arr[:, 7],
        status=[s for _, s in rows], residual=arr[:, 8], meta=meta,
    )


def read_modes(directory):
    path = os.path.join(directory, "modes.csv")
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != MODES_HEADER:
        raise ParseError(f"{path}: row 1: expected header {MODES_HEADER!r}")
    re_, im_, freq, zeta, tops = [], [], [], [], []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 6:
            raise ParseError(f"{path}: row {i}: expected 6 fields, "
                             f"got {len(parts)}")
        re_.append(_float(parts[1], path, i))
        im_.append(_float(parts[2], path, i))
        freq.append(_float(parts[3], path, i))
        zeta.append(_float(parts[4], path, i))
        entries = []
        if parts[5]:
            for item in parts[5].split("|"):
                name, _, val = item.rpartition(":")
                entries.append((name, _float(val, path, i)))
        tops.append(entries)
    return {"re": np.asarray(re_), "im": np.asarray(im_),
            "freq_hz": np.asarray(freq), "damping": np.asarray(zeta),
            "top_states": tops}


def read_timeseries(directory):
    path = os.path.join(directory, "timeseries.csv")
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("t,"):
        raise ParseError(f"{path}: row 1: expected a 't,<signals>' header")
    names = lines[0].split(",")[1:]
    ncol = len(names) + 1
    data = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != ncol:
            raise ParseError(f"{path}: row {i}: expected {ncol} fields, "
                             f"got {len(parts)}")
        data.append([_float(p, path, i) for p in parts])
    arr = np.asarray(data)
    return {"t": arr[:, 0],
            "signals": {n: arr[:, j + 1] for j, n in enumerate(names)}}
