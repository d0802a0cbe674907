import hashlib
import json
import os
import shutil

import pytest

from stabmap_plots.io import (MetaMismatch, ParseError, read_boundary,
                              read_modes, read_timeseries)
from stabmap_plots.modes import render_modes
from stabmap_plots.region import render_region
from stabmap_plots.timeseries import render_timeseries

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def _tree_digest(path):
    h = hashlib.sha256()
    for root, _, files in sorted(os.walk(path)):
        for f in sorted(files):
            with open(os.path.join(root, f), "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


@pytest.fixture
def fixture_digest():
    return _tree_digest(FIXTURES)


def test_region_toy_circle(tmp_path, fixture_digest):
    src = os.path.join(FIXTURES, "region_toy")
    data = read_boundary(src)
    # analytic circle of radius 0.5 about the origin
    import numpy as np

    radii = np.linalg.norm(data.k_orig, axis=1)
    assert np.allclose(radii, 0.5, atol=1e-6)
    out = render_region([src], tmp_path / "toy.svg")
    assert os.path.getsize(out) > 1000
    assert _tree_digest(FIXTURES) == fixture_digest   # inputs untouched


def test_region_render_idempotent(tmp_path):
    src = os.path.join(FIXTURES, "region_dfig")
    a = render_region([src], tmp_path / "a.svg")
    b = render_region([src], tmp_path / "b.svg")
    assert open(a, "rb").read() == open(b, "rb").read()


def test_region_overlay(tmp_path):
    dirs = [os.path.join(FIXTURES, "region_dfig"),
            os.path.join(FIXTURES, "region_dfig_agg")]
    out = render_region(dirs, tmp_path / "overlay.svg",
                        title="granular vs aggregated")
    assert os.path.getsize(out) > 1000


def test_region_has_neutral_and_colored_segments():
    data = read_boundary(os.path.join(FIXTURES, "region_dfig"))
    statuses = set(data.status)
    assert "hopf" in statuses and "box_exit" in statuses


def test_denormalization_checked_against_meta(tmp_path):
    src = os.path.join(FIXTURES, "region_dfig")
    dst = tmp_path / "corrupt"
    shutil.copytree(src, dst)
    meta = json.load(open(dst / "meta.json"))
    meta["plane"]["delta"][0] *= 1.0000001
    json.dump(meta, open(dst / "meta.json", "w"))
    with pytest.raises(MetaMismatch, match="row"):
        read_boundary(str(dst))


def test_ragged_csv_names_offending_row(tmp_path):
    src = os.path.join(FIXTURES, "region_toy")
    dst = tmp_path / "ragged"
    shutil.copytree(src, dst)
    lines = open(dst / "boundary.csv").read().splitlines()
    lines[3] = lines[3] + ",extra"
    open(dst / "boundary.csv", "w").write("\n".join(lines) + "\n")
    with pytest.raises(ParseError, match="row 4"):
        read_boundary(str(dst))


def test_bad_header_rejected(tmp_path):
    src = os.path.join(FIXTURES, "region_toy")
    dst = tmp_path / "hdr"
    shutil.copytree(src, dst)
    lines = open(dst / "boundary.csv").read().splitlines()
    lines[0] = "ray,theta"
    open(dst / "boundary.csv", "w").write("\n".join(lines) + "\n")
    with pytest.raises(ParseError, match="header"):
        read_boundary(str(dst))


def test_modes_render(tmp_path):
    src = os.path.join(FIXTURES, "modes")
    data = read_modes(src)
    assert data["re"].size == 23
    assert data["top_states"][0]
    out = render_modes(src, tmp_path / "modes.svg")
    assert os.path.getsize(out) > 1000


def test_timeseries_render_growing_envelope(tmp_path):
    src = os.path.join(FIXTURES, "timeseries")
    data = read_timeseries(src)
    import numpy as np

    sig = data["signals"]["u1.u_dc"]
    dev = np.abs(sig - sig[0])
    n = dev.size
    assert np.max(dev[: n // 4]) < np.max(dev[3 * n // 4:])  # growth
    meta = json.load(open(os.path.join(src, "meta.json")))
    assert meta["escaped"] is True
    out = render_timeseries(src, tmp_path / "ts.svg")
    assert os.path.getsize(out) > 1000


def test_cli_entry_points(tmp_path):
    from stabmap_plots import modes as m
    from stabmap_plots import region as r
    from stabmap_plots import timeseries as t

    assert r.main(["--in", os.path.join(FIXTURES, "region_toy"),
                   "--out", str(tmp_path / "r.svg")]) == 0
    assert m.main(["--in", os.path.join(FIXTURES, "modes"),
                   "--out", str(tmp_path / "m.png")]) == 0
    assert t.main(["--in", os.path.join(FIXTURES, "timeseries"),
                   "--out", str(tmp_path / "t.png")]) == 0
    for f in ("r.svg", "m.png", "t.png"):
        assert os.path.getsize(tmp_path / f) > 1000
