"""Stability-region boundary figures: closed polyline in original units,
crossing segments colored by unstable frequency, box exits in a neutral
style, anchor hexagram and bound pentagrams."""

from __future__ import annotations

import argparse

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
from matplotlib import cm, colors
from matplotlib.collections import LineCollection

from .io import read_boundary

CROSSING = ("hopf", "fold")
LINESTYLES = ("solid", "dashed", "dashdot", "dotted")


def _segments(data):
    """Consecutive-ray segments in original units, closed around the circle."""
    pts = data.k_orig
    n = len(pts)
    segs, kinds, freqs = [], [], []
    for i in range(n):
        j = (i + 1) % n
        segs.append([pts[i], pts[j]])
        a, b = data.status[i], data.status[j]
        if a in CROSSING and b in CROSSING:
            kinds.append("crossing")
            fa, fb = data.freq_hz[i], data.freq_hz[j]
            freqs.append(np.nanmean([fa, fb]))
        else:
            kinds.append("neutral")
            freqs.append(np.nan)
    return segs, kinds, np.asarray(freqs)


def render_region(directories, out_path, title=None):
    """Overlay the boundary curves of one or more sweep output directories."""
    datas = [read_boundary(d) for d in directories]
    all_freqs = np.concatenate([
        d.freq_hz[[s in CROSSING for s in d.status]] for d in datas
    ]) if datas else np.array([])
    finite = all_freqs[np.isfinite(all_freqs)]
    if finite.size:
        norm = colors.Normalize(vmin=float(np.min(finite)),
                                vmax=float(max(np.max(finite), 1e-9)))
    else:
        norm = colors.Normalize(vmin=0.0, vmax=1.0)
    cmap = matplotlib.colormaps["turbo"]

    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    for data, ls in zip(datas, LINESTYLES * (len(datas) // 4 + 1)):
        segs, kinds, freqs = _segments(data)
        cross = [s for s, k in zip(segs, kinds) if k == "crossing"]
        cfreq = freqs[[k == "crossing" for k in kinds]]
        neutral = [s for s, k in zip(segs, kinds) if k == "neutral"]
        if cross:
            lc = LineCollection(cross, cmap=cmap, norm=norm, linewidths=1.8,
                                linestyles=ls)
            lc.set_array(cfreq)
            ax.add_collection(lc)
        if neutral:
            ax.add_collection(LineCollection(
                neutral, colors="0.6", linewidths=1.0, linestyles=ls))
        meta_plane = data.meta["plane"]
        anchor = np.asarray(meta_plane["anchor_orig"])
        ax.plot(*anchor, marker=(6, 1, 0), markersize=14, color="goldenrod",
                markeredgecolor="black", linestyle="none", zorder=5)
        delta = np.asarray(meta_plane["delta"])
        lo = np.asarray(meta_plane["k_lb"]) * delta
        hi = np.asarray(meta_plane["k_ub"]) * delta
        corners = [(lo[0], lo[1]), (lo[0], hi[1]), (hi[0], lo[1]),
                   (hi[0], hi[1])]
        for cx, cy in corners:
            ax.plot(cx, cy, marker=(5, 1, 0), markersize=10, color="black",
                    linestyle="none", zorder=5)
        ax.set_xlim(lo[0] - 0.03 * delta[0], hi[0] + 0.03 * delta[0])
        ax.set_ylim(lo[1] - 0.03 * delta[1], hi[1] + 0.03 * delta[1])

    axes_names = datas[0].meta["plane"]["axes"]
    ax.set_xlabel(f"{axes_names[0]} (original units)")
    ax.set_ylabel(f"{axes_names[1]} (original units)")
    if title:
        ax.set_title(title)
    if finite.size:
        sm = cm.ScalarMappable(norm=norm, cmap=cmap)
        fig.colorbar(sm, ax=ax, label="unstable frequency (Hz)")
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Date": None}
                if str(out_path).endswith(".svg") else None)
    plt.close(fig)
    return out_path


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="Render stability-region boundary curves")
    ap.add_argument("--in", dest="inputs", action="append", required=True,
                    help="sweep output directory (repeat to overlay)")
    ap.add_argument("--out", required=True, help="output image file")
    ap.add_argument("--title")
    args = ap.parse_args(argv)
    render_region(args.inputs, args.out, title=args.title)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
