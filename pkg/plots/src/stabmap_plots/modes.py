"""Mode charts: eigenvalue scatter plus a participation bar panel for the
least-damped mode."""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt
import numpy as np

from .io import read_modes


def render_modes(directory, out_path, title=None):
    data = read_modes(directory)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.2))

    stable = data["re"] <= 0
    ax1.scatter(data["re"][stable], data["im"][stable] / (2 * np.pi),
                s=22, color="tab:blue", label="stable")
    if np.any(~stable):
        ax1.scatter(data["re"][~stable], data["im"][~stable] / (2 * np.pi),
                    s=30, color="tab:red", label="unstable")
    ax1.axvline(0.0, color="0.5", linewidth=0.8)
    ax1.set_xlabel("Re $\\lambda$ (1/s)")
    ax1.set_ylabel("Im $\\lambda$ / $2\\pi$ (Hz)")
    ax1.legend(loc="best", fontsize=8)

    i = int(np.argmax(data["re"]))
    tops = data["top_states"][i]
    if tops:
        names = [n for n, _ in tops][::-1]
        vals = [v for _, v in tops][::-1]
        ax2.barh(np.arange(len(vals)), vals, color="tab:purple")
        ax2.set_yticks(np.arange(len(vals)), names, fontsize=8)
    ax2.set_xlabel("participation factor")
    ax2.set_title(f"least-damped mode: Re = {data['re'][i]:.3g} 1/s, "
                  f"{data['freq_hz'][i]:.1f} Hz", fontsize=9)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Date": None}
                if str(out_path).endswith(".svg") else None)
    plt.close(fig)
    return out_path


def main(argv=None):
    ap = argparse.ArgumentParser(description="Render eigenvalue/participation charts")
    ap.add_argument("--in", dest="input", required=True,
                    help="modes output directory")
    ap.add_argument("--out", required=True, help="output image file")
    ap.add_argument("--title")
    args = ap.parse_args(argv)
    render_modes(args.input, args.out, title=args.title)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
