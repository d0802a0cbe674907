"""Time-series panels from simulate output."""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt

from .io import read_timeseries


def render_timeseries(directory, out_path, title=None):
    data = read_timeseries(directory)
    names = list(data["signals"])
    fig, axes = plt.subplots(len(names), 1, figsize=(6.5, 1.9 * len(names)),
                             sharex=True, squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        ax.plot(data["t"], data["signals"][name], linewidth=0.9,
                color="tab:blue")
        ax.set_ylabel(name, fontsize=8)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("t (s)")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Date": None}
                if str(out_path).endswith(".svg") else None)
    plt.close(fig)
    return out_path


def main(argv=None):
    ap = argparse.ArgumentParser(description="Render simulation time series")
    ap.add_argument("--in", dest="input", required=True,
                    help="simulate output directory")
    ap.add_argument("--out", required=True, help="output image file")
    ap.add_argument("--title")
    args = ap.parse_args(argv)
    render_timeseries(args.input, args.out, title=args.title)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
