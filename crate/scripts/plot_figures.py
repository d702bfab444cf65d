#!/usr/bin/env python3
"""Render the `ramp reproduce` outputs with matplotlib.

Usage: plot_figures.py {fig1,fig2,fig3,fig4} <out_dir>

Untested convenience script; the CSVs are the authoritative artifacts.
"""
import csv
import glob
import os
import sys


def read_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rows.append(line.strip().split(","))
    header, data = rows[0], rows[1:]
    return header, data


def fnum(x):
    try:
        return float(x)
    except ValueError:
        return float("nan")


def plot_fig1(outdir, plt):
    for path in sorted(glob.glob(os.path.join(outdir, "potential_rho*.csv"))):
        _, data = read_csv(path)
        es = [fnum(r[0]) for r in data]
        phis = [fnum(r[1]) for r in data]
        label = os.path.basename(path).replace("potential_", "").replace(".csv", "")
        plt.semilogx(es, phis, label=label)
    plt.xlabel("E")
    plt.ylabel("potential")
    plt.legend()


def plot_fig2(outdir, plt):
    for path in sorted(glob.glob(os.path.join(outdir, "line_rho*.csv"))):
        _, data = read_csv(path)
        etas = [fnum(r[0]) for r in data]
        bayes = [fnum(r[1]) for r in data]
        trapped = [fnum(r[2]) for r in data]
        label = os.path.basename(path).replace("line_", "").replace(".csv", "")
        (ln,) = plt.loglog(etas, bayes, label=label)
        plt.loglog(etas, trapped, "--", color=ln.get_color(), alpha=0.6)
    pts = os.path.join(outdir, "amp_points.csv")
    if os.path.exists(pts):
        _, data = read_csv(pts)
        plt.loglog(
            [fnum(r[1]) for r in data],
            [fnum(r[4]) for r in data],
            "ko",
            label="solver",
        )
    plt.xlabel("eta")
    plt.ylabel("MSE")
    plt.legend()


def plot_fig3(outdir, plt):
    styles = {"noiseless": "b", "noisy": "r"}
    for name, color in styles.items():
        path = os.path.join(outdir, f"lines_{name}.csv")
        if not os.path.exists(path):
            continue
        _, data = read_csv(path)
        for kind, dash in [("spinodal", "--"), ("first_order", "-")]:
            pts = [(fnum(r[0]), fnum(r[1])) for r in data if r[2] == kind]
            if pts:
                xs = [a for a, _ in pts]
                ys = [rc / a for a, rc in pts]  # vertical axis is K/M
                plt.plot(xs, ys, dash, color=color, label=f"{name} {kind}")
    plt.xlabel("M/N")
    plt.ylabel("K/M")
    plt.legend()


def plot_fig4(outdir, plt):
    for i in range(8):
        de = os.path.join(outdir, f"de_case{i}.csv")
        amp = os.path.join(outdir, f"amp_case{i}.csv")
        if not os.path.exists(de):
            break
        _, ddata = read_csv(de)
        (ln,) = plt.semilogy(
            [int(r[0]) for r in ddata], [fnum(r[1]) for r in ddata], label=f"case {i} theory"
        )
        if os.path.exists(amp):
            _, adata = read_csv(amp)
            plt.semilogy(
                [int(r[0]) for r in adata],
                [fnum(r[1]) for r in adata],
                "o",
                color=ln.get_color(),
                label=f"case {i} solver",
            )
    plt.xlabel("iteration")
    plt.ylabel("MSE")
    plt.legend()


def main():
    if len(sys.argv) != 3 or sys.argv[1] not in {"fig1", "fig2", "fig3", "fig4"}:
        sys.exit(__doc__)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, outdir = sys.argv[1], sys.argv[2]
    {"fig1": plot_fig1, "fig2": plot_fig2, "fig3": plot_fig3, "fig4": plot_fig4}[fig](outdir, plt)
    target = os.path.join(outdir, f"{fig}.png")
    plt.tight_layout()
    plt.savefig(target, dpi=150)
    print(target)


if __name__ == "__main__":
    main()
