"""Static figures from body-schema experiment result CSVs.

Consumes the documented result schema -- columns
(method, d, p_coordination, seed, sample_index, value) -- and renders one of
four figure kinds:

  node_hist     histogram of sampled node counts per sweep value, one figure
                per method, with the mean as a horizontal line
                (input: node_counts.csv)
  ari_box       box plots of per-sample ARI per sweep value, one figure per
                method (input: ari.csv)
  ari_lines     mean ARI versus the sweep variable, one line per method
                (input: ari.csv)
  success_bars  tree-recovery success rate versus the sweep variable, grouped
                by method; groups without eligible samples are omitted
                (input: tree_success.csv)

The sweep variable is whichever of d / p_coordination varies in the file.
Plots never transform data beyond counting and quantiles; render() returns
every plotted number keyed by output file so tests can recompute them from
the CSV alone.

Usage:  python plot_results.py --csv results/ari.csv --kind ari_box --out ari.png
"""

from __future__ import annotations

import argparse
import csv
import os
from collections import defaultdict
from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("node_hist", "ari_box", "ari_lines", "success_bars")
REQUIRED_COLUMNS = ["method", "d", "p_coordination", "seed", "sample_index",
                    "value"]


@dataclass(frozen=True)
class FigureSpec:
    csv: str
    kind: str
    out: str
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"choose one of {', '.join(KINDS)}")


def read_rows(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}; "
                             f"expected {', '.join(REQUIRED_COLUMNS)}")
        return list(reader)


def sweep_variable(rows: list[dict]) -> str:
    return "d" if len({r["d"] for r in rows}) > 1 else "p_coordination"


def _grouped(rows, sweep):
    """method -> sweep value -> list of float values (sweep values sorted)."""
    out: dict[str, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        out[r["method"]][float(r[sweep])].append(float(r["value"]))
    return {m: dict(sorted(groups.items())) for m, groups in sorted(out.items())}


def _method_path(out: str, method: str, multi: bool) -> str:
    if not multi:
        return out
    stem, ext = os.path.splitext(out)
    return f"{stem}_{method}{ext or '.png'}"


def render(spec: FigureSpec) -> dict[str, dict]:
    """Write the figure(s) and return {output_path: plotted numbers}."""
    rows = read_rows(spec.csv)
    sweep = sweep_variable(rows)
    data = _grouped(rows, sweep)
    if not data:
        raise ValueError(f"{spec.csv}: no data rows")
    rendered: dict[str, dict] = {}

    if spec.kind == "node_hist":
        multi = len(data) > 1
        for method, groups in data.items():
            path = _method_path(spec.out, method, multi)
            fig, axes = plt.subplots(1, len(groups),
                                     figsize=(3.2 * len(groups), 3.2),
                                     squeeze=False)
            numbers = {}
            for ax, (sval, vals) in zip(axes[0], groups.items()):
                ints = np.asarray(vals, dtype=int)
                uniq, cnt = np.unique(ints, return_counts=True)
                mean = float(ints.mean())
                ax.bar(uniq, cnt, color="tab:blue")
                ax.axhline(mean, color="tab:red", lw=1)
                ax.set_title(f"{sweep} = {sval:g}", fontsize=9)
                ax.set_xlabel(spec.xlabel or "node count")
                numbers[sval] = {"counts": dict(zip(uniq.tolist(), cnt.tolist())),
                                 "mean": mean}
            axes[0][0].set_ylabel(spec.ylabel or "samples")
            fig.suptitle(method)
            fig.tight_layout()
            fig.savefig(path, dpi=120)
            plt.close(fig)
            rendered[path] = {"method": method, "groups": numbers}

    elif spec.kind == "ari_box":
        multi = len(data) > 1
        for method, groups in data.items():
            path = _method_path(spec.out, method, multi)
            stats = []
            numbers = {}
            for sval, vals in groups.items():
                v = np.asarray(vals, dtype=float)
                entry = {
                    "med": float(np.quantile(v, 0.5)),
                    "q1": float(np.quantile(v, 0.25)),
                    "q3": float(np.quantile(v, 0.75)),
                    "whislo": float(v.min()),
                    "whishi": float(v.max()),
                    "label": f"{sval:g}",
                }
                stats.append(entry)
                numbers[sval] = {k: entry[k] for k in
                                 ("med", "q1", "q3", "whislo", "whishi")}
            fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(stats), 3.6))
            ax.bxp(stats, showfliers=False)
            ax.set_xlabel(spec.xlabel or sweep)
            ax.set_ylabel(spec.ylabel or "ARI")
            ax.set_title(method)
            fig.tight_layout()
            fig.savefig(path, dpi=120)
            plt.close(fig)
            rendered[path] = {"method": method, "groups": numbers}

    elif spec.kind == "ari_lines":
        fig, ax = plt.subplots(figsize=(6, 4))
        numbers = {}
        for method, groups in data.items():
            svals = list(groups)
            means = [float(np.mean(groups[s])) for s in svals]
            ax.plot(svals, means, "o-", label=method)
            numbers[method] = dict(zip(svals, means))
        ax.set_xlabel(spec.xlabel or sweep)
        ax.set_ylabel(spec.ylabel or "mean ARI")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(spec.out, dpi=120)
        plt.close(fig)
        rendered[spec.out] = numbers

    elif spec.kind == "success_bars":
        fig, ax = plt.subplots(figsize=(6.5, 4))
        methods = list(data)
        all_svals = sorted({s for groups in data.values() for s in groups})
        width = 0.8 / len(methods)
        numbers = {}
        for i, method in enumerate(methods):
            groups = data[method]
            rates = {s: float(np.mean(groups[s])) for s in groups}
            xs = [all_svals.index(s) + i * width for s in rates]
            ax.bar(xs, list(rates.values()), width=width, label=method)
            numbers[method] = rates
        ax.set_xticks([k + 0.4 - width / 2 for k in range(len(all_svals))])
        ax.set_xticklabels([f"{s:g}" for s in all_svals])
        ax.set_xlabel(spec.xlabel or sweep)
        ax.set_ylabel(spec.ylabel or "tree success rate")
        ax.set_ylim(0, 1.05)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(spec.out, dpi=120)
        plt.close(fig)
        rendered[spec.out] = numbers

    return rendered


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True, help="result CSV to plot")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    args = parser.parse_args(argv)
    rendered = render(FigureSpec(csv=args.csv, kind=args.kind, out=args.out,
                                 xlabel=args.xlabel, ylabel=args.ylabel))
    for path in rendered:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
