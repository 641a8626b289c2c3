"""Render sweep-result figures from the aggregate CSV.

The renderer is a pure function of (CSV, spec): fixed style, no
timestamps, vector output, so identical inputs give identical bytes.
Every plotted number comes straight from a CSV cell.
"""

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

KINDS = {
    "pa_throughput": {
        "x": "HAP transmit power (dBm)",
        "y": "Sum throughput (bits/Hz)",
        "column": "objective",
    },
    "pa_energy": {
        "x": "HAP transmit power (dBm)",
        "y": "Total energy consumption (J)",
        "column": "energy",
    },
    "coverage": {
        "x": "Device cluster distance (m)",
        "y": "Sum throughput (bits/Hz)",
        "column": "objective",
    },
    "placement": {
        "x": "IRS position (m)",
        "y": "Sum throughput (bits/Hz)",
        "column": "objective",
    },
}

# Okabe-Ito palette keyed by scheme; colorblind-safe and stable
_SCHEME_STYLE = {
    "ue_active": ("#0072B2", "o"),
    "ul_active": ("#E69F00", "s"),
    "static_active": ("#009E73", "^"),
    "ue_passive": ("#D55E00", "v"),
    "static_passive": ("#CC79A7", "D"),
}
_FALLBACK_STYLE = ("#56B4E9", "x")


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    output_path: str
    schemes: tuple = ()        # empty = all present
    a_max_db: tuple = ()       # empty = all present

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; "
                            f"choose from {', '.join(sorted(KINDS))}")


@dataclass(frozen=True)
class SeriesInfo:
    scheme: str
    a_max_db: float
    num_points: int


@dataclass(frozen=True)
class FigureResult:
    path: str
    series: tuple


_REQUIRED = ("sweep_value", "scheme", "a_max_db", "objective_mean",
             "objective_stderr", "energy_mean", "energy_stderr")


def read_aggregate(path: str) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [column for column in _REQUIRED if column not in header]
        if missing:
            raise PlotError(f"missing column(s) {', '.join(missing)} in {path}")
        return list(reader)


def render(spec: FigureSpec) -> FigureResult:
    rows = read_aggregate(spec.csv_path)
    column = KINDS[spec.kind]["column"]

    series: dict = {}
    for row in rows:
        key = (row["scheme"], float(row["a_max_db"]))
        if spec.schemes and row["scheme"] not in spec.schemes:
            continue
        if spec.a_max_db and float(row["a_max_db"]) not in spec.a_max_db:
            continue
        series.setdefault(key, []).append(
            (float(row["sweep_value"]),
             float(row[f"{column}_mean"]),
             float(row[f"{column}_stderr"])))
    if not series:
        raise PlotError("empty selection: no rows match the requested "
                        "schemes/a_max filters")

    plt.rcParams["svg.hashsalt"] = "wpcnplots"
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    info = []
    for key in sorted(series):
        scheme, cap = key
        points = sorted(series[key])
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        errs = [p[2] for p in points]
        color, marker = _SCHEME_STYLE.get(scheme, _FALLBACK_STYLE)
        label = scheme if cap == 0 else f"{scheme} ({cap:g} dB)"
        ax.errorbar(xs, ys, yerr=errs, color=color, marker=marker,
                    capsize=2.5, linewidth=1.4, markersize=5, label=label)
        info.append(SeriesInfo(scheme, cap, len(points)))
    ax.set_xlabel(KINDS[spec.kind]["x"])
    ax.set_ylabel(KINDS[spec.kind]["y"])
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.output_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return FigureResult(path=spec.output_path, series=tuple(info))
