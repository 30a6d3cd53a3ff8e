"""Matplotlib figures rendered next to the delimited outputs.

Every function takes data plus an output path and writes one PNG; the
CLI report paths call these alongside the CSV writers.  The Agg backend
is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "raster_figure",
    "rates_figure",
    "fi_figure",
    "latency_figure",
    "energy_figure",
    "trace_figure",
]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def raster_figure(log, spec, path, title: str = "spike raster") -> None:
    """Events as dots, one colour band per population."""
    fig, ax = plt.subplots(figsize=(10, 5))
    pops = sorted(spec.populations.values(), key=lambda p: p.ids[0])
    cmap = plt.get_cmap("tab10")
    t = log.times.astype(float) * 1e-6
    for k, pop in enumerate(pops):
        m = np.isin(log.neurons, np.asarray(pop.ids, dtype=np.uint32))
        if not m.any():
            continue
        ax.plot(t[m], log.neurons[m], ".", ms=2, color=cmap(k % 10), label=pop.name)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("neuron id")
    ax.set_title(title)
    if pops:
        ax.legend(loc="upper right", fontsize=7, markerscale=4)
    _save(fig, path)


def rates_figure(rates: dict[str, list[float]], path, interval_label: str = "cycle") -> None:
    """Per-cycle population rates from a pipeline run."""
    fig, ax = plt.subplots(figsize=(10, 4))
    for name in sorted(rates):
        ax.plot(rates[name], drawstyle="steps-post", label=name, lw=1.2)
    ax.set_xlabel(interval_label)
    ax.set_ylabel("rate [Hz]")
    ax.set_title("decision-window population rates")
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def fi_figure(curves: dict[str, list[tuple[float, float]]], path) -> None:
    """FI curves: input current vs firing rate, one line per label."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(curves):
        pts = curves[label]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=label)
    ax.set_xlabel("input current [a.c.u.]")
    ax.set_ylabel("rate [Hz]")
    ax.set_title("FI curves")
    ax.legend(fontsize=8)
    _save(fig, path)


def latency_figure(report, path) -> None:
    """Decision latency distribution against the hysteresis controller."""
    fig, ax = plt.subplots(figsize=(5, 4))
    if report.latencies:
        ax.boxplot([list(report.latencies)], tick_labels=["matched commands"])
        ax.axhline(0.0, color="grey", lw=0.8, ls="--")
    ax.set_ylabel("latency [sensor intervals]")
    ax.set_title(
        f"decision latency (matched {report.matched}/{report.oracle_count}, "
        f"spurious {report.spurious})"
    )
    _save(fig, path)


def energy_figure(report, path) -> None:
    """Per-population energy split of one estimate."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = sorted(report.per_population_pj)
    vals = [report.per_population_pj[n] * 1e-3 for n in names]  # nJ
    ax.bar(names, vals)
    ax.set_ylabel("energy [nJ]")
    ax.set_title(f"energy split, total {report.total_uwh:.4g} uWh")
    ax.tick_params(axis="x", rotation=45)
    _save(fig, path)


def trace_figure(series, profile, commands_idx: list[tuple[int, str]], path) -> None:
    """SMP trace with crop thresholds and network command markers.

    commands_idx: (sample index, action) pairs on the sensor clock.
    """
    fig, ax = plt.subplots(figsize=(10, 4))
    v = np.asarray(series.values_kpa, dtype=float)
    ax.plot(v, lw=1.0, color="tab:blue", label="SMP")
    ax.axhline(profile.th_on, color="tab:red", ls="--", lw=0.8, label="open threshold")
    ax.axhline(profile.th_off, color="tab:green", ls="--", lw=0.8, label="close threshold")
    for idx, action in commands_idx:
        idx = min(max(idx, 0), len(v) - 1)
        color = "tab:red" if action == "OPEN" else "tab:green"
        marker = "v" if action == "OPEN" else "^"
        ax.plot([idx], [v[idx]], marker, color=color, ms=8)
    ax.set_xlabel("sample")
    ax.set_ylabel("SMP [kPa]")
    ax.set_title(f"{profile.name}: trace and network commands")
    ax.legend(fontsize=8)
    _save(fig, path)
