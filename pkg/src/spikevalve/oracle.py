"""Conventional hysteresis controller and decision-latency comparison.

The oracle is the two-threshold rule the network is meant to replicate:
starting CLOSED, emit OPEN at the first sample strictly below th_on,
then CLOSE at the first sample strictly above th_off, alternating.
Latency statistics pair each oracle command with the nearest same-action
network command inside a matching horizon, in sensor-interval units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import CropProfile
from .statemachine import Command

__all__ = ["OracleCommand", "EvalReport", "hysteresis_oracle", "compare_commands"]


@dataclass(frozen=True)
class OracleCommand:
    index: int  # sample index of the triggering crossing
    action: str  # "OPEN" | "CLOSE"


@dataclass(frozen=True)
class EvalReport:
    latencies: tuple[float, ...]  # sensor-interval units, per matched pair
    matched: int
    missed: int
    spurious: int
    oracle_count: int

    def __post_init__(self):
        if self.matched + self.missed != self.oracle_count:
            raise ValueError("matched + missed must equal the oracle command count")
        if len(self.latencies) != self.matched:
            raise ValueError("one latency per matched pair")

    @property
    def median(self) -> float:
        return float(np.median(self.latencies)) if self.latencies else float("nan")

    @property
    def iqr(self) -> tuple[float, float]:
        if not self.latencies:
            return (float("nan"), float("nan"))
        q1, q3 = np.percentile(self.latencies, [25, 75])
        return (float(q1), float(q3))

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("latency_intervals\n")
            for v in self.latencies:
                f.write(f"{v:.6g}\n")

    def summary(self) -> str:
        q1, q3 = self.iqr
        return "\n".join(
            [
                f"oracle commands: {self.oracle_count}",
                f"matched: {self.matched}, missed: {self.missed}, spurious: {self.spurious}",
                f"latency median: {self.median:.3g} intervals (IQR {q1:.3g}..{q3:.3g})",
            ]
        )


def hysteresis_oracle(values_kpa, profile: CropProfile) -> list[OracleCommand]:
    """Ground-truth command sequence from the two-threshold rule.

    Strict inequalities ("drops below" / "rises above"); initial state
    CLOSED (fail-safe default).
    """
    out: list[OracleCommand] = []
    open_ = False
    for i, v in enumerate(values_kpa):
        if not open_ and v < profile.th_on:
            out.append(OracleCommand(i, "OPEN"))
            open_ = True
        elif open_ and v > profile.th_off:
            out.append(OracleCommand(i, "CLOSE"))
            open_ = False
    return out


def compare_commands(
    oracle: list[OracleCommand],
    network: list[Command],
    interval_us: int,
    horizon: float = 4.0,
) -> EvalReport:
    """Pair oracle and network commands; latency in sensor intervals.

    Network command times are converted to fractional sample indices via
    `interval_us` (the per-sample duration on the simulation clock).
    Greedy nearest matching of same-action commands within `horizon`
    intervals; leftovers count as missed (oracle side) or spurious
    (network side).
    """
    if interval_us <= 0:
        raise ValueError("interval_us must be > 0")
    net_idx = [(c.t / interval_us, c.action) for c in network]
    unused = list(range(len(net_idx)))
    latencies: list[float] = []
    missed = 0

    for oc in oracle:
        best_j = None
        best_d = None
        for j in unused:
            idx, action = net_idx[j]
            if action != oc.action:
                continue
            d = idx - (oc.index + 1)  # command can only land at a window end
            if abs(d) <= horizon and (best_d is None or abs(d) < abs(best_d)):
                best_j, best_d = j, d
        if best_j is None:
            missed += 1
        else:
            unused.remove(best_j)
            latencies.append(best_d)

    return EvalReport(
        latencies=tuple(latencies),
        matched=len(latencies),
        missed=missed,
        spurious=len(unused),
        oracle_count=len(oracle),
    )
