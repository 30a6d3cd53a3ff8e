"""Per-event energy accounting for the multi-core fabric.

Every spike costs: generation + encoding/destination tagging, plus a
broadcast + routing cost per destination core touched, plus a pulse-
extension cost per postsynaptic match.  Core counts and match counts
are derived from the network's connectivity, not supplied.

Accumulation is in integer picojoules so reports are exact and additive
over log concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fabric import EventLog, NetworkSpec

__all__ = [
    "EnergyConstants",
    "EnergyReport",
    "estimate_energy",
    "duty_cycle_budget",
    "spike_cost_pj",
    "uwh_from_pj",
    "PJ_PER_UWH",
]

# 1 uWh = 3.6 mJ = 3.6e9 pJ
PJ_PER_UWH = 3.6e9


@dataclass(frozen=True)
class EnergyConstants:
    """Per-event energies in pJ (circuit-simulation figures at 1.8 V)."""

    e_spike: int = 883  # spike generation
    e_enc: int = 883  # encoding + destination tagging
    e_br: int = 6840  # intra-core broadcast
    e_rt: int = 360  # inter-core routing
    e_pulse: int = 324  # pulse extension per postsynaptic match

    def __post_init__(self):
        for f in ("e_spike", "e_enc", "e_br", "e_rt", "e_pulse"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be >= 0")


@dataclass(frozen=True)
class EnergyReport:
    total_pj: int
    per_population_pj: dict[str, int]
    spike_count: int
    deliveries_count: int
    window_us: int

    @property
    def total_j(self) -> float:
        return self.total_pj * 1e-12

    @property
    def total_uwh(self) -> float:
        return uwh_from_pj(self.total_pj)

    def __post_init__(self):
        if self.total_pj != sum(self.per_population_pj.values()):
            raise ValueError("population breakdown does not sum to the total")

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("population,energy_pj,energy_uwh\n")
            for name, pj in sorted(self.per_population_pj.items()):
                f.write(f"{name},{pj},{uwh_from_pj(pj):.9g}\n")
            f.write(f"TOTAL,{self.total_pj},{self.total_uwh:.9g}\n")

    def summary(self) -> str:
        lines = [
            f"window: {self.window_us / 1e6:.3f} s",
            f"spikes: {self.spike_count}, deliveries: {self.deliveries_count}",
            f"total: {self.total_pj} pJ = {self.total_uwh:.6g} uWh",
        ]
        for name, pj in sorted(self.per_population_pj.items()):
            lines.append(f"  {name}: {pj} pJ")
        return "\n".join(lines)


def uwh_from_pj(pj: float) -> float:
    return pj / PJ_PER_UWH


def spike_cost_pj(
    out_degree: int, cores_touched: int, consts: EnergyConstants
) -> int:
    """Integer-pJ cost of one spike given its routing footprint."""
    return (
        consts.e_spike
        + consts.e_enc
        + cores_touched * (consts.e_br + consts.e_rt)
        + out_degree * consts.e_pulse
    )


def _per_neuron_costs(
    spec: NetworkSpec, consts: EnergyConstants
) -> tuple[np.ndarray, np.ndarray]:
    """(cost_pj, out_degree) arrays indexed by neuron id."""
    cores = spec.neuron_core()
    n = max(cores) + 1 if cores else 0
    out_deg = np.zeros(n, dtype=np.int64)
    dest_cores: list[set[int]] = [set() for _ in range(n)]
    for s in spec.synapses:
        if s.is_external:
            continue
        out_deg[s.pre] += 1
        dest_cores[s.pre].add(cores[s.post])
    cost = np.array(
        [
            spike_cost_pj(int(out_deg[i]), len(dest_cores[i]), consts)
            for i in range(n)
        ],
        dtype=np.int64,
    )
    return cost, out_deg


def estimate_energy(
    log: EventLog,
    spec: NetworkSpec,
    consts: EnergyConstants = EnergyConstants(),
    window_us: int | None = None,
) -> EnergyReport:
    """Total and per-population energy of a spike log, exact in integer pJ."""
    cores = spec.neuron_core()
    n = max(cores) + 1 if cores else 0
    if len(log) and int(log.neurons.max()) >= n:
        raise KeyError(f"log contains neuron id {int(log.neurons.max())} unknown to the spec")
    cost, out_deg = _per_neuron_costs(spec, consts)

    counts = np.bincount(log.neurons.astype(np.intp), minlength=n) if n else np.zeros(0, np.int64)
    total = int(np.dot(counts, cost))
    deliveries = int(np.dot(counts, out_deg))

    per_pop: dict[str, int] = {}
    for name, pop in spec.populations.items():
        ids = np.array(pop.ids, dtype=np.intp)
        per_pop[name] = int(np.dot(counts[ids], cost[ids]))

    if window_us is None:
        window_us = int(log.times.max()) if len(log) else 0
    return EnergyReport(
        total_pj=total,
        per_population_pj=per_pop,
        spike_count=int(counts.sum()),
        deliveries_count=deliveries,
        window_us=window_us,
    )


@dataclass(frozen=True)
class DutyCycleBudget:
    """Active-window vs resting-window energy per duty cycle."""

    active: EnergyReport
    resting: EnergyReport
    cycle_us: int

    @property
    def total_pj(self) -> int:
        return self.active.total_pj + self.resting.total_pj

    @property
    def total_uwh(self) -> float:
        return uwh_from_pj(self.total_pj)

    def summary(self) -> str:
        return "\n".join(
            [
                f"cycle: {self.cycle_us / 6e7:.1f} min",
                f"active energy:  {self.active.total_uwh:.6g} uWh ({self.active.window_us / 1000:.0f} ms window)",
                f"resting energy: {self.resting.total_uwh:.6g} uWh",
                f"total energy:   {self.total_uwh:.6g} uWh per cycle",
            ]
        )


def duty_cycle_budget(
    spec: NetworkSpec,
    active_rates_hz: dict[str, float],
    resting_rates_hz: dict[str, float],
    active_ms: float = 200.0,
    cycle_min: float = 15.0,
    consts: EnergyConstants = EnergyConstants(),
) -> DutyCycleBudget:
    """Energy split of one duty cycle from per-population mean rates.

    `active_rates_hz` are the *extra* per-neuron rates during the active
    window; `resting_rates_hz` run for the whole cycle.  Spike counts
    are rounded to whole events per cycle.
    """
    cycle_us = int(round(cycle_min * 6e7))
    active_us = int(round(active_ms * 1000.0))
    if active_us > cycle_us:
        raise ValueError("active window longer than the cycle")
    cost, out_deg = _per_neuron_costs(spec, consts)

    def report(rates: dict[str, float], dur_us: int) -> EnergyReport:
        per_pop: dict[str, int] = {}
        spikes = 0
        deliveries = 0
        total = 0
        for name, pop in spec.populations.items():
            r = rates.get(name, 0.0)
            ids = np.array(pop.ids, dtype=np.intp)
            per_neuron = int(round(r * dur_us * 1e-6))
            pj = int(np.sum(cost[ids])) * per_neuron
            per_pop[name] = pj
            total += pj
            spikes += per_neuron * len(ids)
            deliveries += int(np.sum(out_deg[ids])) * per_neuron
        return EnergyReport(total, per_pop, spikes, deliveries, dur_us)

    return DutyCycleBudget(
        active=report(active_rates_hz, active_us),
        resting=report(resting_rates_hz, cycle_us),
        cycle_us=cycle_us,
    )
