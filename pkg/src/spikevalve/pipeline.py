"""End-to-end run: SMP trace in, valve commands and rate traces out.

The accelerated presentation protocol: each sensor sample (nominally one
15-minute interval) occupies one cycle of simulated time.  The rescaled
current drives the encoder for the first 200 ms of its cycle; the
remaining 800 ms is a hold phase in which only the attractor keeps the
state.  Decisions are decoded from the final 200 ms of every cycle.
A real-time mode scales every interval by a configurable factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import SmpSeries
from .encoder import (
    BAND_NAMES,
    RELAY_NAMES,
    CalibrationResult,
    CropProfile,
    EncoderSpec,
    build_encoder,
    calibrate_encoder,
    rescale_smp,
    trim_encoder_gains,
)
from .engine import ConstantCurrent, run_simulation
from .fabric import EventLog, FabricLimits, MismatchModel, NetworkSpec, apply_mismatch
from .statemachine import (
    Command,
    ReadoutSpec,
    WtaSpec,
    build_readout,
    build_wta,
    connect_encoder_to_wta,
    decide,
)

__all__ = ["PipelineConfig", "PipelineResult", "build_pipeline_network", "run_pipeline"]

CYCLE_MS = 1000.0
PRESENT_MS = 200.0
DECIDE_MS = 200.0


@dataclass(frozen=True)
class PipelineConfig:
    encoder: EncoderSpec = EncoderSpec()
    wta: WtaSpec = WtaSpec()
    readout: ReadoutSpec = ReadoutSpec()
    dt: float = 0.1  # ms
    seed: int = 0
    cv: float = 0.1
    time_scale: float = 1.0  # >1 stretches every interval (toward real time)


@dataclass(frozen=True)
class PipelineResult:
    commands: list[Command]
    log: EventLog
    net: NetworkSpec
    currents: np.ndarray
    cycle_us: int
    rates: dict[str, list[float]]  # per-cycle decision-window rates

    def commands_csv(self, path, series: SmpSeries) -> None:
        """Commands mapped back to sensor-clock ISO timestamps."""
        with open(path, "w") as f:
            f.write("t_iso8601,action\n")
            for c in self.commands:
                cycle = c.t // self.cycle_us - 1  # window end of cycle k is (k+1)*cycle
                cycle = min(max(cycle, 0), len(series) - 1)
                f.write(f"{series.timestamps[cycle].isoformat()},{c.action}\n")

    def rates_csv(self, path) -> None:
        names = sorted(self.rates)
        with open(path, "w") as f:
            f.write("cycle," + ",".join(names) + "\n")
            for k in range(len(self.currents)):
                f.write(str(k) + "," + ",".join(f"{self.rates[n][k]:.3f}" for n in names) + "\n")


def build_pipeline_network(
    profile: CropProfile,
    cfg: PipelineConfig,
    calib: CalibrationResult | None = None,
) -> NetworkSpec:
    """Encoder + WTA + readout wired into one fabric-valid spec."""
    if calib is None:
        calib = calibrate_encoder(profile, cfg.encoder)
    net = build_encoder(cfg.encoder, calib)
    build_wta(cfg.wta, net)
    # The thresholded relays, not the raw band groups, ignite the states:
    # a state only flips once its band is active at the population level.
    connect_encoder_to_wta(net, RELAY_NAMES, cfg.wta)
    build_readout(cfg.readout, net)
    return net


def run_pipeline(
    series: SmpSeries,
    profile: CropProfile,
    cfg: PipelineConfig = PipelineConfig(),
    calib: CalibrationResult | None = None,
    limits: FabricLimits = FabricLimits(),
) -> PipelineResult:
    """Simulate the full spiking pipeline over a sensor series."""
    if calib is None:
        calib = calibrate_encoder(profile, cfg.encoder)
    net = build_pipeline_network(profile, cfg, calib)
    sim = apply_mismatch(net, MismatchModel(cv=cfg.cv, seed=cfg.seed))
    if cfg.cv > 0:
        # per-chip trim: pin each band group's activation point against
        # the mismatched parameters (the analog of trimming the bias
        # generators on the deployed device)
        trim_encoder_gains(sim, calib, cfg.encoder)

    currents, _ = rescale_smp(series.values_kpa, profile, cfg.encoder.c_max)
    cycle = CYCLE_MS * cfg.time_scale
    present = PRESENT_MS * cfg.time_scale
    decide_win = DECIDE_MS * cfg.time_scale
    cycle_us = int(round(cycle * 1000.0))

    stimuli = []
    for k, c in enumerate(currents):
        if c <= 0:
            continue
        for pop in BAND_NAMES:
            stimuli.append(ConstantCurrent(pop, float(c), k * cycle, k * cycle + present))

    duration = max(len(currents) * cycle, cycle)
    watch = set(BAND_NAMES) | set(RELAY_NAMES) | {"e0", "e1", "e2", "inh", "open", "close"}
    log = run_simulation(sim, stimuli, duration, dt=cfg.dt, seed=cfg.seed, limits=limits, record=watch)

    open_ids = net.populations["open"].ids
    close_ids = net.populations["close"].ids
    rates: dict[str, list[float]] = {n: [] for n in watch}
    commands: list[Command] = []
    prev = "CLOSE"  # matches the oracle's fail-safe initial state
    for k in range(len(currents)):
        t1 = (k + 1) * cycle_us
        t0 = t1 - int(round(decide_win * 1000.0))
        for n in watch:
            rates[n].append(log.rate_hz(net.populations[n].ids, t0, t1))
        cmd = decide(log, open_ids, close_ids, t0, t1, prev)
        if cmd is not None:
            commands.append(cmd)
            prev = cmd.action

    return PipelineResult(
        commands=commands,
        log=log,
        net=net,
        currents=currents,
        cycle_us=cycle_us,
        rates=rates,
    )
