"""Analog-to-spike front end: level-selective populations.

Soil-matric-potential samples are mapped by an affine, order-reversing
rescale into input currents (drier soil = larger current), fixed so the
crop's irrigation thresholds land exactly on the band boundaries:

    band 0 (wet):  current <  c_off        -> "low" population
    band 1 (mid):  c_off <= current < c_on -> "mid" population
    band 2 (dry):  current >= c_on         -> "high" population

A value exactly on a boundary belongs to the higher band ("drops
below" trigger semantics).  Each population's firing onset is placed at
its band's lower boundary by bisecting the neuron gain against the
measured FI curve; backward inhibition from each group to the groups
responsive to lower currents (through interneuron relays) keeps at most
one group active for any constant drive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fabric import NetworkSpec
from .neuron import NeuronParams, SynapseParams, WindowTooShortError, fi_curve

__all__ = [
    "CropProfile",
    "EncoderSpec",
    "CalibrationResult",
    "APPLE",
    "KIWI",
    "PROFILES",
    "rescale_smp",
    "rescale_value",
    "calibrate_encoder",
    "trim_encoder_gains",
    "build_encoder",
    "BAND_NAMES",
    "RELAY_NAMES",
]

BAND_NAMES = ("enc_low", "enc_mid", "enc_high")
RELAY_NAMES = tuple(n + "_relay" for n in BAND_NAMES)
ACTIVE_RATE_HZ = 10.0  # a population firing above this counts as active

# Untuned parameters for the relay core (matches the state-machine core,
# so an encoder fragment merges cleanly with the downstream network).
RELAY_PARAMS = NeuronParams(tau=20.0)


@dataclass(frozen=True)
class CropProfile:
    name: str
    th_on: float  # kPa, irrigation starts when SMP drops below this
    th_off: float  # kPa, irrigation stops when SMP rises above this
    smp_floor: float  # most negative value of the mapped range
    smp_ceil: float = 0.0  # least negative value of the mapped range

    def __post_init__(self):
        if not (self.smp_floor < self.th_on < self.th_off <= self.smp_ceil <= 0):
            raise ValueError(
                f"need smp_floor < th_on < th_off <= smp_ceil <= 0, got "
                f"{self.smp_floor} / {self.th_on} / {self.th_off} / {self.smp_ceil}"
            )


APPLE = CropProfile("apple", th_on=-60.0, th_off=-50.0, smp_floor=-100.0)
KIWI = CropProfile("kiwi", th_on=-12.0, th_off=-5.0, smp_floor=-40.0)
PROFILES = {"apple": APPLE, "kiwi": KIWI}


@dataclass(frozen=True)
class EncoderSpec:
    pop_size: int = 32
    relay_size: int = 8  # thresholded interneurons per group
    c_max: float = 1.0  # current at smp_floor
    cores: tuple[int, int, int] = (0, 1, 2)  # one core per group
    backward_inh_weight: float = 3.0
    relay_onset_margin: float = 1.5  # relay ignites at margin * active rate
    low_onset_frac: float = 0.4  # wet-group onset, fraction of its band width
    onset_bias: float = 0.0  # mid/high onsets placed this fraction below
    # their boundaries (an optional lead for sluggish downstream stages)
    relay_core: int = 3  # relays share the state-machine core's parameters
    tau_fast: float = 5.0  # ms
    tau_inh: float = 20.0  # ms; smooths backward-inhibition ripple
    tau_slow: float = 100.0  # ms

    def __post_init__(self):
        if self.pop_size <= 0 or self.relay_size <= 0:
            raise ValueError("population sizes must be > 0")
        if len(set(self.cores)) != 3:
            raise ValueError("the three groups need distinct cores")
        if self.c_max <= 0:
            raise ValueError("c_max must be > 0")


def rescale_value(smp_kpa: float, profile: CropProfile, c_max: float = 1.0) -> float:
    """Affine order-reversing map: smp_ceil -> 0, smp_floor -> c_max."""
    span = profile.smp_ceil - profile.smp_floor
    return (profile.smp_ceil - smp_kpa) / span * c_max


def band_boundaries(profile: CropProfile, c_max: float = 1.0) -> tuple[float, float]:
    """(c_off, c_on): images of th_off and th_on; c_on > c_off."""
    return (
        rescale_value(profile.th_off, profile, c_max),
        rescale_value(profile.th_on, profile, c_max),
    )


def rescale_smp(values_kpa, profile: CropProfile, c_max: float = 1.0):
    """Map SMP samples to input currents; clamps out-of-range values.

    Returns (currents, n_clamped).
    """
    if profile.th_on == profile.th_off:
        raise ValueError("degenerate profile: th_on == th_off")
    v = np.asarray(values_kpa, dtype=float)
    clamped = int(np.count_nonzero((v < profile.smp_floor) | (v > profile.smp_ceil)))
    v = np.clip(v, profile.smp_floor, profile.smp_ceil)
    span = profile.smp_ceil - profile.smp_floor
    return (profile.smp_ceil - v) / span * c_max, clamped


def band_of(current: float, profile: CropProfile, c_max: float = 1.0) -> int:
    """Band index of a rescaled current; boundary values go to the higher band."""
    c_off, c_on = band_boundaries(profile, c_max)
    if current >= c_on:
        return 2
    if current >= c_off:
        return 1
    return 0


@dataclass(frozen=True)
class CalibrationResult:
    band_lower: tuple[float, float, float]  # onset current per group
    params: tuple[NeuronParams, NeuronParams, NeuronParams]
    achieved: tuple[float, float, float]  # current where rate crosses ACTIVE_RATE_HZ

    def report(self) -> str:
        lines = ["band,onset_target,i_gain,achieved_crossing"]
        for name, lo, p, ach in zip(BAND_NAMES, self.band_lower, self.params, self.achieved):
            lines.append(f"{name},{lo:.6g},{p.i_gain:.6g},{ach:.6g}")
        return "\n".join(lines)


class CalibrationError(RuntimeError):
    pass


def _rate_at(params: NeuronParams, current: float, dt: float) -> float:
    """FI rate at a single current (0 Hz if sub-threshold)."""
    try:
        pts = fi_curve(params, (0.0, current), 2, window=2000.0, dt=dt)
    except WindowTooShortError:
        return 0.0
    return pts[-1][1]


def _crossing_current(
    params: NeuronParams, lo: float, hi: float, rate_hz: float, dt: float
) -> float:
    """Smallest grid current in [lo, hi] with FI rate >= rate_hz (hi if never)."""
    pts = fi_curve(params, (lo, hi), 81, window=2000.0, dt=dt)
    for i, r in pts:
        if r >= rate_hz:
            return i
    return hi


def calibrate_encoder(
    profile: CropProfile,
    spec: EncoderSpec = EncoderSpec(),
    base_params: NeuronParams = NeuronParams(tau=6.0, i_gain=1.0),
    tolerance: float = 0.02,
    dt: float = 0.1,
) -> CalibrationResult:
    """Place each group's activation onset at its band's lower boundary.

    Bisects i_gain per group until the FI curve crosses the active rate
    within `tolerance` (relative) of the boundary current.  The wet
    group's boundary is 0, so it is tuned to a small epsilon current and
    fires for any appreciable positive drive.
    """
    c_off, c_on = band_boundaries(profile, spec.c_max)
    eps = spec.low_onset_frac * c_off
    if not 0 < eps < c_off:
        raise CalibrationError("low_onset_frac must place the wet onset inside (0, c_off)")
    if not 0 <= spec.onset_bias < 0.5:
        raise CalibrationError("onset_bias must be in [0, 0.5)")
    targets = (eps, c_off * (1.0 - spec.onset_bias), c_on * (1.0 - spec.onset_bias))

    tuned: list[NeuronParams] = []
    achieved: list[float] = []
    for target in targets:
        inner = target * (1.0 - tolerance)
        outer = target * (1.0 + tolerance)
        lo_gain, hi_gain = 1e-3, 1e3
        best = None
        for _ in range(80):
            g = (lo_gain * hi_gain) ** 0.5
            p = replace(base_params, i_gain=g)
            if _rate_at(p, outer, dt) < ACTIVE_RATE_HZ:
                lo_gain = g  # crossing beyond the band: gain too weak
            elif _rate_at(p, inner, dt) >= ACTIVE_RATE_HZ:
                hi_gain = g  # crossing inside the lower band: gain too strong
            else:
                best = p
                break
        if best is None:
            raise CalibrationError(
                f"no gain in [1e-3, 1e3] puts the {ACTIVE_RATE_HZ} Hz crossing "
                f"within +-{tolerance * 100:.0f}% of {target:.4g}"
            )
        cross = _crossing_current(
            best, inner, outer, ACTIVE_RATE_HZ, dt
        )
        tuned.append(best)
        achieved.append(cross)

    return CalibrationResult(tuple(targets), tuple(tuned), tuple(achieved))


def trim_encoder_gains(
    sim: NetworkSpec,
    calib: CalibrationResult,
    spec: EncoderSpec = EncoderSpec(),
) -> dict[str, float]:
    """Per-chip trim of the band-core gains against the mismatched FI.

    The factory calibration places each group's onset on nominal
    parameters; device mismatch then scatters the *group-level*
    activation point by far more than the calibration tolerance (the
    scatter is dominated by the most excitable tail neurons).  On real
    hardware the bias generators are trimmed against the measured chip,
    so here each band core's gain is rescaled until the mismatched
    group's mean closed-form rate at the calibration target equals the
    active rate.  Deterministic, closed-form, no simulation involved.

    Mutates `sim` (its effective per-neuron parameters and the band
    core parameters); returns the per-band scale factors.
    """
    if sim.effective_params is None:
        raise ValueError("trim requires a network with effective parameters")
    scales: dict[str, float] = {}
    for name, core, target in zip(BAND_NAMES, spec.cores, calib.band_lower):
        ids = sim.populations[name].ids
        group = [sim.effective_params[i] for i in ids]

        def group_rate(s: float) -> float:
            return sum(replace(p, i_gain=p.i_gain * s).rate_hz(target) for p in group) / len(group)

        lo, hi = 0.125, 8.0
        if not group_rate(lo) < ACTIVE_RATE_HZ < group_rate(hi):
            raise CalibrationError(
                f"no gain trim in [{lo}, {hi}] brings {name} to "
                f"{ACTIVE_RATE_HZ} Hz at {target:.4g}"
            )
        for _ in range(50):
            s = (lo * hi) ** 0.5
            if group_rate(s) < ACTIVE_RATE_HZ:
                lo = s
            else:
                hi = s
        s = (lo * hi) ** 0.5
        for i, p in zip(ids, group):
            sim.effective_params[i] = replace(p, i_gain=p.i_gain * s)
        base = sim.core_params[core]
        sim.core_params[core] = replace(base, i_gain=base.i_gain * s)
        scales[name] = s
    return scales


def build_encoder(
    enc: EncoderSpec,
    calib: CalibrationResult,
    net: NetworkSpec | None = None,
) -> NetworkSpec:
    """Emit the three level groups plus their thresholded relays.

    Each group sits on its own core (tuned gains are core parameters).
    Group i excites its relay, which only ignites once the group fires
    above the active rate as a population; the relay also inhibits every
    group tuned to lower currents, so for constant drive only the
    highest reachable group stays active.  Downstream consumers read the
    relays, not the raw groups, so sub-onset mismatch leak never leaves
    the encoder.
    """
    net = net if net is not None else NetworkSpec()
    fast = enc.tau_fast

    relay_params = net.core_params.get(enc.relay_core, RELAY_PARAMS)
    for name, core, params in zip(BAND_NAMES, enc.cores, calib.params):
        net.add_population(name, enc.pop_size, core)
        # Relays live on a shared untuned core so their ignition point
        # does not move with the per-crop group gains.
        net.add_population(name + "_relay", enc.relay_size, enc.relay_core)
        if core in net.core_params and net.core_params[core] != params:
            raise ValueError(f"core {core} already has different params")
        net.core_params[core] = params
    net.core_params.setdefault(enc.relay_core, relay_params)

    # Relay drive sized so a relay ignites only once its source group
    # fires above the active rate (with a safety margin).  Because the
    # relays carry the encoder's output downstream, this is also the
    # population-level threshold that keeps sub-onset mismatch leak from
    # reaching the state machine.
    p = relay_params
    onset_current = p.i_spike_threshold * (p.i_tau - p.i_a) / p.i_gain
    drive_per_hz = enc.pop_size * fast * 1e-3  # synaptic current per Hz of group rate
    w_relay = onset_current / (drive_per_hz * ACTIVE_RATE_HZ * enc.relay_onset_margin)

    for i, name in enumerate(BAND_NAMES):
        net.connect(
            name,
            name + "_relay",
            SynapseParams("excitatory", "fast", w_relay, fast),
        )
        # Backward inhibition onto every group tuned to lower currents.
        # A mid-speed synapse: slow enough that the ripple between relay
        # spikes cannot dip below a suppressed group's onset, fast enough
        # to clear well within a hold phase.
        for j in range(i):
            net.connect(
                name + "_relay",
                BAND_NAMES[j],
                SynapseParams("inhibitory", "fast", enc.backward_inh_weight, enc.tau_inh),
            )
    return net
