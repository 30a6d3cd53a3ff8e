"""Current-mode neuron and synapse dynamics.

The membrane variable is a rectified current I_mem (arbitrary current
units, "a.c.u.") obeying a linear ODE with a positive-feedback term:

    tau * dI_mem/dt = -I_mem + I_in * I_gain / I_tau + I_a * I_mem / I_tau

For i_a < i_tau the dynamics relax toward the fixed point
I_in * I_gain / (I_tau - I_a); for i_a >= i_tau the feedback term wins
and I_mem grows without bound (a divergence guard trips).  Spiking is
threshold-and-reset with an absolute refractory period.

Synapses are first-order current filters: exponential decay with a fast
or slow time constant, plus a weight-sized jump per presynaptic spike.

Integration is exact per step for piecewise-constant input (exponential
Euler), so the only discretisation effect is the input being held over
each dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NeuronParams",
    "NeuronState",
    "SynapseParams",
    "SynapseState",
    "DivergenceError",
    "WindowTooShortError",
    "step_neuron",
    "step_synapse",
    "fi_curve",
    "I_MEM_CAP",
]

# Membrane currents above this are unphysical for the circuit regime the
# model covers; crossing it signals runaway positive feedback.
I_MEM_CAP = 1.0e6

# Synaptic current saturation, mimicking the output range of the
# current-mode synapse circuit.
I_SYN_MAX_DEFAULT = 1.0e4


class DivergenceError(RuntimeError):
    """Membrane current became non-finite or exceeded the cap."""

    def __init__(self, label: str, t_us: int | None = None):
        self.label = label
        self.t_us = t_us
        where = f" at t={t_us} us" if t_us is not None else ""
        super().__init__(
            f"membrane current diverged for {label}{where}: "
            "check i_a < i_tau and reduce dt"
        )


class WindowTooShortError(ValueError):
    """FI measurement window does not resolve the requested rates."""


@dataclass(frozen=True)
class NeuronParams:
    """Shared (per-core) neuron parameters.

    Times in ms, currents in a.c.u.
    """

    tau: float = 10.0
    i_gain: float = 1.0
    i_tau: float = 1.0
    i_a: float = 0.0
    i_spike_threshold: float = 1.0
    i_reset: float = 0.0
    refractory: float = 5.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.i_tau <= 0:
            raise ValueError("i_tau must be > 0")
        if self.i_gain <= 0:
            raise ValueError("i_gain must be > 0")
        if self.i_a < 0:
            raise ValueError("i_a must be >= 0")
        if not (self.i_spike_threshold > self.i_reset >= 0):
            raise ValueError("need i_spike_threshold > i_reset >= 0")
        if self.refractory < 0:
            raise ValueError("refractory must be >= 0")

    def decay_rate(self) -> float:
        """Effective rate a (1/ms) of dI/dt = a*I + b; negative = stable."""
        return (self.i_a / self.i_tau - 1.0) / self.tau

    def fixed_point(self, i_in: float) -> float:
        """Sub-threshold steady state for constant input (i_a < i_tau only)."""
        if self.i_a >= self.i_tau:
            raise ValueError("no finite fixed point when i_a >= i_tau")
        return i_in * self.i_gain / (self.i_tau - self.i_a)

    def rate_hz(self, i_in: float) -> float:
        """Closed-form firing rate for constant drive.

        Integrating the linear membrane equation from reset to threshold
        gives ISI = refractory + tau_eff * ln((I* - I_reset)/(I* - I_thr))
        with tau_eff = tau / (1 - i_a/i_tau); sub-threshold drive (fixed
        point at or below threshold) never crosses, so the rate is 0.
        """
        i_star = self.fixed_point(i_in)
        if i_star <= self.i_spike_threshold:
            return 0.0
        tau_eff = self.tau / (1.0 - self.i_a / self.i_tau)
        charge = tau_eff * math.log(
            (i_star - self.i_reset) / (i_star - self.i_spike_threshold)
        )
        return 1000.0 / (self.refractory + charge)


@dataclass(frozen=True)
class NeuronState:
    i_mem: float = 0.0
    refractory_until: int = 0  # timestamp, us


@dataclass(frozen=True)
class SynapseParams:
    sign: str = "excitatory"  # "excitatory" | "inhibitory"
    speed: str = "fast"  # "fast" | "slow"
    weight: float = 1.0  # a.c.u. increment per spike, magnitude
    tau_syn: float = 5.0  # ms

    def __post_init__(self):
        if self.sign not in ("excitatory", "inhibitory"):
            raise ValueError(f"bad synapse sign {self.sign!r}")
        if self.speed not in ("fast", "slow"):
            raise ValueError(f"bad synapse speed {self.speed!r}")
        if self.weight <= 0:
            raise ValueError("weight must be > 0 (sign is carried separately)")
        if self.tau_syn <= 0:
            raise ValueError("tau_syn must be > 0")

    @property
    def signed_weight(self) -> float:
        return self.weight if self.sign == "excitatory" else -self.weight


@dataclass(frozen=True)
class SynapseState:
    i_syn: float = 0.0


def step_neuron(
    state: NeuronState,
    params: NeuronParams,
    i_in: float,
    now: int,
    dt: float,
    label: str = "neuron",
) -> tuple[NeuronState, int | None]:
    """Advance one neuron by one step of dt ms.

    `i_in` is the rectified (>= 0) summed input current, held constant
    over the step.  `now` is the step start time in integer us.  Returns
    the new state and, if the threshold was crossed, the spike timestamp
    (end of step).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if i_in < 0:
        raise ValueError("i_in must be rectified to >= 0 before stepping")

    t_end = now + int(round(dt * 1000.0))

    if now < state.refractory_until:
        return NeuronState(params.i_reset, state.refractory_until), None

    a = params.decay_rate()
    b = i_in * params.i_gain / (params.i_tau * params.tau)
    e = math.exp(a * dt)
    if a != 0.0:
        i_mem = state.i_mem * e + b * (e - 1.0) / a
    else:
        i_mem = state.i_mem + b * dt
    i_mem = max(i_mem, 0.0)

    if not math.isfinite(i_mem) or i_mem > I_MEM_CAP:
        raise DivergenceError(label, t_end)

    if i_mem >= params.i_spike_threshold:
        refr_until = t_end + int(round(params.refractory * 1000.0))
        return NeuronState(params.i_reset, refr_until), t_end
    return NeuronState(i_mem, state.refractory_until), None


def step_synapse(
    state: SynapseState,
    params: SynapseParams,
    spikes_in: int,
    dt: float,
    i_syn_max: float = I_SYN_MAX_DEFAULT,
) -> SynapseState:
    """Decay the synaptic current over dt ms, then add the spike jumps."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if spikes_in < 0:
        raise ValueError("spikes_in must be >= 0")
    i_syn = state.i_syn * math.exp(-dt / params.tau_syn)
    i_syn += params.weight * spikes_in
    return SynapseState(min(i_syn, i_syn_max))


def fi_curve(
    params: NeuronParams,
    i_range: tuple[float, float],
    n_points: int,
    window: float,
    dt: float = 0.1,
    warmup: float | None = None,
) -> list[tuple[float, float]]:
    """Firing rate (Hz) vs constant input current, by spike counting.

    Simulates `n_points` independent neurons at currents spanning
    `i_range`, discards `warmup` ms (default 5 effective time constants,
    capped at the window), then counts spikes over `window` ms.

    Raises WindowTooShortError unless the top current yields at least 10
    spikes in the window (rate resolution floor), except when even the
    top current is sub-threshold (all rates are exactly 0).
    """
    lo, hi = i_range
    if lo < 0:
        raise ValueError("currents must be >= 0")
    if hi < lo:
        raise ValueError("need hi >= lo")
    if n_points < 2:
        raise ValueError("need n_points >= 2")
    if window <= 0:
        raise ValueError("window must be > 0")

    currents = np.linspace(lo, hi, n_points)
    if warmup is None:
        a = params.decay_rate()
        tau_eff = -1.0 / a if a < 0 else params.tau
        warmup = min(5.0 * tau_eff, window)

    rates = _rates_for_currents(params, currents, window, dt, warmup)

    # 0 Hz everywhere is a legitimate answer only if the drive never
    # reaches threshold; otherwise the window is too coarse.
    top_count = rates[-1] * window / 1000.0
    if top_count < 10.0:
        supra = params.i_a >= params.i_tau or (
            hi > 0 and params.fixed_point(hi) >= params.i_spike_threshold
        )
        if supra:
            raise WindowTooShortError(
                f"only {top_count:.0f} spikes at i_in={hi} in {window} ms; "
                "need >= 10 for rate resolution"
            )
    return [(float(i), float(r)) for i, r in zip(currents, rates)]


def _rates_for_currents(
    params: NeuronParams,
    currents: np.ndarray,
    window: float,
    dt: float,
    warmup: float,
) -> np.ndarray:
    """Vectorised constant-drive simulation; returns rates in Hz."""
    n = currents.size
    a = params.decay_rate()
    e = math.exp(a * dt)
    gain = (e - 1.0) / a if a != 0.0 else dt
    b = currents * params.i_gain / (params.i_tau * params.tau)

    i_mem = np.zeros(n)
    refr_left = np.zeros(n)  # ms remaining
    counts = np.zeros(n, dtype=np.int64)

    n_warm = int(round(warmup / dt))
    n_meas = int(round(window / dt))
    for k in range(n_warm + n_meas):
        refr = refr_left > 0.0
        i_mem = np.where(refr, params.i_reset, i_mem * e + b * gain)
        refr_left = np.maximum(refr_left - dt, 0.0)
        if not np.all(np.isfinite(i_mem)) or np.any(i_mem > I_MEM_CAP):
            bad = int(np.argmax(~np.isfinite(i_mem) | (i_mem > I_MEM_CAP)))
            raise DivergenceError(f"fi-curve point i_in={currents[bad]:g}")
        spk = i_mem >= params.i_spike_threshold
        if np.any(spk):
            i_mem[spk] = params.i_reset
            refr_left[spk] = params.refractory
            if k >= n_warm:
                counts[spk] += 1
    return counts / (window / 1000.0)
