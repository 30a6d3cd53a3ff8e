"""Fixed-timestep, event-logged simulation of a compiled NetworkSpec.

The spec's synapse list is compiled into "channels": one first-order
filter state per (postsynaptic neuron, tau_syn, sign).  Different
synapses converging with the same time constant and sign share a
channel, which keeps the per-step work proportional to the number of
distinct filters rather than the number of synapses.  Spike delivery
then scatters weight jumps into channels.

Spikes emitted in step k are delivered in step k+1 (one-dt axonal
delay), which removes intra-step ordering ambiguity and makes runs
bit-reproducible for a fixed (spec, stimuli, dt, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fabric import EXT_PREFIX, EventLog, FabricLimits, NetworkSpec, validate_network
from .neuron import DivergenceError, I_MEM_CAP, NeuronParams

__all__ = [
    "ConstantCurrent",
    "PoissonInput",
    "RegularInput",
    "Stimulus",
    "run_simulation",
    "CompiledNetwork",
]

I_SYN_MAX = 1.0e4


@dataclass(frozen=True)
class ConstantCurrent:
    """Constant current injected into every neuron of a population."""

    population: str
    amplitude: float  # a.c.u., >= 0
    t_start: float  # ms
    t_stop: float  # ms


@dataclass(frozen=True)
class PoissonInput:
    """Seeded Poisson spike train fed through an external channel."""

    channel: str
    rate_hz: float
    t_start: float  # ms
    t_stop: float  # ms


@dataclass(frozen=True)
class RegularInput:
    """Evenly spaced spike train fed through an external channel."""

    channel: str
    rate_hz: float
    t_start: float  # ms
    t_stop: float  # ms


Stimulus = ConstantCurrent | PoissonInput | RegularInput


class CompiledNetwork:
    """Array-form network: per-neuron coefficients and synapse channels."""

    def __init__(self, spec: NetworkSpec, dt: float):
        if dt <= 0:
            raise ValueError("dt must be > 0")
        self.spec = spec
        self.dt = dt
        self.dt_us = int(round(dt * 1000.0))
        if self.dt_us <= 0:
            raise ValueError("dt must be an integer number of microseconds")

        cores = spec.neuron_core()
        self.n = len(cores)
        ids = sorted(cores)
        if ids != list(range(self.n)):
            raise ValueError("neuron ids must be contiguous from 0")

        params = [spec.params_for(i) for i in ids]
        self._load_neuron_arrays(params, dt)

        # channel key -> index
        chan_key: dict[tuple[int, float, int], int] = {}
        ch_post: list[int] = []
        ch_decay: list[float] = []
        ch_sign: list[float] = []

        def channel(post: int, tau_syn: float, sign: float) -> int:
            key = (post, tau_syn, int(sign))
            if key not in chan_key:
                chan_key[key] = len(ch_post)
                ch_post.append(post)
                ch_decay.append(math.exp(-dt / tau_syn))
                ch_sign.append(sign)
            return chan_key[key]

        # per presynaptic neuron: channels and jump weights
        syn_ch: dict[int, list[int]] = {}
        syn_w: dict[int, list[float]] = {}
        ext_ch: dict[str, list[int]] = {c: [] for c in spec.external_inputs}
        ext_w: dict[str, list[float]] = {c: [] for c in spec.external_inputs}

        for s in spec.synapses:
            sign = 1.0 if s.params.sign == "excitatory" else -1.0
            c = channel(s.post, s.params.tau_syn, sign)
            if s.is_external:
                name = s.pre[len(EXT_PREFIX):]
                ext_ch[name].append(c)
                ext_w[name].append(s.params.weight)
            else:
                syn_ch.setdefault(s.pre, []).append(c)
                syn_w.setdefault(s.pre, []).append(s.params.weight)

        self.n_channels = len(ch_post)
        self.ch_post = np.array(ch_post, dtype=np.intp)
        self.ch_decay = np.array(ch_decay)
        self.ch_signed = np.array(ch_sign)
        self.syn_ch = {k: np.array(v, dtype=np.intp) for k, v in syn_ch.items()}
        self.syn_w = {k: np.array(v) for k, v in syn_w.items()}
        self.ext_ch = {k: np.array(v, dtype=np.intp) for k, v in ext_ch.items()}
        self.ext_w = {k: np.array(v) for k, v in ext_w.items()}

        self.pop_ids = {name: np.array(p.ids, dtype=np.intp) for name, p in spec.populations.items()}

    def _load_neuron_arrays(self, params: list[NeuronParams], dt: float) -> None:
        a = np.array([p.decay_rate() for p in params])
        self.exp_a = np.exp(a * dt)
        self.gain_b = np.where(a != 0.0, (self.exp_a - 1.0) / np.where(a != 0.0, a, 1.0), dt)
        self.b_coef = np.array([p.i_gain / (p.i_tau * p.tau) for p in params])
        self.i_thr = np.array([p.i_spike_threshold for p in params])
        self.i_reset = np.array([p.i_reset for p in params])
        self.refr_us = np.array(
            [int(round(p.refractory * 1000.0)) for p in params], dtype=np.int64
        )


def run_simulation(
    spec: NetworkSpec,
    stimuli: list[Stimulus],
    duration: float,
    dt: float = 0.1,
    seed: int = 0,
    limits: FabricLimits = FabricLimits(),
    record: set[str] | None = None,
) -> EventLog:
    """Run for `duration` ms and return the spike log (us timestamps).

    Deterministic in (spec, stimuli, dt, seed): stochastic stimuli draw
    from generators derived from `seed` in channel order.  `record`
    restricts logging to the named populations (default: all).

    Raises DivergenceError naming the offending neuron if any membrane
    current leaves the physical range.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    violations = validate_network(spec, limits)
    if violations:
        raise ValueError(
            "network violates fabric limits:\n  " + "\n  ".join(map(str, violations))
        )

    net = CompiledNetwork(spec, dt)
    n_steps = int(round(duration / dt))

    # Pre-draw spike-train stimuli as per-step counts (deterministic).
    ss = np.random.SeedSequence(seed)
    child_seeds = ss.spawn(max(len(stimuli), 1))
    ext_counts: list[tuple[np.ndarray, np.ndarray, int, int]] = []  # (ch, w, k0, k1) + counts
    ext_step_counts: list[np.ndarray] = []
    const_current: list[tuple[np.ndarray, float, int, int]] = []
    for idx, st in enumerate(stimuli):
        if isinstance(st, ConstantCurrent):
            if st.amplitude < 0:
                raise ValueError("stimulus amplitude must be >= 0")
            ids = net.pop_ids[st.population]
            const_current.append(
                (ids, st.amplitude, int(round(st.t_start / dt)), int(round(st.t_stop / dt)))
            )
        else:
            k0 = int(round(st.t_start / dt))
            k1 = min(int(round(st.t_stop / dt)), n_steps)
            nk = max(k1 - k0, 0)
            if isinstance(st, PoissonInput):
                rng = np.random.default_rng(child_seeds[idx])
                counts = rng.poisson(st.rate_hz * dt * 1e-3, size=nk)
            else:
                period = 1000.0 / st.rate_hz  # ms
                ticks = np.arange(st.t_start, st.t_start + nk * dt, period)
                counts = np.zeros(nk, dtype=np.int64)
                kk = np.clip(((ticks - st.t_start) / dt).astype(np.int64), 0, max(nk - 1, 0))
                if nk:
                    np.add.at(counts, kk, 1)
            if st.channel not in net.ext_ch:
                raise ValueError(f"unknown external channel {st.channel!r}")
            ext_counts.append((net.ext_ch[st.channel], net.ext_w[st.channel], k0, k1))
            ext_step_counts.append(counts)

    i_mem = np.zeros(net.n)
    i_syn = np.zeros(net.n_channels)
    refr_until = np.zeros(net.n, dtype=np.int64)

    log_t: list[np.ndarray] = []
    log_n: list[np.ndarray] = []
    if record is None:
        record_mask = np.ones(net.n, dtype=bool)
    else:
        record_mask = np.zeros(net.n, dtype=bool)
        for name in record:
            record_mask[net.pop_ids[name]] = True

    prev_spikes = np.empty(0, dtype=np.intp)
    signed = net.ch_signed
    ch_post = net.ch_post
    n = net.n

    for k in range(n_steps):
        t_us = (k + 1) * net.dt_us  # state at end of this step

        i_syn *= net.ch_decay
        # deliveries from spikes of the previous step
        for pre in prev_spikes:
            ch = net.syn_ch.get(int(pre))
            if ch is not None:
                np.add.at(i_syn, ch, net.syn_w[int(pre)])
        # external spike trains
        for (ch, w, k0, k1), counts in zip(ext_counts, ext_step_counts):
            if k0 <= k < k1:
                c = counts[k - k0]
                if c:
                    np.add.at(i_syn, ch, w * c)

        np.clip(i_syn, None, I_SYN_MAX, out=i_syn)
        drive = np.bincount(ch_post, weights=signed * i_syn, minlength=n).astype(
            np.float64, copy=False
        )
        for ids, amp, k0, k1 in const_current:
            if k0 <= k < k1:
                drive[ids] += amp
        np.maximum(drive, 0.0, out=drive)

        active = t_us > refr_until
        i_mem = np.where(
            active,
            np.maximum(i_mem * net.exp_a + drive * net.b_coef * net.gain_b, 0.0),
            net.i_reset,
        )

        peak = np.max(i_mem) if n else 0.0
        if not peak <= I_MEM_CAP:  # catches NaN too
            bad = int(np.argmax(~(i_mem <= I_MEM_CAP)))
            raise DivergenceError(f"neuron {bad} ({spec.population_of(bad)})", t_us)

        ids = np.flatnonzero(active & (i_mem >= net.i_thr))
        if ids.size:
            i_mem[ids] = net.i_reset[ids]
            refr_until[ids] = t_us + net.refr_us[ids]
            prev_spikes = ids
            rec = ids[record_mask[ids]]
            if rec.size:
                log_n.append(rec.astype(np.uint32))
                log_t.append(np.full(rec.size, t_us, dtype=np.uint64))
        else:
            prev_spikes = np.empty(0, dtype=np.intp)

    if log_n:
        return EventLog(np.concatenate(log_n), np.concatenate(log_t))
    return EventLog.empty()
