"""Attractor memory, winner-take-all state machine, and valve readout.

Three recurrent excitatory groups (e0 wet, e1 mid, e2 dry) compete
through a small shared inhibitory group: whichever group is pushed by
the encoder wins, self-sustains through slow recurrent excitation, and
suppresses the others.  The persistent winner bridges the long gaps
between sensor presentations.

The readout has a recurrent "close" group driven by the wet state and a
"open" group driven by the dry state through a fast-excitation /
slow-inhibition pair (transient-emphasised, with a tonic remainder so
the decision window at the end of each cycle still sees it).  The close
group inhibits the open group; the dry state shuts the close group
down, so at most one of the two is active.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fabric import EventLog, NetworkSpec
from .neuron import NeuronParams, SynapseParams

__all__ = [
    "WtaSpec",
    "ReadoutSpec",
    "Command",
    "ExclusivityViolation",
    "build_wta",
    "build_readout",
    "tune_attractor",
    "read_state",
    "decide",
    "WTA_POPS",
    "WTA_PARAMS",
]

WTA_POPS = ("e0", "e1", "e2")
ACTIVE_RATE_HZ = 10.0

# Shared parameters of the state-machine core.
WTA_PARAMS = NeuronParams(
    tau=20.0, i_gain=1.0, i_tau=1.0, i_a=0.0,
    i_spike_threshold=1.0, i_reset=0.0, refractory=5.0,
)


@dataclass(frozen=True)
class WtaSpec:
    exc_size: int = 16
    inh_size: int = 4
    core: int = 3
    w_ee: float = 0.04  # recurrent excitation, slow
    w_ei: float = 0.30  # excitatory -> inhibitory, fast
    w_ie: float = 2.40  # inhibitory -> excitatory, fast
    w_in: float = 8.0  # encoder-relay input, fast
    w_reset: float = 15.0  # encoder-relay inhibition of rival states, fast
    tau_fast: float = 5.0  # ms
    tau_slow: float = 100.0  # ms

    def __post_init__(self):
        for f in ("w_ee", "w_ei", "w_ie", "w_in", "w_reset"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be > 0")
        if self.exc_size <= 0 or self.inh_size <= 0:
            raise ValueError("population sizes must be > 0")


@dataclass(frozen=True)
class ReadoutSpec:
    pop_size: int = 8
    core: int = 3
    w_drive: float = 0.03  # wet state -> close excitation, slow
    w_cc: float = 0.05  # close recurrence, slow
    w_open_fast: float = 1.2  # dry state -> open, fast excitation
    w_open_slow: float = 0.025  # dry state -> open, slow inhibition
    w_close_open: float = 1.0  # close -> open inhibition, fast
    w_dry_close: float = 3.0  # dry state -> close inhibition, fast
    tau_fast: float = 5.0
    tau_slow: float = 100.0


@dataclass(frozen=True)
class Command:
    t: int  # us (simulation clock)
    action: str  # "OPEN" | "CLOSE"

    def __post_init__(self):
        if self.action not in ("OPEN", "CLOSE"):
            raise ValueError(f"bad action {self.action!r}")


class ExclusivityViolation(RuntimeError):
    """More than one competing population decoded as active."""

    def __init__(self, rates: dict[str, float]):
        self.rates = rates
        super().__init__(
            "exclusivity violated: "
            + ", ".join(f"{k}={v:.1f} Hz" for k, v in sorted(rates.items()))
        )


def build_wta(spec: WtaSpec, net: NetworkSpec | None = None) -> NetworkSpec:
    """Three self-exciting groups sharing one global inhibitory group."""
    net = net if net is not None else NetworkSpec()
    for name in WTA_POPS:
        net.add_population(name, spec.exc_size, spec.core)
    net.add_population("inh", spec.inh_size, spec.core)
    net.core_params.setdefault(spec.core, WTA_PARAMS)

    exc_slow = SynapseParams("excitatory", "slow", spec.w_ee, spec.tau_slow)
    to_inh = SynapseParams("excitatory", "fast", spec.w_ei, spec.tau_fast)
    from_inh = SynapseParams("inhibitory", "fast", spec.w_ie, spec.tau_fast)
    for name in WTA_POPS:
        net.connect(name, name, exc_slow)
        net.connect(name, "inh", to_inh)
        net.connect("inh", name, from_inh)
    return net


def connect_encoder_to_wta(
    net: NetworkSpec, encoder_pops: tuple[str, str, str], spec: WtaSpec
) -> None:
    """Band i of the encoder ignites state i and resets the rivals.

    The feedforward reset is what lets a freshly active band dethrone an
    incumbent attractor state within a single presentation: recurrent
    excitation alone would let the incumbent ride out the kick.
    """
    w_in = SynapseParams("excitatory", "fast", spec.w_in, spec.tau_fast)
    w_reset = SynapseParams("inhibitory", "fast", spec.w_reset, spec.tau_fast)
    for enc, e in zip(encoder_pops, WTA_POPS):
        net.connect(enc, e, w_in)
        for rival in WTA_POPS:
            if rival != e:
                net.connect(enc, rival, w_reset)


def build_readout(spec: ReadoutSpec, net: NetworkSpec) -> NetworkSpec:
    """Open/close groups wired onto an existing WTA fragment."""
    net.add_population("open", spec.pop_size, spec.core)
    net.add_population("close", spec.pop_size, spec.core)
    net.core_params.setdefault(spec.core, WTA_PARAMS)

    # close: persistent while the wet state holds, killed by the dry state
    net.connect("e0", "close", SynapseParams("excitatory", "slow", spec.w_drive, spec.tau_slow))
    net.connect("close", "close", SynapseParams("excitatory", "slow", spec.w_cc, spec.tau_slow))
    net.connect("e2", "close", SynapseParams("inhibitory", "fast", spec.w_dry_close, spec.tau_fast))

    # open: transient-emphasised response to the dry state switching on
    net.connect("e2", "open", SynapseParams("excitatory", "fast", spec.w_open_fast, spec.tau_fast))
    net.connect("e2", "open", SynapseParams("inhibitory", "slow", spec.w_open_slow, spec.tau_slow))
    net.connect("close", "open", SynapseParams("inhibitory", "fast", spec.w_close_open, spec.tau_fast))
    return net


def read_state(
    log: EventLog,
    pops: dict[str, tuple[int, ...]],
    t0_us: int,
    t1_us: int,
    active_rate_hz: float = ACTIVE_RATE_HZ,
) -> str | None:
    """Label of the unique active population in the window, or None.

    Raises ExclusivityViolation if two or more qualify.
    """
    rates = {name: log.rate_hz(ids, t0_us, t1_us) for name, ids in pops.items()}
    active = {k: v for k, v in rates.items() if v > active_rate_hz}
    if len(active) > 1:
        raise ExclusivityViolation(rates)
    if not active:
        return None
    return next(iter(active))


def decide(
    log: EventLog,
    open_ids,
    close_ids,
    t0_us: int,
    t1_us: int,
    prev: str | None,
    min_rate_hz: float = ACTIVE_RATE_HZ,
) -> Command | None:
    """Rate comparison over the decision window, with alternation.

    OPEN when the open group out-fires the close group (and we are not
    already open), CLOSE for the converse; ties and sub-threshold
    windows hold the previous action.  The command is stamped at the
    window end.
    """
    r_open = log.rate_hz(open_ids, t0_us, t1_us)
    r_close = log.rate_hz(close_ids, t0_us, t1_us)
    if max(r_open, r_close) <= min_rate_hz:
        return None
    if r_open > r_close and prev != "OPEN":
        return Command(t1_us, "OPEN")
    if r_close > r_open and prev != "CLOSE":
        return Command(t1_us, "CLOSE")
    return None


def tune_attractor(
    spec: WtaSpec,
    target_band_hz: tuple[float, float] = (30.0, 80.0),
    probe_s: float = 5.0,
    dt: float = 0.5,
    seed: int = 0,
    cv: float = 0.1,
    w_ee_grid: tuple[float, ...] = (0.03, 0.04, 0.05, 0.06),
    w_ie_grid: tuple[float, ...] = (0.6, 1.0, 1.6, 2.4),
) -> tuple[WtaSpec, dict]:
    """Grid-search recurrent weights for self-sustained activity.

    For each (w_ee, w_ie) pair, drives e1 with a 1 s 200 Hz burst and
    checks the rate over the last second of a probe run.  Returns the
    spec with the first pair whose sustained rate lands in the target
    band, preferring the pair closest to the band centre; reports the
    nearest miss if none qualifies.
    """
    from dataclasses import replace

    from .fabric import MismatchModel, apply_mismatch
    from .engine import PoissonInput, run_simulation

    results = {}
    best = None
    centre = sum(target_band_hz) / 2.0
    for w_ee in w_ee_grid:
        for w_ie in w_ie_grid:
            cand = replace(spec, w_ee=w_ee, w_ie=w_ie)
            net = build_wta(cand)
            net.add_external_input("probe")
            net.connect("ext:probe", "e1", SynapseParams("excitatory", "fast", cand.w_in, cand.tau_fast))
            sim = apply_mismatch(net, MismatchModel(cv=cv, seed=seed))
            dur = probe_s * 1000.0
            log = run_simulation(
                sim, [PoissonInput("probe", 200.0, 0.0, 1000.0)], dur, dt=dt, seed=seed
            )
            ids = net.populations["e1"].ids
            rate = log.rate_hz(ids, int((dur - 1000.0) * 1000), int(dur * 1000))
            results[(w_ee, w_ie)] = rate
            if target_band_hz[0] <= rate <= target_band_hz[1]:
                if best is None or abs(rate - centre) < abs(results[best] - centre):
                    best = (w_ee, w_ie)
    if best is None:
        near = min(results, key=lambda k: abs(results[k] - centre))
        raise RuntimeError(
            f"no weight pair sustains {target_band_hz} Hz; nearest miss "
            f"w_ee={near[0]}, w_ie={near[1]} at {results[near]:.1f} Hz"
        )
    return replace(spec, w_ee=best[0], w_ie=best[1]), results
