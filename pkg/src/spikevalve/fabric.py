"""Chip-level network structure: cores, populations, synapses, limits.

A NetworkSpec is a flat description of the network as it would be placed
on the multi-core fabric: named populations pinned to cores, an expanded
synapse list, per-core shared neuron parameters, and named external
input channels.  Structural checks (fan-in CAM slots, fan-out, core
assignment) are data-producing, not exceptions, so a caller can collect
every violation at once.

Event logs are (neuron id, integer-microsecond timestamp) streams with
CSV and a fixed little-endian binary framing (u32 id, u64 t_us per
record, no header).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .neuron import NeuronParams, SynapseParams

__all__ = [
    "FabricLimits",
    "Population",
    "Synapse",
    "NetworkSpec",
    "SpikeEvent",
    "EventLog",
    "MismatchModel",
    "Violation",
    "validate_network",
    "apply_mismatch",
    "route_event",
]

EXT_PREFIX = "ext:"  # presynaptic ids of this form are external channels

# NeuronParams fields that receive an independent mismatch factor each.
_MISMATCH_FIELDS = ("tau", "i_gain", "i_tau", "i_a", "i_spike_threshold", "refractory")


@dataclass(frozen=True)
class FabricLimits:
    n_cores: int = 4
    neurons_per_core: int = 256
    cam_slots_per_neuron: int = 64
    max_fanout: int = 1024

    def __post_init__(self):
        for name in ("n_cores", "neurons_per_core", "cam_slots_per_neuron", "max_fanout"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class Population:
    name: str
    core: int
    ids: tuple[int, ...]  # global neuron ids

    @property
    def size(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Synapse:
    pre: int | str  # neuron id, or "ext:<channel>" for an external source
    post: int
    params: SynapseParams

    @property
    def is_external(self) -> bool:
        return isinstance(self.pre, str)


@dataclass
class NetworkSpec:
    """Populations + synapses + per-core parameters + input channels."""

    populations: dict[str, Population] = field(default_factory=dict)
    synapses: list[Synapse] = field(default_factory=list)
    core_params: dict[int, NeuronParams] = field(default_factory=dict)
    external_inputs: tuple[str, ...] = ()
    # Per-neuron effective parameters; None until apply_mismatch.
    effective_params: dict[int, NeuronParams] | None = None

    # -- construction helpers -------------------------------------------------

    def n_neurons(self) -> int:
        return sum(p.size for p in self.populations.values())

    def add_population(self, name: str, size: int, core: int) -> Population:
        if name in self.populations:
            raise ValueError(f"population {name!r} already exists")
        if size <= 0:
            raise ValueError("population size must be > 0")
        start = max((max(p.ids) for p in self.populations.values()), default=-1) + 1
        pop = Population(name, core, tuple(range(start, start + size)))
        self.populations[name] = pop
        return pop

    def add_external_input(self, name: str) -> None:
        if name not in self.external_inputs:
            self.external_inputs = self.external_inputs + (name,)

    def connect(
        self,
        pre: str,
        post: str,
        params: SynapseParams,
        pattern: str = "all",
    ) -> None:
        """Wire population `pre` (or channel "ext:<name>") onto population `post`.

        pattern: "all" (all-to-all, self-connections included when
        pre == post) or "one" (index-aligned one-to-one).
        """
        post_ids = self.populations[post].ids
        if pre.startswith(EXT_PREFIX):
            chan = pre[len(EXT_PREFIX):]
            if chan not in self.external_inputs:
                raise ValueError(f"unknown external input {chan!r}")
            pre_ids: list[int | str] = [pre]
        else:
            pre_ids = list(self.populations[pre].ids)

        if pattern == "all":
            for a in pre_ids:
                for b in post_ids:
                    self.synapses.append(Synapse(a, b, params))
        elif pattern == "one":
            if len(pre_ids) != len(post_ids):
                raise ValueError("one-to-one needs equal population sizes")
            for a, b in zip(pre_ids, post_ids):
                self.synapses.append(Synapse(a, b, params))
        else:
            raise ValueError(f"unknown pattern {pattern!r}")

    def merge(self, other: "NetworkSpec") -> None:
        """Absorb another fragment; neuron ids must not collide."""
        mine = {i for p in self.populations.values() for i in p.ids}
        for name, pop in other.populations.items():
            if name in self.populations:
                raise ValueError(f"population {name!r} defined twice")
            if mine & set(pop.ids):
                raise ValueError(f"neuron id collision merging {name!r}")
            self.populations[name] = pop
        self.synapses.extend(other.synapses)
        for core, params in other.core_params.items():
            if core in self.core_params and self.core_params[core] != params:
                raise ValueError(f"conflicting params for core {core}")
            self.core_params[core] = params
        for chan in other.external_inputs:
            self.add_external_input(chan)

    # -- lookups --------------------------------------------------------------

    def neuron_core(self) -> dict[int, int]:
        return {i: p.core for p in self.populations.values() for i in p.ids}

    def population_of(self, neuron: int) -> str:
        for name, p in self.populations.items():
            if neuron in p.ids:
                return name
        raise KeyError(f"neuron {neuron} not in any population")

    def params_for(self, neuron: int) -> NeuronParams:
        if self.effective_params is not None:
            return self.effective_params[neuron]
        core = self.neuron_core()[neuron]
        return self.core_params[core]


@dataclass(frozen=True)
class SpikeEvent:
    neuron: int
    t: int  # us


@dataclass(frozen=True)
class EventLog:
    """Immutable spike record: parallel id/time arrays sorted by time."""

    neurons: np.ndarray  # u32
    times: np.ndarray  # u64, us, non-decreasing

    def __post_init__(self):
        object.__setattr__(self, "neurons", np.asarray(self.neurons, dtype=np.uint32))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.uint64))
        if self.neurons.shape != self.times.shape:
            raise ValueError("neurons and times must have equal length")
        if self.times.size and np.any(np.diff(self.times.astype(np.int64)) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return int(self.neurons.size)

    def __iter__(self):
        for n, t in zip(self.neurons, self.times):
            yield SpikeEvent(int(n), int(t))

    @classmethod
    def empty(cls) -> "EventLog":
        return cls(np.empty(0, np.uint32), np.empty(0, np.uint64))

    def window(self, t0_us: int, t1_us: int) -> "EventLog":
        m = (self.times >= t0_us) & (self.times < t1_us)
        return EventLog(self.neurons[m], self.times[m])

    def rate_hz(self, ids, t0_us: int, t1_us: int) -> float:
        """Population-mean firing rate over [t0, t1)."""
        if t1_us <= t0_us:
            raise ValueError("empty window")
        ids = np.asarray(sorted(ids), dtype=np.uint32)
        m = (self.times >= t0_us) & (self.times < t1_us) & np.isin(self.neurons, ids)
        return float(np.count_nonzero(m)) / len(ids) / ((t1_us - t0_us) * 1e-6)

    # -- interchange ----------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("neuron_id,t_us\n")
            for n, t in zip(self.neurons, self.times):
                f.write(f"{n},{t}\n")

    @classmethod
    def from_csv(cls, path) -> "EventLog":
        ns, ts = [], []
        with open(path) as f:
            header = f.readline().strip()
            if header != "neuron_id,t_us":
                raise ValueError(f"bad event log header {header!r}")
            for line in f:
                line = line.strip()
                if not line:
                    continue
                a, b = line.split(",")
                ns.append(int(a))
                ts.append(int(b))
        return cls(np.array(ns, np.uint32), np.array(ts, np.uint64))

    def to_binary(self, path) -> None:
        """Record stream: little-endian u32 neuron id, u64 t_us; no header."""
        with open(path, "wb") as f:
            for n, t in zip(self.neurons, self.times):
                f.write(struct.pack("<IQ", int(n), int(t)))

    @classmethod
    def from_binary(cls, path) -> "EventLog":
        ns, ts = [], []
        with open(path, "rb") as f:
            while chunk := f.read(12):
                if len(chunk) != 12:
                    raise ValueError("truncated event record")
                n, t = struct.unpack("<IQ", chunk)
                ns.append(n)
                ts.append(t)
        return cls(np.array(ns, np.uint32), np.array(ts, np.uint64))


@dataclass(frozen=True)
class MismatchModel:
    cv: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.cv < 1.0):
            raise ValueError("cv must be in [0, 1)")


@dataclass(frozen=True)
class Violation:
    kind: str  # "cam_overflow" | "fanout_overflow" | "unknown_id" | ...
    subject: int | str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}[{self.subject}]: {self.detail}"


def validate_network(spec: NetworkSpec, limits: FabricLimits = FabricLimits()) -> list[Violation]:
    """Structural check against the fabric limits; returns ALL violations."""
    out: list[Violation] = []
    cores = spec.neuron_core()
    known = set(cores)

    for name, pop in spec.populations.items():
        if not (0 <= pop.core < limits.n_cores):
            out.append(Violation("bad_core", name, f"core {pop.core} outside 0..{limits.n_cores - 1}"))
        elif pop.core not in spec.core_params:
            out.append(Violation("missing_core_params", name, f"core {pop.core} has no NeuronParams"))

    per_core = {}
    for pop in spec.populations.values():
        per_core[pop.core] = per_core.get(pop.core, 0) + pop.size
    for core, n in sorted(per_core.items()):
        if n > limits.neurons_per_core:
            out.append(Violation("core_overflow", core, f"{n} neurons > {limits.neurons_per_core}"))

    seen = {}
    for pop in spec.populations.values():
        for i in pop.ids:
            seen[i] = seen.get(i, 0) + 1
    for i, c in sorted(seen.items()):
        if c > 1:
            out.append(Violation("duplicate_id", i, f"neuron id appears in {c} populations"))

    fan_in: dict[int, int] = {}
    fan_out: dict[int | str, int] = {}
    for s in spec.synapses:
        if not s.is_external and s.pre not in known:
            out.append(Violation("unknown_id", s.pre, "presynaptic id not in any population"))
        if s.is_external and s.pre[len(EXT_PREFIX):] not in spec.external_inputs:
            out.append(Violation("unknown_channel", s.pre, "external channel not declared"))
        if s.post not in known:
            out.append(Violation("unknown_id", s.post, "postsynaptic id not in any population"))
            continue
        fan_in[s.post] = fan_in.get(s.post, 0) + 1
        fan_out[s.pre] = fan_out.get(s.pre, 0) + 1

    for post, n in sorted(fan_in.items()):
        if n > limits.cam_slots_per_neuron:
            out.append(Violation("cam_overflow", post, f"{n} > {limits.cam_slots_per_neuron} input slots"))
    for pre, n in sorted(fan_out.items(), key=lambda kv: str(kv[0])):
        if not isinstance(pre, str) and n > limits.max_fanout:
            out.append(Violation("fanout_overflow", pre, f"{n} > {limits.max_fanout} targets"))

    return out


def apply_mismatch(spec: NetworkSpec, model: MismatchModel) -> NetworkSpec:
    """Attach per-neuron effective parameters.

    Each neuron's core parameters are scaled field-wise by independent
    lognormal factors with unit mean and the model's coefficient of
    variation.  cv = 0 reproduces the core parameters exactly;
    everything is deterministic in the seed and in neuron-id order.
    """
    cores = spec.neuron_core()
    eff: dict[int, NeuronParams] = {}
    if model.cv == 0.0:
        for i in sorted(cores):
            eff[i] = spec.core_params[cores[i]]
    else:
        sigma2 = np.log1p(model.cv**2)
        sigma = float(np.sqrt(sigma2))
        mu = -sigma2 / 2.0
        rng = np.random.default_rng(model.seed)
        for i in sorted(cores):
            base = spec.core_params[cores[i]]
            factors = rng.lognormal(mu, sigma, size=len(_MISMATCH_FIELDS))
            kw = {
                f: getattr(base, f) * float(k)
                for f, k in zip(_MISMATCH_FIELDS, factors)
            }
            eff[i] = replace(base, **kw)
    out = NetworkSpec(
        populations=dict(spec.populations),
        synapses=list(spec.synapses),
        core_params=dict(spec.core_params),
        external_inputs=spec.external_inputs,
        effective_params=eff,
    )
    return out


def route_event(
    spike: SpikeEvent, spec: NetworkSpec
) -> tuple[list[tuple[int, SynapseParams]], int]:
    """Deliveries for one spike plus the count of distinct destination cores."""
    cores = spec.neuron_core()
    if spike.neuron not in cores:
        raise KeyError(f"unknown neuron id {spike.neuron}")
    deliveries = [
        (s.post, s.params) for s in spec.synapses if s.pre == spike.neuron
    ]
    touched = {cores[post] for post, _ in deliveries}
    return deliveries, len(touched)
