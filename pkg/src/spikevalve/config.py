"""YAML run configuration, network-spec files, and run manifests.

Three file kinds, all YAML:

* run config -- every knob of a CLI invocation (paths, crop, mode, dt,
  seed, mismatch cv, stride, energy-constant overrides, synthesis
  parameters).  Missing keys take the documented defaults.
* network spec -- populations, per-core neuron parameters, external
  channels, and synapse groups.  Synapse groups use population-level
  patterns ("all", "one") when the expanded pairs form one, and explicit
  index pairs otherwise, so files stay readable.
* run manifest -- a config echo with every default resolved, plus tool
  and library versions.  A manifest is itself a valid run config:
  re-running a subcommand from its manifest reproduces the outputs
  byte-identically.
"""

from __future__ import annotations

import platform
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import yaml

from .dataio import SynthParams
from .encoder import PROFILES, CropProfile
from .fabric import EXT_PREFIX, NetworkSpec, Population, Synapse
from .neuron import NeuronParams, SynapseParams
from .power import EnergyConstants

__all__ = [
    "RunConfig",
    "ConfigError",
    "load_run_config",
    "save_run_config",
    "network_to_dict",
    "network_from_dict",
    "save_network",
    "load_network",
    "write_manifest",
    "read_manifest",
]


class ConfigError(ValueError):
    """Malformed configuration file."""


@dataclass(frozen=True)
class RunConfig:
    """Resolved knobs for one CLI invocation."""

    input_csv: str = ""  # SMP series (simulate / evaluate)
    network: str = ""  # optional network-spec YAML (fi-curve / power)
    out_dir: str = "out"
    crop: str = "apple"  # "apple" | "kiwi" | "custom"
    crop_params: dict = field(default_factory=dict)  # th_on/th_off/smp_floor[/smp_ceil]
    mode: str = "compressed"  # "compressed" | "realtime"
    time_scale: float = 900.0  # realtime: cycle length in s per sensor interval
    dt: float = 0.5  # ms
    seed: int = 0
    cv: float = 0.1
    stride: int = 1
    energy: dict = field(default_factory=dict)  # EnergyConstants field overrides
    synth: dict = field(default_factory=dict)  # SynthParams field overrides

    def __post_init__(self):
        if self.mode not in ("compressed", "realtime"):
            raise ConfigError(f"bad mode {self.mode!r}")
        if self.crop != "custom" and self.crop not in PROFILES:
            raise ConfigError(f"unknown crop {self.crop!r}")
        if self.crop == "custom" and not self.crop_params:
            raise ConfigError("crop: custom requires crop_params")
        if self.dt <= 0 or self.stride < 1 or self.cv < 0 or self.time_scale <= 0:
            raise ConfigError("dt, time_scale must be > 0; stride >= 1; cv >= 0")
        bad = set(self.energy) - {f.name for f in fields(EnergyConstants)}
        if bad:
            raise ConfigError(f"unknown energy constants: {sorted(bad)}")
        bad = set(self.synth) - {f.name for f in fields(SynthParams)}
        if bad:
            raise ConfigError(f"unknown synth parameters: {sorted(bad)}")

    def profile(self) -> CropProfile:
        if self.crop == "custom":
            try:
                return CropProfile(name="custom", **self.crop_params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad crop_params: {exc}") from exc
        return PROFILES[self.crop]

    def energy_constants(self) -> EnergyConstants:
        return EnergyConstants(**{**asdict(EnergyConstants()), **self.energy})

    def synth_params(self) -> SynthParams:
        try:
            return SynthParams(**{**asdict(SynthParams()), **self.synth})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth parameters: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


def _run_config_from_dict(d: dict, source: str = "<config>") -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    known = {f.name for f in fields(RunConfig)}
    bad = set(d) - known
    if bad:
        raise ConfigError(f"{source}: unknown keys {sorted(bad)}")
    try:
        return RunConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_run_config(path) -> RunConfig:
    with open(path) as f:
        doc = yaml.safe_load(f) or {}
    if isinstance(doc, dict) and "config" in doc:  # accept a manifest as a config
        doc = doc["config"]
    return _run_config_from_dict(doc, str(path))


def save_run_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=False)


# -- network spec files -------------------------------------------------------


def _params_dict(p: NeuronParams) -> dict:
    return {k: float(v) for k, v in asdict(p).items()}


def _syn_params_dict(p: SynapseParams) -> dict:
    return {
        "sign": p.sign,
        "speed": p.speed,
        "weight": float(p.weight),
        "tau_syn": float(p.tau_syn),
    }


def network_to_dict(spec: NetworkSpec) -> dict:
    """Grouped, order-preserving dict form of a NetworkSpec."""
    pops = sorted(spec.populations.values(), key=lambda p: p.ids[0])
    owner: dict[int, str] = {i: p.name for p in pops for i in p.ids}
    index: dict[int, int] = {i: k for p in pops for k, i in enumerate(p.ids)}

    # Group expanded synapses back into population-level connections.
    groups: dict[tuple, list[tuple]] = {}
    order: list[tuple] = []
    for s in spec.synapses:
        pre_pop = s.pre if s.is_external else owner[s.pre]
        key = (pre_pop, owner[s.post], s.params)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append((s.pre, s.post))

    conns = []
    for key in order:
        pre_pop, post_pop, params = key
        pairs = groups[key]
        entry = {
            "pre": pre_pop,
            "post": post_pop,
            **_syn_params_dict(params),
        }
        n_pre = 1 if isinstance(pre_pop, str) and pre_pop.startswith(EXT_PREFIX) \
            else spec.populations[pre_pop].size
        n_post = spec.populations[post_pop].size
        if len(pairs) == n_pre * n_post and len(set(pairs)) == len(pairs):
            entry["pattern"] = "all"
        elif (
            n_pre == n_post
            and len(pairs) == n_pre
            and all(index.get(a, 0) == index[b] for a, b in pairs)
        ):
            entry["pattern"] = "one"
        else:
            entry["pattern"] = "pairs"
            entry["pairs"] = [
                [a if isinstance(a, str) else index[a], index[b]] for a, b in pairs
            ]
        conns.append(entry)

    return {
        "populations": [
            {"name": p.name, "size": p.size, "core": p.core} for p in pops
        ],
        "core_params": {
            int(core): _params_dict(p) for core, p in sorted(spec.core_params.items())
        },
        "external_inputs": list(spec.external_inputs),
        "connections": conns,
    }


def network_from_dict(d: dict, source: str = "<network>") -> NetworkSpec:
    try:
        net = NetworkSpec()
        for p in d.get("populations", []):
            net.add_population(p["name"], int(p["size"]), int(p["core"]))
        for core, params in d.get("core_params", {}).items():
            net.core_params[int(core)] = NeuronParams(**params)
        for chan in d.get("external_inputs", []):
            net.add_external_input(str(chan))
        for c in d.get("connections", []):
            params = SynapseParams(c["sign"], c["speed"], c["weight"], c["tau_syn"])
            pattern = c.get("pattern", "all")
            if pattern in ("all", "one"):
                net.connect(c["pre"], c["post"], params, pattern=pattern)
            elif pattern == "pairs":
                post_ids = net.populations[c["post"]].ids
                pre = c["pre"]
                pre_ids = None if isinstance(pre, str) and pre.startswith(EXT_PREFIX) \
                    else net.populations[pre].ids
                for a, b in c["pairs"]:
                    src = a if pre_ids is None else pre_ids[a]
                    net.synapses.append(Synapse(src, post_ids[b], params))
            else:
                raise ConfigError(f"unknown pattern {pattern!r}")
        return net
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from exc


def save_network(spec: NetworkSpec, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(network_to_dict(spec), f, sort_keys=False)


def load_network(path) -> NetworkSpec:
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return network_from_dict(doc, str(path))


# -- manifests ----------------------------------------------------------------


def write_manifest(path, subcommand: str, cfg: RunConfig, notes: dict | None = None) -> None:
    """Config echo + versions; deliberately free of wall-clock timestamps
    so a re-run regenerates the identical file."""
    from . import __version__

    # out_dir is where a run landed, not what it computed; blank it so a
    # re-run into a different directory reproduces the manifest exactly.
    cfg = replace(cfg, out_dir="")
    doc = {
        "subcommand": subcommand,
        "tool": {"name": "spikevalve", "version": __version__},
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "config": cfg.to_dict(),
    }
    if notes:
        doc["notes"] = notes
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def read_manifest(path) -> tuple[str, RunConfig, dict]:
    """(subcommand, config, notes) from a manifest file."""
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict) or "config" not in doc:
        raise ConfigError(f"{path}: not a run manifest")
    cfg = _run_config_from_dict(doc["config"], str(path))
    return str(doc.get("subcommand", "")), cfg, dict(doc.get("notes", {}))
