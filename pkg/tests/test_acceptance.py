"""Acceptance gate: nine end-to-end criteria, one pass/fail line each.

Run with `pytest -v tests/test_acceptance.py`; each test is one
criterion and its verbose line is the pass/fail record.  The tests also
print an explicit `criterion N ... PASS` line on success (visible with
`-s` or in captured output on failure).
"""

import subprocess
import sys
import time
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
import yaml

from spikevalve.dataio import SmpSeries, SynthParams, generate_synthetic
from spikevalve.encoder import (
    BAND_NAMES,
    PROFILES,
    EncoderSpec,
    band_boundaries,
    calibrate_encoder,
)
from spikevalve.engine import PoissonInput, run_simulation
from spikevalve.fabric import (
    EventLog,
    MismatchModel,
    NetworkSpec,
    apply_mismatch,
    route_event,
)
from spikevalve.neuron import NeuronParams, SynapseParams, fi_curve, step_neuron, NeuronState
from spikevalve.oracle import compare_commands, hysteresis_oracle
from spikevalve.pipeline import PipelineConfig, build_pipeline_network, run_pipeline
from spikevalve.power import (
    EnergyConstants,
    duty_cycle_budget,
    estimate_energy,
    spike_cost_pj,
)
from spikevalve.statemachine import WTA_POPS, WtaSpec, build_wta, read_state

T0 = datetime(2026, 1, 1, tzinfo=timezone.utc)
CLI = [sys.executable, "-m", "spikevalve.cli"]


def report(num: int, desc: str, ok: bool) -> None:
    print(f"criterion {num} ({desc}): {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({desc}) failed"


@pytest.fixture(scope="module")
def calibs():
    return {crop: calibrate_encoder(prof, EncoderSpec()) for crop, prof in PROFILES.items()}


def series_from(values, interval=timedelta(days=1), crop=""):
    ts = tuple(T0 + k * interval for k in range(len(values)))
    return SmpSeries(ts, tuple(float(v) for v in values), interval=interval, crop=crop)


class TestCriterion1:
    def test_energy_estimator_matches_brute_force_oracle(self):
        """Bit-exact agreement with a walk-every-spike reference, < 10 s."""
        exc = SynapseParams("excitatory", "fast", 1.0, 5.0)
        rng = np.random.default_rng(42)
        t_start = time.monotonic()
        for _ in range(20):
            net = NetworkSpec()
            sizes = rng.integers(1, 12, size=4)
            for k, s in enumerate(sizes):
                net.add_population(f"p{k}", int(s), k)
                net.core_params[k] = NeuronParams()
            names = list(net.populations)
            for _ in range(int(rng.integers(1, 12))):
                net.connect(names[rng.integers(4)], names[rng.integers(4)], exc)
            n = net.n_neurons()
            k = int(rng.integers(1, 2000))
            log = EventLog(
                rng.integers(0, n, size=k).astype(np.uint32),
                np.sort(rng.integers(0, 10**7, size=k)).astype(np.uint64),
            )
            consts = EnergyConstants()
            brute = sum(
                spike_cost_pj(len(deliv), cores, consts)
                for deliv, cores in (route_event(ev, net) for ev in log)
            )
            assert estimate_energy(log, net, consts).total_pj == brute
        elapsed = time.monotonic() - t_start
        report(1, "energy estimate bit-exact vs brute force", elapsed < 10.0)


class TestCriterion2:
    def test_single_event_hand_sum(self):
        """One spike, one destination core, two targets: 9614 pJ."""
        net = NetworkSpec()
        net.add_population("a", 1, 0)
        net.add_population("b", 2, 1)
        net.core_params[0] = net.core_params[1] = NeuronParams()
        net.connect("a", "b", SynapseParams("excitatory", "fast", 1.0, 5.0))
        rep = estimate_energy(EventLog(np.array([0], np.uint32), np.array([0], np.uint64)), net)
        hand_sum = 883 + 883 + (6840 + 360) + 2 * 324
        ok = (
            hand_sum == 9614
            and spike_cost_pj(2, 1, EnergyConstants()) == 9614
            and rep.total_pj == 9614
        )
        report(2, "single-event energy equals 9614 pJ", ok)


class TestCriterion3:
    def test_duty_cycle_split_within_15_percent(self, calibs, tmp_path):
        """Per-cycle energy split vs the reference budget, assumption documented."""
        from spikevalve.cli import ACTIVE_BAND_HZ, ACTIVE_RELAY_HZ, SUSTAINED_HZ

        net = build_pipeline_network(PROFILES["apple"], PipelineConfig(), calibs["apple"])
        active = {BAND_NAMES[0]: ACTIVE_BAND_HZ, BAND_NAMES[0] + "_relay": ACTIVE_RELAY_HZ}
        resting = {"e0": SUSTAINED_HZ, "inh": SUSTAINED_HZ, "close": SUSTAINED_HZ}
        b = duty_cycle_budget(net, active, resting)
        ref = {"total": 5.97, "resting": 5.96, "active": 0.003}
        got = {
            "total": b.total_uwh,
            "resting": b.resting.total_uwh,
            "active": b.active.total_uwh,
        }
        within = all(abs(got[k] / ref[k] - 1.0) <= 0.15 for k in ref)

        # the assumption behind the split must be documented in the
        # power manifest the CLI writes
        r = subprocess.run(
            CLI + ["power", "--out", str(tmp_path)], capture_output=True, text=True
        )
        man = yaml.safe_load((tmp_path / "manifest.yaml").read_text())
        documented = r.returncode == 0 and "assumption" in man.get("notes", {})
        report(3, "duty-cycle energy split within 15%", within and documented)


class TestCriterion4:
    def test_attractor_persists_15_minutes_10_seeds(self):
        """Each minute's rate stays within +-30% of the first minute's mean."""
        t_start = time.monotonic()
        spec = WtaSpec()
        net = build_wta(spec)
        net.add_external_input("probe")
        net.connect(
            "ext:probe", "e1",
            SynapseParams("excitatory", "fast", spec.w_in, spec.tau_fast),
        )
        ids = net.populations["e1"].ids
        dur_ms = 1_000.0 + 15 * 60_000.0
        ok = True
        for seed in range(10):
            sim = apply_mismatch(net, MismatchModel(cv=0.1, seed=seed))
            log = run_simulation(
                sim, [PoissonInput("probe", 200.0, 0.0, 1000.0)], dur_ms,
                dt=1.0, seed=seed, record={"e1"},
            )
            ref = log.rate_hz(ids, 1_000_000, 61_000_000)  # first minute
            assert ref > 0
            for m in range(15):
                t0 = 1_000_000 + m * 60_000_000
                r = log.rate_hz(ids, t0, t0 + 60_000_000)
                if abs(r / ref - 1.0) > 0.30:
                    ok = False
        elapsed = time.monotonic() - t_start
        report(4, "15-min attractor persistence, 10 seeds", ok and elapsed < 300.0)


class TestCriterion5:
    def test_wta_exclusivity_on_staircase(self, calibs):
        """At most one state active per settled window; 10 seeds per crop."""
        stair = {
            "apple": [-40, -45, -52, -55, -58, -62, -66, -70, -74, -70, -60, -55, -48, -44, -40],
            "kiwi": [-3, -5, -7, -9, -11, -13, -15, -17, -15, -11, -8, -6, -4, -3, -2],
        }
        for crop, vals in stair.items():
            prof = PROFILES[crop]
            series = series_from(vals, crop=crop)
            for seed in range(10):
                cfg = PipelineConfig(dt=0.5, seed=seed, cv=0.1)
                res = run_pipeline(series, prof, cfg, calib=calibs[crop])
                pops = {n: res.net.populations[n].ids for n in WTA_POPS}
                for k in range(len(vals)):
                    t1 = (k + 1) * res.cycle_us
                    # read_state raises ExclusivityViolation on a tie
                    read_state(res.log, pops, t1 - 200_000, t1)
        report(5, "WTA exclusivity staircase, 10 seeds/crop", True)


class TestCriterion6:
    def test_closed_loop_traces_match_oracle(self, calibs):
        """20 synthetic closed-loop traces per crop; >=95% of oracle
        commands matched within +-1 interval; strict alternation."""
        ok = True
        for crop, prof in PROFILES.items():
            total = within1 = 0
            for seed in range(20):
                series = generate_synthetic(
                    SynthParams(seed=seed, days=30, samples_per_day=1), prof
                )
                oracle = hysteresis_oracle(series.values_kpa, prof)
                res = run_pipeline(
                    series, prof, PipelineConfig(dt=0.5, seed=seed, cv=0.1),
                    calib=calibs[crop],
                )
                acts = [c.action for c in res.commands]
                if any(a == b for a, b in zip(acts, acts[1:])):
                    ok = False  # alternation violated
                rep = compare_commands(oracle, res.commands, res.cycle_us)
                total += rep.oracle_count
                within1 += sum(1 for l in rep.latencies if abs(l) <= 1)
            print(f"  {crop}: {within1}/{total} within +-1 interval")
            if total == 0 or within1 / total < 0.95:
                ok = False
        report(6, "closed-loop command match >=95% within +-1", ok)


class TestCriterion7:
    def test_deadband_traces_produce_no_commands(self, calibs):
        """Traces confined to (th_on, th_off): zero commands, both sides."""
        ok = True
        for crop, prof in PROFILES.items():
            lo, hi = prof.th_on, prof.th_off
            for seed in range(10):
                rng = np.random.default_rng(1000 + seed)
                vals = rng.uniform(lo + 0.1, hi - 0.1, size=12)
                series = series_from(vals, crop=crop)
                assert hysteresis_oracle(series.values_kpa, prof) == []
                res = run_pipeline(
                    series, prof, PipelineConfig(dt=0.5, seed=seed, cv=0.1),
                    calib=calibs[crop],
                )
                if res.commands:
                    print(f"  {crop} seed {seed}: spurious {res.commands}")
                    ok = False
        report(7, "deadband-confined traces are silent", ok)


class TestCriterion8:
    def test_fixed_point_and_dt_convergence(self):
        """Sub-threshold fixed point to 0.1% at dt=tau/100; FI stable to
        2% under dt halving."""
        p = NeuronParams(tau=10.0, i_a=0.5, i_tau=1.0, i_spike_threshold=5.0)
        dt = p.tau / 100.0
        state = NeuronState()
        for k in range(int(50 * p.tau / dt)):  # 50 tau: fully settled
            state, spike = step_neuron(state, p, 1.0, k * int(dt * 1000), dt)
            assert spike is None
        fp_ok = abs(state.i_mem / p.fixed_point(1.0) - 1.0) < 1e-3

        q = NeuronParams(tau=10.0)
        coarse = fi_curve(q, (0.0, 3.0), 7, window=2000.0, dt=0.1)
        fine = fi_curve(q, (0.0, 3.0), 7, window=2000.0, dt=0.05)
        fi_ok = True
        for (_, rc), (_, rf) in zip(coarse, fine):
            if rf == 0.0:
                fi_ok = fi_ok and rc == 0.0
            elif abs(rc / rf - 1.0) > 0.02:
                fi_ok = False
        report(8, "fixed point 0.1% and FI dt-convergence 2%", fp_ok and fi_ok)


class TestCriterion9:
    def test_manifest_rerun_is_byte_identical(self, tmp_path):
        """synth + simulate re-run from their manifests regenerate every
        output file (CSVs, binaries, figures) byte-for-byte."""
        cfg = tmp_path / "run.yaml"
        cfg.write_text("crop: kiwi\nseed: 2\nsynth:\n  days: 10\n  samples_per_day: 1\n")

        def run(*args):
            r = subprocess.run(CLI + list(args), capture_output=True, text=True)
            assert r.returncode == 0, r.stderr

        synth1, synth2 = tmp_path / "s1", tmp_path / "s2"
        run("synth", "--config", str(cfg), "--out", str(synth1))
        run("synth", "--config", str(synth1 / "manifest.yaml"), "--out", str(synth2))

        sim1, sim2 = tmp_path / "r1", tmp_path / "r2"
        run("simulate", "--config", str(synth1 / "manifest.yaml"),
            "--input", str(synth1 / "trace.csv"), "--out", str(sim1))
        run("simulate", "--config", str(sim1 / "manifest.yaml"),
            "--input", str(synth1 / "trace.csv"), "--out", str(sim2))

        ok = True
        for a, b in ((synth1, synth2), (sim1, sim2)):
            names = sorted(p.name for p in a.iterdir())
            if names != sorted(p.name for p in b.iterdir()):
                ok = False
                continue
            for name in names:
                if (a / name).read_bytes() != (b / name).read_bytes():
                    print(f"  differs: {name}")
                    ok = False
        report(9, "manifest re-run byte-identical", ok)
