"""Energy accounting: brute-force oracle, hand sums, linearity, units."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikevalve.fabric import EventLog, NetworkSpec, route_event
from spikevalve.neuron import NeuronParams, SynapseParams
from spikevalve.power import (
    PJ_PER_UWH,
    EnergyConstants,
    duty_cycle_budget,
    estimate_energy,
    spike_cost_pj,
    uwh_from_pj,
)

EXC = SynapseParams("excitatory", "fast", 1.0, 5.0)


def brute_force_pj(log: EventLog, spec: NetworkSpec, consts: EnergyConstants) -> int:
    """Reference: walk every spike, route it, sum its cost."""
    total = 0
    for ev in log:
        deliveries, cores = route_event(ev, spec)
        total += spike_cost_pj(len(deliveries), cores, consts)
    return total


def random_net(rng) -> NetworkSpec:
    net = NetworkSpec()
    sizes = rng.integers(1, 6, size=4)
    for k, s in enumerate(sizes):
        net.add_population(f"p{k}", int(s), k)
        net.core_params[k] = NeuronParams()
    names = list(net.populations)
    for _ in range(rng.integers(1, 8)):
        net.connect(names[rng.integers(4)], names[rng.integers(4)], EXC)
    return net


class TestSpikeCost:
    def test_single_event_hand_sum(self):
        # 1 destination core, 2 postsynaptic targets:
        # 883 + 883 + 1*(6840+360) + 2*324 = 9614 pJ
        assert spike_cost_pj(2, 1, EnergyConstants()) == 9614

    def test_isolated_spike(self):
        # no targets at all: generation + encoding only
        assert spike_cost_pj(0, 0, EnergyConstants()) == 883 + 883

    def test_constants_validation(self):
        with pytest.raises(ValueError):
            EnergyConstants(e_spike=-1)


class TestEstimate:
    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            net = random_net(rng)
            n = net.n_neurons()
            k = int(rng.integers(1, 200))
            ns = rng.integers(0, n, size=k).astype(np.uint32)
            ts = np.sort(rng.integers(0, 10**6, size=k)).astype(np.uint64)
            log = EventLog(ns, ts)
            rep = estimate_energy(log, net)
            assert rep.total_pj == brute_force_pj(log, net, EnergyConstants())

    def test_population_breakdown_sums_to_total(self):
        net = random_net(np.random.default_rng(1))
        n = net.n_neurons()
        log = EventLog(np.arange(n, dtype=np.uint32), np.zeros(n, np.uint64))
        rep = estimate_energy(log, net)
        assert sum(rep.per_population_pj.values()) == rep.total_pj

    def test_linearity_in_spike_count(self):
        net = NetworkSpec()
        net.add_population("a", 1, 0)
        net.add_population("b", 2, 1)
        net.core_params[0] = net.core_params[1] = NeuronParams()
        net.connect("a", "b", EXC)
        one = estimate_energy(EventLog(np.array([0]), np.array([0])), net)
        five = estimate_energy(
            EventLog(np.zeros(5, np.uint32), np.arange(5, dtype=np.uint64)), net
        )
        assert one.total_pj == 9614
        assert five.total_pj == 5 * 9614

    def test_empty_log(self):
        net = random_net(np.random.default_rng(2))
        rep = estimate_energy(EventLog.empty(), net)
        assert rep.total_pj == 0 and rep.spike_count == 0

    def test_unknown_neuron_in_log(self):
        net = NetworkSpec()
        net.add_population("a", 2, 0)
        net.core_params[0] = NeuronParams()
        with pytest.raises(KeyError):
            estimate_energy(EventLog(np.array([5]), np.array([0])), net)

    def test_external_synapses_cost_nothing(self):
        net = NetworkSpec()
        net.add_population("a", 1, 0)
        net.core_params[0] = NeuronParams()
        net.add_external_input("in")
        net.connect("ext:in", "a", EXC)
        rep = estimate_energy(EventLog(np.array([0]), np.array([0])), net)
        assert rep.total_pj == 883 + 883  # no internal targets

    def test_csv_report(self, tmp_path):
        net = random_net(np.random.default_rng(3))
        n = net.n_neurons()
        log = EventLog(np.arange(n, dtype=np.uint32), np.zeros(n, np.uint64))
        rep = estimate_energy(log, net)
        p = tmp_path / "energy.csv"
        rep.to_csv(p)
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "population,energy_pj,energy_uwh"
        assert lines[-1].startswith("TOTAL,")
        assert int(lines[-1].split(",")[1]) == rep.total_pj


class TestUnits:
    def test_uwh_conversion(self):
        assert PJ_PER_UWH == 3.6e9
        assert uwh_from_pj(3.6e9) == pytest.approx(1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**15))
    def test_uwh_round_trip(self, pj):
        assert uwh_from_pj(pj) * PJ_PER_UWH == pytest.approx(pj, rel=1e-12)


class TestDutyCycle:
    def net(self):
        net = NetworkSpec()
        net.add_population("state", 4, 0)
        net.add_population("enc", 4, 1)
        net.core_params[0] = net.core_params[1] = NeuronParams()
        net.connect("state", "state", EXC)
        return net

    def test_resting_dominates_at_low_duty(self):
        b = duty_cycle_budget(
            self.net(),
            active_rates_hz={"enc": 100.0},
            resting_rates_hz={"state": 50.0},
            active_ms=200.0,
            cycle_min=15.0,
        )
        assert b.resting.total_pj > 100 * b.active.total_pj
        assert b.total_pj == b.active.total_pj + b.resting.total_pj

    def test_spike_counts_round_to_whole_events(self):
        b = duty_cycle_budget(
            self.net(),
            active_rates_hz={"enc": 10.0},  # 10 Hz * 0.2 s = 2 spikes/neuron
            resting_rates_hz={},
            active_ms=200.0,
            cycle_min=15.0,
        )
        assert b.active.spike_count == 2 * 4
        assert b.resting.total_pj == 0

    def test_active_window_cannot_exceed_cycle(self):
        with pytest.raises(ValueError):
            duty_cycle_budget(self.net(), {}, {}, active_ms=16 * 60 * 1000.0, cycle_min=15.0)
