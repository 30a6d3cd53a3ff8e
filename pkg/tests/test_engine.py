"""Simulation engine: determinism, delivery semantics, stimuli, guards."""

import numpy as np
import pytest

from spikevalve.engine import (
    CompiledNetwork,
    ConstantCurrent,
    PoissonInput,
    RegularInput,
    run_simulation,
)
from spikevalve.fabric import FabricLimits, NetworkSpec
from spikevalve.neuron import DivergenceError, NeuronParams, SynapseParams

from test_neuron import analytic_rate_hz


def one_neuron(params=None) -> NetworkSpec:
    net = NetworkSpec()
    net.add_population("n", 1, 0)
    net.core_params[0] = params or NeuronParams()
    return net


class TestDynamics:
    def test_constant_drive_matches_analytic_rate(self):
        p = NeuronParams(tau=10.0, refractory=5.0)
        net = one_neuron(p)
        log = run_simulation(
            net, [ConstantCurrent("n", 3.0, 0.0, 2000.0)], 2000.0, dt=0.05
        )
        rate = len(log) / 2.0  # spikes per second over 2 s
        assert rate == pytest.approx(analytic_rate_hz(p, 3.0), rel=0.03)

    def test_no_drive_no_spikes(self):
        log = run_simulation(one_neuron(), [], 500.0, dt=0.1)
        assert len(log) == 0

    def test_one_step_axonal_delay(self):
        # driver spikes at t; with a strong synapse the follower cannot
        # spike earlier than one dt later
        net = NetworkSpec()
        net.add_population("drv", 1, 0)
        net.add_population("fol", 1, 0)
        net.core_params[0] = NeuronParams(tau=5.0)
        net.connect("drv", "fol", SynapseParams("excitatory", "fast", 100.0, 5.0))
        log = run_simulation(net, [ConstantCurrent("drv", 50.0, 0.0, 100.0)], 100.0, dt=0.5)
        t_drv = min(int(t) for n, t in zip(log.neurons, log.times) if n == 0)
        t_fol = min(int(t) for n, t in zip(log.neurons, log.times) if n == 1)
        assert t_fol >= t_drv + 500

    def test_inhibition_lowers_rate(self):
        def rate(sign):
            net = NetworkSpec()
            net.add_population("a", 1, 0)
            net.add_population("b", 1, 0)
            net.core_params[0] = NeuronParams(tau=10.0)
            net.connect("a", "b", SynapseParams(sign, "fast", 0.5, 5.0))
            log = run_simulation(
                net,
                [ConstantCurrent("a", 5.0, 0.0, 1000.0), ConstantCurrent("b", 2.0, 0.0, 1000.0)],
                1000.0,
                dt=0.1,
            )
            return sum(1 for n in log.neurons if n == 1)

        assert rate("inhibitory") < rate("excitatory")

    def test_divergence_names_population(self):
        p = NeuronParams(i_a=2.0, i_tau=1.0, i_spike_threshold=1e12)
        net = one_neuron(p)
        with pytest.raises(DivergenceError, match="n"):
            run_simulation(net, [ConstantCurrent("n", 1.0, 0.0, 5000.0)], 5000.0, dt=1.0)


class TestDeterminism:
    def probe_net(self):
        net = NetworkSpec()
        net.add_population("n", 4, 0)
        net.core_params[0] = NeuronParams(tau=10.0)
        net.add_external_input("in")
        net.connect("ext:in", "n", SynapseParams("excitatory", "fast", 0.8, 5.0))
        return net

    def test_same_seed_identical(self):
        net = self.probe_net()
        stim = [PoissonInput("in", 200.0, 0.0, 1000.0)]
        a = run_simulation(net, stim, 1000.0, dt=0.5, seed=11)
        b = run_simulation(net, stim, 1000.0, dt=0.5, seed=11)
        assert np.array_equal(a.neurons, b.neurons)
        assert np.array_equal(a.times, b.times)

    def test_different_seed_differs(self):
        net = self.probe_net()
        stim = [PoissonInput("in", 200.0, 0.0, 1000.0)]
        a = run_simulation(net, stim, 1000.0, dt=0.5, seed=1)
        b = run_simulation(net, stim, 1000.0, dt=0.5, seed=2)
        assert len(a) != len(b) or not np.array_equal(a.times, b.times)

    def test_poisson_rate_approximate(self):
        net = self.probe_net()
        log = run_simulation(
            net, [PoissonInput("in", 300.0, 0.0, 4000.0)], 4000.0, dt=0.5, seed=0
        )
        assert len(log) > 0

    def test_regular_input_even_spacing(self):
        net = self.probe_net()
        a = run_simulation(net, [RegularInput("in", 100.0, 0.0, 1000.0)], 1000.0, dt=0.5, seed=3)
        b = run_simulation(net, [RegularInput("in", 100.0, 0.0, 1000.0)], 1000.0, dt=0.5, seed=4)
        # regular trains ignore the seed entirely
        assert np.array_equal(a.times, b.times)


class TestInterface:
    def test_record_filter(self):
        net = NetworkSpec()
        net.add_population("a", 1, 0)
        net.add_population("b", 1, 0)
        net.core_params[0] = NeuronParams(tau=5.0)
        stim = [ConstantCurrent("a", 10.0, 0.0, 200.0), ConstantCurrent("b", 10.0, 0.0, 200.0)]
        full = run_simulation(net, stim, 200.0, dt=0.5)
        only_a = run_simulation(net, stim, 200.0, dt=0.5, record={"a"})
        assert set(only_a.neurons) == {0}
        assert len(only_a) == sum(1 for n in full.neurons if n == 0)

    def test_validates_against_limits(self):
        net = one_neuron()
        limits = FabricLimits(n_cores=4, neurons_per_core=256)
        bad = NetworkSpec()
        bad.add_population("x", 1, 9)
        with pytest.raises(ValueError, match="fabric"):
            run_simulation(bad, [], 10.0, limits=limits)
        run_simulation(net, [], 10.0, limits=limits)  # clean spec passes

    def test_unknown_external_channel(self):
        net = one_neuron()
        with pytest.raises(ValueError):
            run_simulation(net, [PoissonInput("ghost", 10.0, 0.0, 10.0)], 10.0)

    def test_negative_amplitude_rejected(self):
        with pytest.raises(ValueError):
            run_simulation(one_neuron(), [ConstantCurrent("n", -1.0, 0.0, 10.0)], 10.0)

    def test_bad_duration_and_dt(self):
        with pytest.raises(ValueError):
            run_simulation(one_neuron(), [], 0.0)
        with pytest.raises(ValueError):
            CompiledNetwork(one_neuron(), dt=0.0004)  # below 1 us resolution
        with pytest.raises(ValueError):
            CompiledNetwork(one_neuron(), dt=-1.0)

    def test_channel_sharing(self):
        # synapses with equal (post, tau, sign) share one filter state
        net = NetworkSpec()
        net.add_population("a", 10, 0)
        net.add_population("b", 1, 0)
        net.core_params[0] = NeuronParams()
        net.connect("a", "b", SynapseParams("excitatory", "fast", 0.1, 5.0))
        compiled = CompiledNetwork(net, dt=0.5)
        assert compiled.n_channels == 1
