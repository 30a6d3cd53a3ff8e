"""Event-driven spiking-fabric simulator for autonomous irrigation control."""

from .neuron import NeuronParams, NeuronState, SynapseParams, SynapseState
from .fabric import (
    EventLog,
    FabricLimits,
    MismatchModel,
    NetworkSpec,
    SpikeEvent,
    apply_mismatch,
    route_event,
    validate_network,
)
from .engine import ConstantCurrent, PoissonInput, RegularInput, run_simulation
from .encoder import APPLE, KIWI, CropProfile, EncoderSpec, calibrate_encoder, rescale_smp
from .statemachine import Command, ReadoutSpec, WtaSpec
from .power import EnergyConstants, EnergyReport, duty_cycle_budget, estimate_energy
from .dataio import SmpSeries, SynthParams, generate_synthetic, load_csv, save_csv, subsample
from .oracle import EvalReport, compare_commands, hysteresis_oracle

__version__ = "0.1.0"
