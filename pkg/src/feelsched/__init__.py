"""Federated edge learning over fading channels with overlapped communication/computation
and channel-aware fair uplink scheduling (MRTP, A-MRTP, OF-MRTP)."""

from .channel import RadioGeometry, long_term_avg_rate, path_loss
from .compute import ComputeProfile
from .engine import Population, RoundOutcome, RoundSnapshot, build_round_snapshot, run_round
from .experiment import ExperimentConfig, emit_outputs, load_config, run_experiment
from .scheduling import FairnessState, PolicyParams, get_policy, update_ages

__version__ = "0.1.0"
