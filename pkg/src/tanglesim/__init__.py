"""tanglesim: deterministic simulator of a DAG-based ledger network with
reputation-fair scheduling, drop-head buffering and a past-cone
confirmation-time tip-admission filter.
"""

__version__ = "0.1.0"

from .config import ScenarioConfig, load_config, preset
from .dag import AdmitResult, AttachResult, Block, LedgerView, make_genesis
from .engine import Simulation, build_topology, run_monte_carlo, run_simulation, sample_reputations
from .metrics import MetricsRecorder, RunResult
from .node import DrrScheduler, Inbox, Node, NodeMode, RateSetter, ReputationVector, guaranteed_rate
from .tips import TipPool

__all__ = [
    "AdmitResult", "AttachResult", "Block", "DrrScheduler", "Inbox",
    "LedgerView", "MetricsRecorder", "Node", "NodeMode", "RateSetter",
    "ReputationVector", "RunResult", "ScenarioConfig", "Simulation", "TipPool",
    "build_topology", "guaranteed_rate", "load_config", "make_genesis",
    "preset", "run_monte_carlo", "run_simulation", "sample_reputations",
    "__version__",
]
