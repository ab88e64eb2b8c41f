"""Robust crew dispatch and network reconfiguration after a distribution-grid outage."""
from .ccg import InfeasibleInstance, SolveReport, ccg_solve, solve_deterministic
from .compact import CompactModel, assemble_compact
from .decision import FirstStageDecision, ScenarioRealization
from .estimator import RestorationScheduler
from .fixtures import load_fixture, random_capped
from .grid import Scenario
from .instance import Instance, InstanceError, dump_instance, load_instance
from .oracle import OracleRefused, enumerate_oracle
from .report import build_report
from .validate import validate_schedule

__all__ = [
    "CompactModel", "FirstStageDecision", "InfeasibleInstance", "Instance", "InstanceError", "OracleRefused",
    "RestorationScheduler", "Scenario", "ScenarioRealization", "SolveReport", "assemble_compact",
    "build_report", "ccg_solve", "dump_instance", "enumerate_oracle", "load_fixture", "load_instance",
    "random_capped", "solve_deterministic", "validate_schedule",
]
__version__ = "0.1.0"
