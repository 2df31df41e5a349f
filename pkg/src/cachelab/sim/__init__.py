"""Trace-driven cache simulation."""

from .engine import SimReport, TtlFlag, TtlKind, run_codes, simulate, upload_ratio
from .policies import Kind, PolicyConfig, ScoreSpec
from .stack import hrc_sweep_stack, stack_depths

__all__ = [
    "Kind",
    "PolicyConfig",
    "ScoreSpec",
    "SimReport",
    "TtlFlag",
    "TtlKind",
    "hrc_sweep_stack",
    "run_codes",
    "simulate",
    "stack_depths",
    "upload_ratio",
]
