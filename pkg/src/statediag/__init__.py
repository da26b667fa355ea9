"""Specification-driven instrumentation, trace checking and diagnosis for
MiniProc programs."""

__version__ = "0.1.0"

from .diagnose import Diagnosis, compute_map, get_falsifying_atomic_constraints
from .estimator import Diagnoser
from .instrument import InstrumentationPlan, MultiplicityMultiset, build_plan, s_traversal
from .miniproc import SystemOfProcedures, parse_program, pretty_print
from .monitor import check
from .runtime import execute, filter_trace, read_trace, write_trace
from .scfg import build_scfg, export_dot
from .specs import Specification, parse_spec

__all__ = [
    "Diagnoser",
    "Diagnosis",
    "InstrumentationPlan",
    "MultiplicityMultiset",
    "Specification",
    "SystemOfProcedures",
    "build_plan",
    "build_scfg",
    "check",
    "compute_map",
    "execute",
    "export_dot",
    "filter_trace",
    "get_falsifying_atomic_constraints",
    "parse_program",
    "parse_spec",
    "pretty_print",
    "read_trace",
    "s_traversal",
    "write_trace",
]
