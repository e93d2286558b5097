"""Static assessment of CFI policies over a declarative C++ program model."""

from .metrics import AggregateStats, MetricsReport, ctr, normalize, rank_policies, rtr
from .model import (
    Callsite,
    ClassDef,
    ClassHierarchy,
    FunctionSignature,
    Member,
    ProgramModel,
    Violation,
    all_functions,
    all_virtual_functions,
    derived_closure,
    validate,
)
from .modelio import SyntheticSpec, generate_synthetic, load_fixture, load_model, read_model, save_model
from .policies import POLICIES, Analysis, PolicyFilter, TargetSet, assess, assess_all
from .vtables import build_vtables

__all__ = [
    "AggregateStats", "Analysis", "Callsite", "ClassDef", "ClassHierarchy", "FunctionSignature",
    "Member", "MetricsReport", "POLICIES", "PolicyFilter", "ProgramModel", "SyntheticSpec",
    "TargetSet", "Violation", "all_functions", "all_virtual_functions", "assess", "assess_all",
    "build_vtables", "ctr", "derived_closure", "generate_synthetic", "load_fixture", "load_model",
    "normalize", "rank_policies", "read_model", "rtr", "save_model", "validate",
]
