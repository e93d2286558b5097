"""Static CFI policies: per-callsite legitimate calltarget sets.

Each policy maps a callsite to the set of functions it may reach. Targets are
function references (``Class::name``). Pure virtual members never appear as
targets since no call can land on them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable

from .model import Callsite, Member, ProgramModel, is_pointer
from .subobjects import class_sub_hierarchy, resolve_dispatch_member
from .vtables import VTable, VTableHierarchy, build_vtables, min_vtable_path, primary_descent

BIN_TYPES = "bin-types"
SAFE_SRC_TYPES = "safe-src-types"
SRC_TYPES = "src-types"
STRICT_SRC_TYPES = "strict-src-types"
ALL_VTABLES = "all-vtables"
VTABLE_HIERARCHY = "vtable-hierarchy"
SUB_HIERARCHY = "sub-hierarchy"
STRICT_SUB_HIERARCHY = "strict-sub-hierarchy"

POLICIES = (
    BIN_TYPES,
    SAFE_SRC_TYPES,
    SRC_TYPES,
    STRICT_SRC_TYPES,
    ALL_VTABLES,
    VTABLE_HIERARCHY,
    SUB_HIERARCHY,
    STRICT_SUB_HIERARCHY,
)
VIRTUAL_ONLY = frozenset(POLICIES[3:])
# Policies whose targets may include non-virtual functions.
ANY_TARGET = frozenset(POLICIES[:3])

# Not one of the eight ranked policies; backs presets 4 and 5.
MIN_VTABLE_PATH = "min-vtable-path"

MAX_REGISTER_PARAMS = 6


class UnknownPolicyError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyFilter:
    virtual_targets_only: bool = False
    gadget_targets_only: bool = False
    max_params: int | None = None
    whole_hierarchy: bool = False

    def admits(self, m: Member) -> bool:
        if self.virtual_targets_only and not m.is_virtual:
            return False
        if self.gadget_targets_only and not m.gadgets:
            return False
        if self.max_params is not None and m.param_count > self.max_params:
            return False
        return True

    @property
    def is_vacuous(self) -> bool:
        return self == PolicyFilter()


NO_FILTER = PolicyFilter()


@dataclass(frozen=True)
class TargetSet:
    callsite_id: str
    policy: str
    targets: frozenset[str]
    baseline_all: int
    baseline_virtual: int
    skipped: bool = False

    @property
    def count(self) -> int:
        return len(self.targets)


@dataclass
class Analysis:
    """A model together with the structures every policy needs."""

    model: ProgramModel
    vtables: VTableHierarchy

    @classmethod
    def of(cls, model: ProgramModel) -> "Analysis":
        model.require_valid()
        return cls(model, build_vtables(model.hierarchy))

    @property
    def baseline_all(self) -> int:
        return len(self.model.functions)

    @property
    def baseline_virtual(self) -> int:
        return sum(1 for m in self.model.functions if m.is_virtual)

    def callable_functions(self) -> list[Member]:
        return [m for m in self.model.functions if not m.is_pure]

    def dispatch(self, cs: Callsite) -> tuple[VTable, int, tuple]:
        """Table, slot index and slot identity a virtual callsite dispatches through."""
        h = self.model.hierarchy
        m = resolve_dispatch_member(h, cs)
        anc = h.ancestors
        tables = self.vtables.by_class[cs.static_receiver_type]
        fallback = None
        for t in tables:
            for e in t.entries:
                if e.key != m.override_key:
                    continue
                if m.owning_class in anc[e.resolved_member.owning_class]:
                    return t, e.index, e.slot
                if fallback is None:
                    fallback = (t, e.index, e.slot)
        if fallback is None:
            raise LookupError(f"no vtable slot for {cs.member_name} in {cs.static_receiver_type}")
        return fallback


def _refs(a: Analysis, members: Iterable[Member]) -> frozenset[str]:
    return frozenset(a.model.ref(m) for m in members if not m.is_pure)


def targets_bin_types(a: Analysis, cs: Callsite) -> frozenset[str]:
    n = cs.arg_count
    out = []
    for m in a.callable_functions():
        if m.param_count > n or m.param_count > MAX_REGISTER_PARAMS:
            continue
        if cs.return_used and m.signature.is_void_return:
            continue
        out.append(m)
    return _refs(a, out)


def _types_match(provided: tuple[str, ...], wanted: tuple[str, ...], loose_pointers: bool) -> bool:
    if len(provided) != len(wanted):
        return False
    for p, w in zip(provided, wanted):
        if p == w:
            continue
        if loose_pointers and is_pointer(p) and is_pointer(w):
            continue
        return False
    return True


def targets_safe_src_types(a: Analysis, cs: Callsite) -> frozenset[str]:
    return _refs(
        a,
        (m for m in a.callable_functions()
         if m.param_count == cs.arg_count and _types_match(cs.provided_arg_types, m.param_types, True)),
    )


def targets_src_types(a: Analysis, cs: Callsite) -> frozenset[str]:
    return _refs(
        a,
        (m for m in a.callable_functions()
         if m.param_count == cs.arg_count and _types_match(cs.provided_arg_types, m.param_types, False)),
    )


def targets_strict_src_types(a: Analysis, cs: Callsite) -> frozenset[str]:
    name = cs.member_name
    if name.startswith("~"):
        # Destructor names carry the class; any destructor matches.
        return _refs(a, (m for m in a.callable_functions() if m.is_virtual and m.is_destructor))
    return _refs(
        a,
        (m for m in a.callable_functions()
         if m.is_virtual and m.name == name and m.param_types == cs.provided_arg_types),
    )


def targets_all_vtables(a: Analysis, cs: Callsite) -> frozenset[str]:
    return _refs(a, a.vtables.members())


def targets_vtable_hierarchy(a: Analysis, cs: Callsite) -> frozenset[str]:
    table, index, _ = a.dispatch(cs)
    island = a.vtables.islands[a.vtables.island_of[table.id]]
    out = []
    for t in a.vtables:
        if t.id in island and index < len(t.entries):
            out.append(t.entries[index].resolved_member)
    return _refs(a, out)


def targets_sub_hierarchy(a: Analysis, cs: Callsite) -> frozenset[str]:
    _, _, slot = a.dispatch(cs)
    sub = class_sub_hierarchy(a.model.hierarchy, cs.static_receiver_type)
    out = []
    for c in sub:
        for t in a.vtables.by_class.get(c.name, []):
            e = t.entry_for(slot)
            if e is not None:
                out.append(e.resolved_member)
    return _refs(a, out)


def targets_strict_sub_hierarchy(a: Analysis, cs: Callsite) -> frozenset[str]:
    table, _, slot = a.dispatch(cs)
    out = []
    for t in primary_descent(a.vtables, table):
        e = t.entry_for(slot)
        if e is not None:
            out.append(e.resolved_member)
    return _refs(a, out)


def targets_min_vtable_path(a: Analysis, cs: Callsite) -> frozenset[str]:
    """Slot entries along the longest table path below the receiver."""
    _, _, slot = a.dispatch(cs)
    out = []
    for cls in min_vtable_path(a.vtables, cs.static_receiver_type):
        for t in a.vtables.by_class[cls]:
            e = t.entry_for(slot)
            if e is not None:
                out.append(e.resolved_member)
    return _refs(a, out)


POLICY_FUNCTIONS: dict[str, Callable[[Analysis, Callsite], frozenset[str]]] = {
    BIN_TYPES: targets_bin_types,
    SAFE_SRC_TYPES: targets_safe_src_types,
    SRC_TYPES: targets_src_types,
    STRICT_SRC_TYPES: targets_strict_src_types,
    ALL_VTABLES: targets_all_vtables,
    VTABLE_HIERARCHY: targets_vtable_hierarchy,
    SUB_HIERARCHY: targets_sub_hierarchy,
    STRICT_SUB_HIERARCHY: targets_strict_sub_hierarchy,
    MIN_VTABLE_PATH: targets_min_vtable_path,
}


def check_policy(policy: str) -> str:
    if policy not in POLICY_FUNCTIONS:
        raise UnknownPolicyError(
            f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}"
        )
    return policy


def applies(policy: str, cs: Callsite) -> bool:
    return cs.is_virtual_dispatch or policy in ANY_TARGET


def target_set(a: Analysis, policy: str, cs: Callsite, filt: PolicyFilter = NO_FILTER) -> TargetSet:
    check_policy(policy)
    if not applies(policy, cs):
        return TargetSet(cs.id, policy, frozenset(), a.baseline_all, a.baseline_virtual, True)
    if filt.whole_hierarchy:
        pool = [m for c in a.model.hierarchy for m in c.members if not m.is_pure]
        targets = frozenset(a.model.ref(m) for m in pool if filt.admits(m))
    else:
        targets = POLICY_FUNCTIONS[policy](a, cs)
        if not filt.is_vacuous:
            targets = frozenset(t for t in targets if filt.admits(a.model.function(t)))
    return TargetSet(cs.id, policy, targets, a.baseline_all, a.baseline_virtual)


def _threads() -> int | None:
    raw = os.environ.get("RECKON_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


def assess(
    model: ProgramModel | Analysis, policy: str, filt: PolicyFilter = NO_FILTER
) -> list[TargetSet]:
    """Target sets for every callsite, in declaration order.

    Callsites a policy does not cover come back flagged ``skipped``.
    """
    a = model if isinstance(model, Analysis) else Analysis.of(model)
    check_policy(policy)
    return [target_set(a, policy, cs, filt) for cs in a.model.callsites]


def assess_all(
    model: ProgramModel | Analysis,
    policies: Iterable[str] = POLICIES,
    filt: PolicyFilter = NO_FILTER,
) -> dict[str, list[TargetSet]]:
    """Run several policies; ``RECKON_THREADS`` caps the worker count."""
    a = model if isinstance(model, Analysis) else Analysis.of(model)
    policies = [check_policy(p) for p in policies]
    workers = _threads()
    if workers == 1 or len(policies) < 2:
        return {p: assess(a, p, filt) for p in policies}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: assess(a, p, filt), policies))
    return dict(zip(policies, results))


# Numbered presets combining a policy with a filter.
ICFI_PRESETS: dict[int, tuple[str, PolicyFilter]] = {
    1: (SUB_HIERARCHY, PolicyFilter()),
    2: (SUB_HIERARCHY, PolicyFilter(virtual_targets_only=True)),
    3: (SUB_HIERARCHY, PolicyFilter(virtual_targets_only=True, gadget_targets_only=True)),
    4: (MIN_VTABLE_PATH, PolicyFilter(virtual_targets_only=True)),
    5: (MIN_VTABLE_PATH, PolicyFilter(virtual_targets_only=True, gadget_targets_only=True)),
    6: (SUB_HIERARCHY, PolicyFilter(virtual_targets_only=True, max_params=6)),
    7: (SUB_HIERARCHY, PolicyFilter(virtual_targets_only=True, gadget_targets_only=True, max_params=6)),
    8: (SUB_HIERARCHY, PolicyFilter(max_params=6)),
    9: (SUB_HIERARCHY, PolicyFilter(gadget_targets_only=True, max_params=6)),
    10: (SUB_HIERARCHY, PolicyFilter(max_params=6, whole_hierarchy=True)),
    11: (SUB_HIERARCHY, PolicyFilter(gadget_targets_only=True, max_params=6, whole_hierarchy=True)),
}
