"""Core program model: classes, members, signatures, callsites.

A :class:`ProgramModel` is the whole analyzed program. Everything here is
immutable; derived relations are cached on first use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator

import networkx as nx

GADGET_KINDS = (
    "ML-G",
    "ARITH-G",
    "W-G",
    "R-G",
    "INV-G",
    "W-COND-G",
    "ML-ARG-G",
    "W-SA-G",
    "MOVE-SP-G",
    "LOAD-R64-G",
)

VIRTUAL_DISPATCH = "virtual-dispatch"
FUNCTION_POINTER = "function-pointer"
CALLSITE_KINDS = (VIRTUAL_DISPATCH, FUNCTION_POINTER)


class InvalidModelError(ValueError):
    """Raised when an operation needs a validated model and gets a broken one."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations[:5])
        super().__init__(f"model has {len(violations)} violation(s): {lines}")


def is_pointer(type_name: str) -> bool:
    return type_name.endswith("*")


@dataclass(frozen=True)
class FunctionSignature:
    param_types: tuple[str, ...] = ()
    return_type: str = "void"
    # Only differs from len(param_types) in deliberately broken inputs.
    declared_param_count: int | None = None

    @property
    def param_count(self) -> int:
        if self.declared_param_count is None:
            return len(self.param_types)
        return self.declared_param_count

    @property
    def is_void_return(self) -> bool:
        return self.return_type == "void"


@dataclass(frozen=True)
class GadgetAnnotation:
    kind: str
    start_address: int | None = None
    usable: bool = True


@dataclass(frozen=True)
class Member:
    owning_class: str
    name: str
    signature: FunctionSignature = field(default_factory=FunctionSignature)
    is_virtual: bool = False
    is_pure: bool = False
    gadgets: tuple[GadgetAnnotation, ...] = ()

    @property
    def gadget_kinds(self) -> frozenset[str]:
        return frozenset(g.kind for g in self.gadgets)

    @property
    def param_types(self) -> tuple[str, ...]:
        return self.signature.param_types

    @property
    def param_count(self) -> int:
        return self.signature.param_count

    @property
    def is_destructor(self) -> bool:
        return self.name.startswith("~")

    @property
    def override_key(self) -> tuple:
        """Identity used for overriding: all destructors share one slot."""
        if self.is_destructor:
            return ("~",)
        return (self.name, self.param_types)


@dataclass(frozen=True)
class ClassDef:
    name: str
    shared_bases: tuple[str, ...] = ()
    replicated_bases: tuple[str, ...] = ()
    members: tuple[Member, ...] = ()

    @property
    def bases(self) -> tuple[str, ...]:
        """Direct bases, replicated first (they are preferred as primary)."""
        return self.replicated_bases + self.shared_bases

    def declares(self, name: str) -> bool:
        return any(m.name == name for m in self.members)

    def members_named(self, name: str) -> list[Member]:
        return [m for m in self.members if m.name == name]


@dataclass(frozen=True)
class ClassHierarchy:
    classes: tuple[ClassDef, ...] = ()

    def __post_init__(self):
        seen = set()
        for c in self.classes:
            if c.name in seen:
                raise ValueError(f"duplicate class name {c.name!r}")
            seen.add(c.name)

    @cached_property
    def by_name(self) -> dict[str, ClassDef]:
        return {c.name: c for c in self.classes}

    @cached_property
    def order(self) -> dict[str, int]:
        return {c.name: i for i, c in enumerate(self.classes)}

    def __contains__(self, name: str) -> bool:
        return name in self.by_name

    def __getitem__(self, name: str) -> ClassDef:
        try:
            return self.by_name[name]
        except KeyError:
            raise KeyError(f"unknown class {name!r}") from None

    def __iter__(self) -> Iterator[ClassDef]:
        return iter(self.classes)

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.classes]

    def shared_edges(self) -> set[tuple[str, str]]:
        """Ŝ as (derived, base) pairs."""
        return {(c.name, b) for c in self.classes for b in c.shared_bases}

    def replicated_edges(self) -> set[tuple[str, str]]:
        """P̂ as (derived, base) pairs."""
        return {(c.name, b) for c in self.classes for b in c.replicated_bases}

    def members(self) -> list[Member]:
        return [m for c in self.classes for m in c.members]

    def derived_classes(self, base: str) -> list[str]:
        """Direct derived classes of ``base``, in declaration order."""
        return self._children.get(base, [])

    @cached_property
    def _children(self) -> dict[str, list[str]]:
        children: dict[str, list[str]] = {}
        for c in self.classes:
            for b in c.bases:
                children.setdefault(b, []).append(c.name)
        return children

    @cached_property
    def violations(self) -> list["Violation"]:
        return _hierarchy_violations(self)

    @cached_property
    def memo(self) -> dict:
        """Per-instance scratch space for analyses layered on this hierarchy."""
        return {}

    def require_valid(self) -> None:
        if self.violations:
            raise InvalidModelError(self.violations)

    @cached_property
    def ancestors(self) -> dict[str, frozenset[str]]:
        """Reflexive ancestor sets (the rows of Î). Needs an acyclic hierarchy."""
        self.require_valid()
        result: dict[str, frozenset[str]] = {}

        def visit(name: str) -> frozenset[str]:
            if name in result:
                return result[name]
            acc = {name}
            for b in self[name].bases:
                acc |= visit(b)
            result[name] = frozenset(acc)
            return result[name]

        for c in self.classes:
            visit(c.name)
        return result

    def derives(self, derived: str, base: str) -> bool:
        """(derived, base) ∈ Î."""
        return base in self.ancestors[derived]

    def descendants(self, base: str) -> list[str]:
        """Every class D with (D, base) ∈ Î, in declaration order."""
        return [c.name for c in self.classes if base in self.ancestors[c.name]]

    @cached_property
    def virtual_classes(self) -> frozenset[str]:
        """Classes that declare or inherit at least one virtual member."""
        own = {c.name for c in self.classes if any(m.is_virtual for m in c.members)}
        return frozenset(
            c.name for c in self.classes if self.ancestors[c.name] & own
        )


def derived_closure(h: ClassHierarchy) -> set[tuple[str, str]]:
    """Î(γ): reflexive-transitive closure of Ŝ ∪ P̂ as (derived, base) pairs."""
    h.require_valid()
    return {(d, b) for d, bases in h.ancestors.items() for b in bases}


@dataclass(frozen=True)
class Callsite:
    id: str
    location: str = ""
    kind: str = VIRTUAL_DISPATCH
    static_receiver_type: str | None = None
    member_name: str | None = None
    provided_arg_types: tuple[str, ...] = ()
    return_used: bool = False
    controllable: bool = False

    @property
    def is_virtual_dispatch(self) -> bool:
        return self.kind == VIRTUAL_DISPATCH

    @property
    def arg_count(self) -> int:
        return len(self.provided_arg_types)


@dataclass(frozen=True)
class DirectCall:
    source: str
    callee: str


@dataclass(frozen=True)
class Violation:
    clause: str
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.clause}\t{self.entity}\t{self.message}"


@dataclass(frozen=True)
class ProgramModel:
    name: str = ""
    hierarchy: ClassHierarchy = field(default_factory=ClassHierarchy)
    free_functions: tuple[Member, ...] = ()
    callsites: tuple[Callsite, ...] = ()
    direct_calls: tuple[DirectCall, ...] = ()

    @cached_property
    def functions(self) -> tuple[Member, ...]:
        """F: every class member followed by every free function."""
        return tuple(self.hierarchy.members()) + self.free_functions

    @cached_property
    def _refs(self) -> dict[Member, str]:
        counts: dict[tuple[str, str], int] = {}
        for m in self.functions:
            counts[(m.owning_class, m.name)] = counts.get((m.owning_class, m.name), 0) + 1
        refs = {}
        for m in self.functions:
            base = f"{m.owning_class}::{m.name}" if m.owning_class else m.name
            if counts[(m.owning_class, m.name)] > 1:
                base += "(" + ",".join(m.param_types) + ")"
            refs[m] = base
        return refs

    def ref(self, member: Member) -> str:
        """Stable textual reference: ``Class::name``, overloads get ``(types)``."""
        return self._refs[member]

    @cached_property
    def _by_ref(self) -> dict[str, Member]:
        table = {}
        for m, r in self._refs.items():
            table.setdefault(r, m)
            base = f"{m.owning_class}::{m.name}" if m.owning_class else m.name
            table.setdefault(base + "(" + ",".join(m.param_types) + ")", m)
        return table

    def function(self, ref: str) -> Member:
        try:
            return self._by_ref[ref]
        except KeyError:
            raise KeyError(f"unknown function {ref!r}") from None

    def has_function(self, ref: str) -> bool:
        return ref in self._by_ref

    def callsite(self, callsite_id: str) -> Callsite:
        for cs in self.callsites:
            if cs.id == callsite_id:
                return cs
        raise KeyError(f"unknown callsite {callsite_id!r}")

    @cached_property
    def violations(self) -> list[Violation]:
        return validate(self)

    def require_valid(self) -> None:
        if self.violations:
            raise InvalidModelError(self.violations)


def all_functions(model: ProgramModel) -> list[Member]:
    return list(model.functions)


def all_virtual_functions(model: ProgramModel) -> list[Member]:
    return [m for m in model.functions if m.is_virtual]


def _hierarchy_violations(h: ClassHierarchy) -> list[Violation]:
    out: list[Violation] = []
    known = set(h.names)
    graph = nx.DiGraph()
    graph.add_nodes_from(h.names)

    for c in h.classes:
        if c.name in c.shared_bases or c.name in c.replicated_bases:
            out.append(Violation("i", c.name, "class lists itself as a base"))
        for b in sorted(set(c.shared_bases) & set(c.replicated_bases)):
            out.append(
                Violation("ii", c.name, f"{b} is both a shared and a replicated base")
            )
        for b in c.bases:
            if b not in known:
                out.append(Violation("base", c.name, f"unknown base class {b}"))
            elif b != c.name:
                graph.add_edge(c.name, b)

    for comp in nx.strongly_connected_components(graph):
        if len(comp) > 1:
            cycle = sorted(comp, key=h.order.__getitem__)
            out.append(
                Violation("iii", cycle[0], "inheritance cycle through " + ", ".join(cycle))
            )

    for c in h.classes:
        out.extend(_member_group_violations(c))

    if not any(v.clause == "iii" for v in out):
        out.extend(_override_violations(h, graph))
    return out


def _member_group_violations(c: ClassDef) -> list[Violation]:
    out = []
    groups: dict[tuple, list[Member]] = {}
    for m in c.members:
        groups.setdefault((m.name, m.param_types), []).append(m)
        if m.is_pure and not m.is_virtual:
            out.append(Violation("pure", f"{c.name}::{m.name}", "pure member must be virtual"))
    for (name, types), ms in groups.items():
        entity = f"{c.name}::{name}"
        counts = {m.param_count for m in ms}
        if len({m.is_virtual for m in ms}) > 1:
            out.append(
                Violation("iv", entity, "declared both virtual and non-virtual with one signature")
            )
        elif len(counts) > 1 or counts != {len(types)}:
            out.append(
                Violation("vi", entity, "parameter count disagrees with parameter types")
            )
        elif len(ms) > 1:
            out.append(Violation("vii", entity, "member declared more than once"))
    return out


def _override_violations(h: ClassHierarchy, graph: nx.DiGraph) -> list[Violation]:
    # An acyclic graph is guaranteed here; ancestors via networkx avoids
    # touching the cached closure, which insists on a fully valid hierarchy.
    out = []
    for c in h.classes:
        above = nx.descendants(graph, c.name)
        virtual_keys = {
            (m.override_key, m.signature.return_type)
            for a in above
            for m in h[a].members
            if m.is_virtual
        }
        for m in c.members:
            if not m.is_virtual and (m.override_key, m.signature.return_type) in virtual_keys:
                out.append(
                    Violation(
                        "v",
                        f"{c.name}::{m.name}",
                        "overrides a virtual base member but is not virtual",
                    )
                )
    return out


def validate(model: ProgramModel) -> list[Violation]:
    """Structural check of the hierarchy definition plus callsite references.

    Returns an empty list iff the model is well formed. Never raises.
    """
    out = list(model.hierarchy.violations)
    h = model.hierarchy

    seen_ids = set()
    for cs in model.callsites:
        if cs.id in seen_ids:
            out.append(Violation("ref", cs.id, "duplicate callsite id"))
        seen_ids.add(cs.id)
        if cs.kind not in CALLSITE_KINDS:
            out.append(Violation("ref", cs.id, f"unknown callsite kind {cs.kind}"))

    for f in model.free_functions:
        if f.owning_class or f.is_virtual:
            out.append(Violation("ref", f.name, "free function must be non-virtual and classless"))

    for dc in model.direct_calls:
        if not model.has_function(dc.callee):
            out.append(Violation("ref", dc.source, f"direct call to unknown function {dc.callee}"))

    if out:
        return out

    from .subobjects import MemberLookupError, resolve_dispatch_member

    for cs in model.callsites:
        if not cs.is_virtual_dispatch:
            continue
        if cs.static_receiver_type not in h:
            out.append(Violation("ref", cs.id, f"unknown receiver type {cs.static_receiver_type}"))
            continue
        if cs.static_receiver_type not in h.virtual_classes:
            out.append(Violation("ref", cs.id, f"{cs.static_receiver_type} is not a virtual class"))
            continue
        try:
            m = resolve_dispatch_member(h, cs)
        except MemberLookupError as exc:
            out.append(Violation("ref", cs.id, str(exc)))
            continue
        if not m.is_virtual:
            out.append(Violation("ref", cs.id, f"{m.owning_class}::{m.name} is not virtual"))
    return out


def iter_virtual_callsites(model: ProgramModel) -> Iterable[Callsite]:
    return (cs for cs in model.callsites if cs.is_virtual_dispatch)
