"""Subobjects of multiply-inheriting classes and member lookup over them.

A subobject ``[mdc; chain]`` names one base-class instance inside a complete
object of class ``mdc``. Shared (virtual) bases start a fresh one-element
chain, so they occur once per object; replicated bases extend the chain, so
they occur once per distinct path.

Lookup follows dominance: a definition in subobject ``a`` hides one in ``b``
when ``b`` is a (transitive) base subobject of ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import Callsite, ClassDef, ClassHierarchy, Member, ProgramModel


class MemberLookupError(LookupError):
    pass


class NoSuchMember(MemberLookupError):
    pass


class AmbiguousLookup(MemberLookupError):
    def __init__(self, message: str, candidates: Iterable["Subobject"] = ()):
        super().__init__(message)
        self.candidates = tuple(candidates)


@dataclass(frozen=True, order=True)
class Subobject:
    mdc: str
    chain: tuple[str, ...]

    @property
    def ldc(self) -> str:
        return self.chain[-1]

    def __str__(self) -> str:
        return f"[{self.mdc};({','.join(self.chain)})]"


def full_object(mdc: str) -> Subobject:
    return Subobject(mdc, (mdc,))


def direct_base_subobjects(h: ClassHierarchy, s: Subobject) -> list[Subobject]:
    cls = h[s.ldc]
    out = [Subobject(s.mdc, s.chain + (b,)) for b in cls.replicated_bases]
    out += [Subobject(s.mdc, (b,)) for b in cls.shared_bases]
    return out


def _reach(h: ClassHierarchy, s: Subobject) -> frozenset[Subobject]:
    """``s`` and every subobject contained in it."""
    memo = h.memo.setdefault("subobject_reach", {})
    hit = memo.get(s)
    if hit is not None:
        return hit
    acc = {s}
    for b in direct_base_subobjects(h, s):
        acc |= _reach(h, b)
    result = frozenset(acc)
    memo[s] = result
    return result


def subobjects_of(h: ClassHierarchy, cls: str) -> frozenset[Subobject]:
    """Σ(γ, C) for a complete object of class ``cls``."""
    if cls not in h:
        raise KeyError(f"unknown class {cls!r}")
    h.require_valid()
    return _reach(h, full_object(cls))


def contains(h: ClassHierarchy, outer: Subobject, inner: Subobject) -> bool:
    return inner in _reach(h, outer)


def visible_defs(
    h: ClassHierarchy, s: Subobject, name: str, declares=None
) -> frozenset[Subobject]:
    """Subobjects carrying an unhidden definition of ``name`` seen from ``s``.

    ``declares`` optionally replaces the "class declares name" test, e.g. to
    look up one particular signature.
    """
    if declares is None:
        def declares(cls: ClassDef) -> bool:
            return cls.declares(name)

    defs = [d for d in _reach(h, s) if declares(h[d.ldc])]
    hidden: set[Subobject] = set()
    for d in defs:
        hidden |= _reach(h, d) - {d}
    return frozenset(d for d in defs if d not in hidden)


def static_lookup(h: ClassHierarchy, s: Subobject, name: str) -> Subobject:
    found = visible_defs(h, s, name)
    if not found:
        raise NoSuchMember(f"no member {name!r} visible from {s}")
    if len(found) > 1:
        listed = ", ".join(str(x) for x in sorted(found))
        raise AmbiguousLookup(f"ambiguous lookup of {name!r} from {s}: {listed}", found)
    (only,) = found
    return only


def dynamic_lookup(h: ClassHierarchy, s: Subobject, name: str) -> Subobject:
    """Where a call of ``name`` through ``s`` lands for an object of ``mdc(s)``."""
    hit = static_lookup(h, s, name)
    if any(m.is_virtual for m in h[hit.ldc].members_named(name)):
        return static_lookup(h, full_object(s.mdc), name)
    return hit


def corresponding_subobjects(
    h: ClassHierarchy, type_set: Iterable[str], cls: str
) -> frozenset[Subobject]:
    """Subobjects with ldc ``cls`` inside complete objects of each type in ``type_set``."""
    type_set = list(type_set)
    unknown = [t for t in type_set + [cls] if t not in h]
    if unknown:
        raise KeyError(f"unknown class(es): {', '.join(sorted(set(unknown)))}")
    out: set[Subobject] = set()
    for t in type_set:
        out |= {s for s in subobjects_of(h, t) if s.ldc == cls}
    return frozenset(out)


def all_class_objects(h: ClassHierarchy) -> frozenset[Subobject]:
    out: set[Subobject] = set()
    for c in h:
        out |= subobjects_of(h, c.name)
    return frozenset(out)


def potential_runtime_types(h: ClassHierarchy, static_type: str) -> list[str]:
    # Flow-insensitive: any class deriving the static type may show up.
    return h.descendants(static_type)


def class_sub_hierarchy(h: ClassHierarchy, root: str) -> ClassHierarchy:
    """The slice of ``h`` made of ``root`` and every class deriving it."""
    if root not in h:
        raise KeyError(f"unknown class {root!r}")
    keep = set(h.descendants(root))
    classes = []
    for c in h:
        if c.name not in keep:
            continue
        classes.append(
            ClassDef(
                c.name,
                tuple(b for b in c.shared_bases if b in keep),
                tuple(b for b in c.replicated_bases if b in keep),
                c.members,
            )
        )
    return ClassHierarchy(tuple(classes))


def select_overload(candidates: list[Member], arg_types: tuple[str, ...]) -> Member | None:
    if len(candidates) == 1:
        return candidates[0]
    exact = [m for m in candidates if m.param_types == tuple(arg_types)]
    return exact[0] if len(exact) == 1 else None


def resolve_dispatch_member(h: ClassHierarchy, cs: Callsite) -> Member:
    """The member a virtual-dispatch callsite names, by static lookup in its receiver."""
    hit = static_lookup(h, full_object(cs.static_receiver_type), cs.member_name)
    m = select_overload(h[hit.ldc].members_named(cs.member_name), cs.provided_arg_types)
    if m is None:
        raise NoSuchMember(
            f"no unique overload of {hit.ldc}::{cs.member_name} for "
            f"({','.join(cs.provided_arg_types)})"
        )
    return m


def runtime_targets(model: ProgramModel, cs: Callsite) -> frozenset[str]:
    """Functions a dispatch can reach for every potential runtime type.

    Walks the subobjects that a receiver of the static type may denote and
    resolves the final overrider of the dispatched signature for each one.
    Pure members are not callable and are dropped.
    """
    h = model.hierarchy
    recv = cs.static_receiver_type
    key = resolve_dispatch_member(h, cs).override_key

    def declares(cls: ClassDef) -> bool:
        return any(m.override_key == key for m in cls.members)

    out = set()
    for s in corresponding_subobjects(h, potential_runtime_types(h, recv), recv):
        # Only definitions on the way from the full object down through s count.
        below = _reach(h, s)
        on_path = [
            d for d in _reach(h, full_object(s.mdc))
            if declares(h[d.ldc]) and (d in below or s in _reach(h, d))
        ]
        hidden = set()
        for d in on_path:
            hidden |= _reach(h, d) - {d}
        found = [d for d in on_path if d not in hidden]
        if len(found) != 1:
            raise AmbiguousLookup(f"no unique final overrider of {cs.member_name} in {s.mdc}", found)
        (hit,) = found
        m = next(m for m in h[hit.ldc].members if m.override_key == key)
        if not m.is_pure:
            out.add(model.ref(m))
    return frozenset(out)
