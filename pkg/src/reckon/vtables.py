"""Virtual tables built from a class hierarchy, and the hierarchy they form.

Layout is a simplified Itanium scheme without thunks or offset slots. Each
virtual class owns a primary table that extends its first virtual base's
primary table, plus one table for every other table it inherits. A slot is
identified by the class that introduced it and the member's override key,
and keeps its index in every table that extends the introducing one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import networkx as nx

from .model import ClassHierarchy, Member

PRIMARY = "primary"
SHARED = "shared"
REPLICATED = "replicated"


@dataclass(frozen=True)
class VTableEntry:
    index: int
    declaring_class: str
    key: tuple
    resolved_member: Member

    @property
    def is_pure(self) -> bool:
        return self.resolved_member.is_pure

    @property
    def slot(self) -> tuple[str, tuple]:
        return (self.declaring_class, self.key)


@dataclass(frozen=True)
class VTable:
    owning_class: str
    base_selector: str
    root_type: str
    entries: tuple[VTableEntry, ...]

    @property
    def id(self) -> tuple[str, str]:
        return (self.owning_class, self.base_selector)

    @property
    def is_primary(self) -> bool:
        return self.base_selector == PRIMARY

    def entry_for(self, slot: tuple[str, tuple]) -> VTableEntry | None:
        for e in self.entries:
            if e.slot == slot:
                return e
        return None

    def __str__(self) -> str:
        return f"{self.owning_class}[{self.base_selector}]"


@dataclass(frozen=True)
class VTableHierarchy:
    tables: tuple[VTable, ...]
    # child id -> (parent id, edge kind)
    parents: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator[VTable]:
        return iter(self.tables)

    def __len__(self) -> int:
        return len(self.tables)

    @cached_property
    def by_id(self) -> dict[tuple[str, str], VTable]:
        return {t.id: t for t in self.tables}

    @cached_property
    def by_class(self) -> dict[str, list[VTable]]:
        out: dict[str, list[VTable]] = {}
        for t in self.tables:
            out.setdefault(t.owning_class, []).append(t)
        return out

    @cached_property
    def children(self) -> dict[tuple[str, str], list[VTable]]:
        out: dict[tuple[str, str], list[VTable]] = {}
        for t in self.tables:
            link = self.parents.get(t.id)
            if link is not None:
                out.setdefault(link[0], []).append(t)
        return out

    def edges(self) -> list[tuple[tuple[str, str], tuple[str, str], str]]:
        """(child id, parent id, kind) triples in table order."""
        return [(t.id, *self.parents[t.id]) for t in self.tables if t.id in self.parents]

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(t.id for t in self.tables)
        g.add_edges_from((c, p) for c, p, _ in self.edges())
        return g

    @cached_property
    def islands(self) -> list[frozenset[tuple[str, str]]]:
        """Connected components, ordered by their first table."""
        order = {t.id: i for i, t in enumerate(self.tables)}
        comps = [frozenset(c) for c in nx.connected_components(self.graph)]
        return sorted(comps, key=lambda c: min(order[x] for x in c))

    @cached_property
    def island_of(self) -> dict[tuple[str, str], int]:
        return {tid: i for i, comp in enumerate(self.islands) for tid in comp}

    def members(self) -> set[Member]:
        """V̂_M: every member some table entry resolves to."""
        return {e.resolved_member for t in self.tables for e in t.entries}


def build_vtables(h: ClassHierarchy) -> VTableHierarchy:
    h.require_valid()
    memo = h.memo
    if "vtables" in memo:
        return memo["vtables"]

    virtual = h.virtual_classes
    built: dict[str, list[VTable]] = {}
    parents: dict[tuple[str, str], tuple[tuple[str, str], str]] = {}

    def overrider(cls: str, via: str, inherited: VTableEntry) -> Member:
        # Final overrider for the slot, seen through the base ``via``.
        anc = h.ancestors
        cands = [inherited.resolved_member]
        for x in anc[cls]:
            if via not in anc[x]:
                continue
            for m in h[x].members:
                if m.is_virtual and m.override_key == inherited.key:
                    cands.append(m)
        best = [m for m in cands
                if not any(o is not m and o.owning_class != m.owning_class
                           and m.owning_class in anc[o.owning_class] for o in cands)]
        return max(best, key=lambda m: h.order[m.owning_class])

    def extend(cls: str, base: str, parent: VTable, selector: str, kind: str) -> list[VTableEntry]:
        entries = [
            VTableEntry(e.index, e.declaring_class, e.key, overrider(cls, base, e))
            for e in parent.entries
        ]
        parents[(cls, selector)] = (parent.id, kind)
        return entries

    def visit(cls: str) -> list[VTable]:
        if cls in built:
            return built[cls]
        c = h[cls]
        vbases = [b for b in c.bases if b in virtual]
        kinds = {b: REPLICATED for b in c.replicated_bases}
        kinds.update({b: SHARED for b in c.shared_bases})
        for b in vbases:
            visit(b)

        # (selector, root, entries) in creation order; primary first.
        pending: list[tuple[str, str, list[VTableEntry]]] = []
        if vbases:
            first = vbases[0]
            ptables = built[first]
            pending.append((PRIMARY, ptables[0].root_type,
                            extend(cls, first, ptables[0], PRIMARY, kinds[first])))
            for t in ptables[1:]:
                sel = f"{first}/{t.base_selector}"
                pending.append((sel, t.root_type, extend(cls, first, t, sel, kinds[first])))
            for b in vbases[1:]:
                for t in built[b]:
                    sel = b if t.is_primary else f"{b}/{t.base_selector}"
                    pending.append((sel, t.root_type, extend(cls, b, t, sel, kinds[b])))
        else:
            pending.append((PRIMARY, cls, []))

        known = {e.key for _, _, entries in pending for e in entries}
        primary = pending[0][2]
        for m in c.members:
            if m.is_virtual and m.override_key not in known:
                known.add(m.override_key)
                primary.append(VTableEntry(len(primary), cls, m.override_key, m))

        built[cls] = [VTable(cls, sel, root, tuple(entries)) for sel, root, entries in pending]
        return built[cls]

    tables: list[VTable] = []
    for c in h:
        if c.name in virtual:
            tables.extend(visit(c.name))
    vth = VTableHierarchy(tuple(tables), parents)
    memo["vtables"] = vth
    return vth


def vtable_set(vth: VTableHierarchy, h: ClassHierarchy, cls: str) -> list[VTable]:
    if cls not in h:
        raise KeyError(f"unknown class {cls!r}")
    return list(vth.by_class.get(cls, []))


def vtable_sub_hierarchy(vth: VTableHierarchy, root: VTable) -> list[VTable]:
    """``root`` and every table extending it, directly or transitively."""
    if root.id not in vth.by_id:
        raise KeyError(f"unknown table {root}")
    out, stack, seen = [], [root], {root.id}
    while stack:
        t = stack.pop()
        out.append(t)
        for ch in vth.children.get(t.id, []):
            if ch.id not in seen:
                seen.add(ch.id)
                stack.append(ch)
    order = {t.id: i for i, t in enumerate(vth.tables)}
    return sorted(out, key=lambda t: order[t.id])


def primary_descent(vth: VTableHierarchy, root: VTable) -> list[VTable]:
    """Tables reached from ``root`` by following primary derivations only.

    At each step the first primary child (declaration order) is taken, so the
    result is a single chain.
    """
    chain = [root]
    while True:
        nxt = [c for c in vth.children.get(chain[-1].id, []) if c.is_primary]
        if not nxt:
            return chain
        chain.append(nxt[0])


def _simple_paths(succ: dict[str, list[str]]) -> set[tuple[str, ...]]:
    paths: set[tuple[str, ...]] = set()

    def walk(path: list[str]):
        for n in succ.get(path[-1], []):
            if n in path:
                continue
            path.append(n)
            paths.add(tuple(path))
            walk(path)
            path.pop()

    for start in list(succ):
        walk([start])
    return paths


def class_paths(h: ClassHierarchy) -> set[tuple[str, ...]]:
    """T̂: every simple base-to-derived path with at least two classes."""
    h.require_valid()
    succ: dict[str, list[str]] = {}
    for c in h:
        for b in c.bases:
            succ.setdefault(b, []).append(c.name)
    return _simple_paths(succ)


def vtable_paths(vth: VTableHierarchy) -> set[tuple[str, ...]]:
    """Paths along replicated table extensions, projected to owning classes."""
    succ: dict[str, list[str]] = {}
    for child, parent, kind in vth.edges():
        if kind == REPLICATED:
            nxt = succ.setdefault(parent[0], [])
            if child[0] not in nxt:
                nxt.append(child[0])
    return _simple_paths(succ)


def min_vtable_path(vth: VTableHierarchy, base: str) -> tuple[str, ...]:
    """Longest downward table path from ``base``'s primary table.

    Ties go to the lexicographically smallest class sequence.
    """
    tables = vth.by_class.get(base)
    if not tables:
        raise KeyError(f"class {base!r} owns no vtable")

    best: dict[tuple[str, str], tuple[str, ...]] = {}

    def longest(tid: tuple[str, str]) -> tuple[str, ...]:
        if tid in best:
            return best[tid]
        options = [longest(ch.id) for ch in vth.children.get(tid, [])]
        tail = min(options, key=lambda p: (-len(p), p)) if options else ()
        best[tid] = (tid[0],) + tail
        return best[tid]

    return longest(tables[0].id)
