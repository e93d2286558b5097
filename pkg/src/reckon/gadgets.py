"""COOP gadget sets and the controllable-callsite ranking.

Gadget classification comes from annotations in the model; this module only
collects them and intersects them with policy target sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import GADGET_KINDS, ProgramModel, Violation
from .policies import POLICIES, SUB_HIERARCHY, TargetSet, check_policy

MAIN_LOOP = "ML-G"
ATTRIBUTES = ("function-signature", "startMemoryAddress", "usable", "not-usable", "type")


class GadgetAnnotationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("\n".join(str(v) for v in violations))


@dataclass(frozen=True, order=True)
class GadgetRecord:
    function_ref: str
    start_address: int | None
    usable: bool
    kind: str


@dataclass(frozen=True)
class GadgetSet:
    types: tuple[str, ...]
    attributes: tuple[str, ...]
    records: tuple[GadgetRecord, ...]

    @property
    def members(self) -> frozenset[str]:
        return frozenset(r.function_ref for r in self.records)

    def records_for(self, ref: str) -> list[GadgetRecord]:
        return [r for r in self.records if r.function_ref == ref]


def gadget_violations(model: ProgramModel) -> list[Violation]:
    out = []
    for f in model.functions:
        if f.gadgets and not f.is_virtual:
            out.append(Violation("gadget", model.ref(f), "gadget annotation on a non-virtual function"))
        for g in f.gadgets:
            if g.kind not in GADGET_KINDS:
                out.append(Violation("gadget", model.ref(f), f"unknown gadget kind {g.kind}"))
    return out


def build_gadget_set(model: ProgramModel) -> GadgetSet:
    bad = gadget_violations(model)
    if bad:
        raise GadgetAnnotationError(bad)
    records = [
        GadgetRecord(model.ref(f), g.start_address, g.usable, g.kind)
        for f in model.functions
        for g in f.gadgets
    ]
    return GadgetSet(GADGET_KINDS, ATTRIBUTES, tuple(records))


def available_gadgets(sets: Sequence[TargetSet], gs: GadgetSet) -> dict[str, list[GadgetRecord]]:
    """Per callsite, the gadgets its allowed targets carry."""
    return {
        ts.callsite_id: sorted(r for r in gs.records if r.function_ref in ts.targets)
        for ts in sets
    }


@dataclass(frozen=True)
class ControllableRow:
    callsite_id: str
    location: str
    param_count: int
    baseline_virtual: int
    baseline_all: int
    counts: dict  # policy -> target count
    witnesses: tuple[str, ...]  # usable ML-G functions in the ranking policy's set


def rank_controllable_callsites(
    model: ProgramModel,
    sets_by_policy: Mapping[str, Sequence[TargetSet]],
    ranking_policy: str = SUB_HIERARCHY,
) -> list[ControllableRow]:
    """Controllable callsites that can reach a usable main-loop gadget.

    Rows are ordered by the ranking policy's target count, then by callsite
    declaration order.
    """
    check_policy(ranking_policy)
    gs = build_gadget_set(model)
    loops = {r.function_ref for r in gs.records if r.kind == MAIN_LOOP and r.usable}
    by_id = {p: {ts.callsite_id: ts for ts in sets} for p, sets in sets_by_policy.items()}
    rows = []
    for pos, cs in enumerate(model.callsites):
        if not cs.controllable:
            continue
        ranked = by_id[ranking_policy][cs.id]
        witnesses = tuple(sorted(ranked.targets & loops))
        if not witnesses:
            continue
        counts = {p: by_id[p][cs.id].count for p in POLICIES if p in by_id}
        rows.append(
            (
                ranked.count,
                pos,
                ControllableRow(
                    cs.id, cs.location, cs.arg_count, ranked.baseline_virtual,
                    ranked.baseline_all, counts, witnesses,
                ),
            )
        )
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]
