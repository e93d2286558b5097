"""Target-reduction metrics, aggregate statistics, normalization and ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

from .model import ProgramModel
from .policies import ANY_TARGET, TargetSet


@dataclass(frozen=True)
class AggregateStats:
    n: int
    sum: float
    min: float
    max: float
    median: float
    avg: float
    sd: float
    p90: float

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "AggregateStats":
        vals = sorted(values)
        n = len(vals)
        if n == 0:
            raise ValueError("no values to aggregate")
        total = math.fsum(vals)
        avg = total / n
        mid = n // 2
        median = vals[mid] if n % 2 else (vals[mid - 1] + vals[mid]) / 2
        sd = math.sqrt(math.fsum((v - avg) ** 2 for v in vals) / n)
        p90 = vals[math.ceil(0.9 * n) - 1]
        return cls(n, total, vals[0], vals[-1], median, avg, sd, p90)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def percentile_90(values: Sequence[float]) -> float:
    return AggregateStats.from_values(values).p90


def ctr(sets: Iterable[TargetSet]) -> AggregateStats:
    """Per-callsite target counts; skipped (inapplicable) sets are ignored."""
    counts = [ts.count for ts in sets if not ts.skipped]
    if not counts:
        raise ValueError("ctr needs at least one applicable target set")
    return AggregateStats.from_values(counts)


def return_targets(model: ProgramModel, sets: Iterable[TargetSet]) -> dict[str, int]:
    """Per function: callsites allowed to reach it plus its direct callers."""
    counts = {model.ref(f): 0 for f in model.functions}
    for ts in sets:
        if ts.skipped:
            continue
        for t in ts.targets:
            counts[t] += 1
    for dc in model.direct_calls:
        counts[model.ref(model.function(dc.callee))] += 1
    return counts


def rtr(model: ProgramModel, sets: Iterable[TargetSet]) -> AggregateStats:
    counts = return_targets(model, sets)
    if not counts:
        raise ValueError("rtr needs at least one function")
    return AggregateStats.from_values(counts.values())


def _has_gadget(model: ProgramModel, ref: str) -> bool:
    return bool(model.function(ref).gadgets)


def fcga(sets: Iterable[TargetSet], model: ProgramModel) -> int:
    """Gadget-bearing targets summed over all forward edges."""
    return sum(
        1 for ts in sets if not ts.skipped for t in ts.targets if _has_gadget(model, t)
    )


def bcga(sets: Iterable[TargetSet], model: ProgramModel) -> int:
    """Return edges that land in gadget-bearing functions."""
    counts = return_targets(model, sets)
    return sum(c for ref, c in counts.items() if _has_gadget(model, ref))


def csd(checks_per_callsite: Iterable[float], k: float = 1.0) -> float:
    checks = list(checks_per_callsite)
    if any(c < 0 for c in checks):
        raise ValueError("check counts must be non-negative")
    return math.fsum(checks) * k


def rsd(checks_per_return_site: Iterable[float], k: float = 1.0) -> float:
    return csd(checks_per_return_site, k)


def normalize(stats: AggregateStats, baseline: float) -> AggregateStats:
    """Express every statistic as a percentage of ``baseline``.

    Scaling is linear, so this equals aggregating the per-site percentages.
    """
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    scaled = {k: 100 * getattr(stats, k) / baseline for k in ("sum", "min", "max", "median", "avg", "sd", "p90")}
    return replace(stats, **scaled)


def baseline_for(policy: str, baseline_all: int, baseline_virtual: int) -> int:
    """All functions for policies that allow non-virtual targets, else virtual ones."""
    return baseline_all if policy in ANY_TARGET else baseline_virtual


@dataclass(frozen=True)
class MetricsReport:
    policy: str
    ctr: AggregateStats
    normalized: AggregateStats
    baseline_used: int
    baseline_all: int = 0
    baseline_virtual: int = 0
    rtr: AggregateStats | None = None
    fcga: int | None = None
    bcga: int | None = None
    csd: float | None = None
    rsd: float | None = None


def report(
    model: ProgramModel, policy: str, sets: Sequence[TargetSet], baseline: int | None = None
) -> MetricsReport:
    """All metrics for one policy's target sets.

    Damping uses one check per protected site.
    """
    live = [ts for ts in sets if not ts.skipped]
    stats = ctr(live)
    b_all = live[0].baseline_all
    b_virt = live[0].baseline_virtual
    used = baseline if baseline is not None else baseline_for(policy, b_all, b_virt)
    return MetricsReport(
        policy=policy,
        ctr=stats,
        normalized=normalize(stats, used),
        baseline_used=used,
        baseline_all=b_all,
        baseline_virtual=b_virt,
        rtr=rtr(model, live) if model.functions else None,
        fcga=fcga(live, model),
        bcga=bcga(live, model),
        csd=csd([1] * len(live)),
        rsd=rsd([1] * len(model.functions)),
    )


def rank_policies(reports: Iterable[MetricsReport]) -> list[str]:
    """Strongest first: ascending normalized avg, then p90, then name."""
    return [
        r.policy
        for r in sorted(reports, key=lambda r: (r.normalized.avg, r.normalized.p90, r.policy))
    ]


def score(rep: MetricsReport) -> dict[str, float]:
    """The avg and 90p bars of a report, in raw targets per callsite."""
    return {"avg": rep.ctr.avg, "p90": rep.ctr.p90}
