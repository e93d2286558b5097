"""``reckon`` command line: validate, assess, rank, gadgets, gen.

Exit status is 0 on success, 1 for domain failures (violations, nothing to
assess) and 2 for usage or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

from . import gadgets as gadget_mod
from .metrics import AggregateStats, MetricsReport, baseline_for, ctr, normalize, rank_policies
from .model import ProgramModel, validate
from .modelio import (
    ModelLoadError,
    ModelValidationError,
    SyntheticSpec,
    generate_synthetic,
    read_model,
    save_model,
)
from .policies import (
    ICFI_PRESETS,
    POLICIES,
    SUB_HIERARCHY,
    Analysis,
    PolicyFilter,
    TargetSet,
    UnknownPolicyError,
    assess_all,
    check_policy,
)

OK, FAILURE, USAGE = 0, 1, 2
FORMATS = ("table", "csv", "json")
STAT_ROWS = (("Min", "min"), ("90p", "p90"), ("Max", "max"), ("Median", "median"), ("Avg", "avg"))


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


def _fmt_num(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.2f}"


def render_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for i, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load(path: str) -> ProgramModel:
    try:
        return read_model(path)
    except ModelValidationError as exc:
        raise DomainError(str(exc)) from None
    except (ModelLoadError, OSError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _filter_from(args) -> tuple[list[str], PolicyFilter]:
    if args.icfi_policy is not None:
        if args.icfi_policy not in ICFI_PRESETS:
            raise UsageError(f"--icfi-policy must be one of {sorted(ICFI_PRESETS)}")
        policy, filt = ICFI_PRESETS[args.icfi_policy]
        return [policy], filt
    if args.policy == "all":
        policies = list(POLICIES)
    else:
        try:
            policies = [check_policy(args.policy)]
        except UnknownPolicyError as exc:
            raise UsageError(f"{exc} or all") from None
    filt = PolicyFilter(
        virtual_targets_only=args.virtual_only,
        gadget_targets_only=args.gadgets_only,
        max_params=args.max_params,
        whole_hierarchy=args.whole_hierarchy,
    )
    return policies, filt


def cmd_validate(args) -> tuple[int, str]:
    try:
        model = read_model(args.model, check=False)
    except (ModelLoadError, OSError) as exc:
        raise UsageError(f"{args.model}: {exc}") from None
    violations = validate(model)
    if args.format == "json":
        doc = [{"clause": v.clause, "entity": v.entity, "message": v.message} for v in violations]
        text = render_json(doc)
    elif args.format == "csv":
        text = render_csv(("clause", "entity", "message"),
                          [(v.clause, v.entity, v.message) for v in violations])
    else:
        text = "".join(f"{v}\n" for v in violations)
    return (FAILURE if violations else OK), text


def _stats_or_none(sets: Sequence[TargetSet]) -> AggregateStats | None:
    live = [ts for ts in sets if not ts.skipped]
    return ctr(live) if live else None


def cmd_assess(args) -> tuple[int, str]:
    policies, filt = _filter_from(args)
    model = _load(args.model)
    a = Analysis.of(model)
    results = assess_all(a, policies, filt)
    by_id = {cs.id: cs for cs in model.callsites}

    if args.format == "json":
        blocks = []
        for p in policies:
            stats = _stats_or_none(results[p])
            blocks.append({
                "policy": p,
                "callsites": [
                    {
                        "id": ts.callsite_id,
                        "location": by_id[ts.callsite_id].location,
                        "param_count": by_id[ts.callsite_id].arg_count,
                        "skipped": ts.skipped,
                        "target_count": ts.count,
                        "targets": sorted(ts.targets),
                    }
                    for ts in results[p]
                ],
                "aggregates": stats.as_dict() if stats else None,
            })
        doc = {
            "program": model.name,
            "baseline_all": a.baseline_all,
            "baseline_virtual": a.baseline_virtual,
            "filter": {
                "virtual_targets_only": filt.virtual_targets_only,
                "gadget_targets_only": filt.gadget_targets_only,
                "max_params": filt.max_params,
                "whole_hierarchy": filt.whole_hierarchy,
            },
            "policies": blocks,
        }
        return OK, render_json(doc)

    header = ("policy", "callsite_id", "location", "param_count", "target_count")
    if args.format == "csv":
        rows = []
        for p in policies:
            for ts in results[p]:
                if ts.skipped:
                    continue
                cs = by_id[ts.callsite_id]
                rows.append((p, cs.id, cs.location, cs.arg_count, ts.count))
            stats = _stats_or_none(results[p])
            if stats:
                for label, key in STAT_ROWS:
                    rows.append((p, f"aggregate:{key}", "", "", _fmt_num(getattr(stats, key))))
        return OK, render_csv(header, rows)

    out = [f"program {model.name}: baseline all {a.baseline_all}, "
           f"baseline virtual {a.baseline_virtual}\n"]
    for p in policies:
        rows = [
            (by_id[ts.callsite_id].id, by_id[ts.callsite_id].location,
             by_id[ts.callsite_id].arg_count, ts.count)
            for ts in results[p] if not ts.skipped
        ]
        out.append(f"\n[{p}]\n")
        out.append(render_table(("callsite", "location", "#", "targets"), rows))
        stats = _stats_or_none(results[p])
        if stats:
            out.append(render_table(
                ("stat", "value"), [(label, _fmt_num(getattr(stats, key))) for label, key in STAT_ROWS]
            ))
    return OK, "".join(out)


def _reports_from_aggregates(path: str) -> list[MetricsReport]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    reports = []
    for policy, vals in doc.items():
        try:
            check_policy(policy)
            avg, p90 = float(vals["avg"]), float(vals["p90"])
            sd = float(vals.get("sd", 0.0))
        except (UnknownPolicyError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{path}: bad entry for {policy}: {exc}") from None
        stats = AggregateStats(1, avg, avg, avg, avg, avg, sd, p90)
        reports.append(MetricsReport(policy, stats, stats, 100))
    return reports


def _reports_from_model(path: str) -> list[MetricsReport]:
    model = _load(path)
    a = Analysis.of(model)
    results = assess_all(a)
    vcalls = {cs.id for cs in model.callsites if cs.is_virtual_dispatch}
    if not vcalls:
        raise DomainError("no virtual-dispatch callsites to rank policies on")
    reports = []
    for p in POLICIES:
        sets = [ts for ts in results[p] if ts.callsite_id in vcalls]
        stats = ctr(sets)
        base = baseline_for(p, a.baseline_all, a.baseline_virtual)
        if base <= 0:
            raise DomainError(f"baseline for {p} is zero")
        reports.append(MetricsReport(p, stats, normalize(stats, base), base,
                                     a.baseline_all, a.baseline_virtual))
    return reports


def cmd_rank(args) -> tuple[int, str]:
    if bool(args.model) == bool(args.aggregates):
        raise UsageError("rank needs exactly one of MODEL or --aggregates")
    reports = _reports_from_aggregates(args.aggregates) if args.aggregates else _reports_from_model(args.model)
    order = rank_policies(reports)
    by_policy = {r.policy: r for r in reports}
    rows = []
    for i, p in enumerate(order, 1):
        n = by_policy[p].normalized
        rows.append((i, p, round(n.avg, 2), round(n.sd, 2), round(n.p90, 2), by_policy[p].baseline_used))
    if args.format == "json":
        return OK, render_json([
            {"rank": r[0], "policy": r[1], "avg": r[2], "sd": r[3], "p90": r[4], "baseline": r[5]}
            for r in rows
        ])
    header = ("rank", "policy", "avg", "sd", "p90", "baseline")
    if args.format == "csv":
        return OK, render_csv(header, rows)
    return OK, render_table(header, [(r[0], r[1], f"{r[2]:.2f}", f"{r[3]:.2f}", f"{r[4]:.2f}", r[5]) for r in rows])


def cmd_gadgets(args) -> tuple[int, str]:
    try:
        ranking = check_policy(args.rank_policy)
    except UnknownPolicyError as exc:
        raise UsageError(str(exc)) from None
    model = _load(args.model)
    try:
        rows = gadget_mod.rank_controllable_callsites(model, assess_all(model), ranking)
    except gadget_mod.GadgetAnnotationError as exc:
        raise DomainError(str(exc)) from None
    header = ("callsite_id", "location", "param_count", "baseline_virtual", "baseline_all") + POLICIES
    table = [
        (r.callsite_id, r.location, r.param_count, r.baseline_virtual, r.baseline_all)
        + tuple(r.counts[p] for p in POLICIES)
        for r in rows
    ]
    if args.format == "json":
        return OK, render_json([
            {
                "callsite_id": r.callsite_id,
                "location": r.location,
                "param_count": r.param_count,
                "baseline_virtual": r.baseline_virtual,
                "baseline_all": r.baseline_all,
                "counts": r.counts,
                "ml_gadgets": list(r.witnesses),
            }
            for r in rows
        ])
    if args.format == "csv":
        return OK, render_csv(header, table)
    short = ("callsite", "location", "#", "B.virt", "B.all") + POLICIES
    return OK, render_table(short, table)


def cmd_gen(args) -> tuple[int, str]:
    try:
        spec = SyntheticSpec(
            class_count=args.classes,
            max_bases=args.max_bases,
            max_members=args.members,
            gadget_density=args.gadget_density,
            callsite_count=args.callsites,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = save_model(generate_synthetic(args.seed, spec))
    out = Path(args.out or f"synthetic-{args.seed}.reckon.json")
    out.write_text(text, encoding="utf-8")
    args.out = None  # the model went to the file; only the path goes to stdout
    return OK, f"{out}\n"


def _common(p: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS if suppress else "table")
    p.add_argument("--out", default=default, help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reckon", description="Static CFI policy assessment.")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model against the hierarchy rules")
    p.add_argument("model")
    _common(p, suppress=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("assess", help="per-callsite target sets under CFI policies")
    p.add_argument("model")
    p.add_argument("--policy", default="all", help=f"one of {', '.join(POLICIES)} or all")
    p.add_argument("--virtual-only", action="store_true")
    p.add_argument("--gadgets-only", action="store_true")
    p.add_argument("--max-params", type=int)
    p.add_argument("--whole-hierarchy", action="store_true")
    p.add_argument("--icfi-policy", type=int, help="numbered preset 1-11 (overrides --policy and filters)")
    _common(p, suppress=True)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("rank", help="rank the eight policies by normalized average")
    p.add_argument("model", nargs="?")
    p.add_argument("--aggregates", help="JSON of per-policy normalized avg/p90 to rank directly")
    _common(p, suppress=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("gadgets", help="controllable callsites reaching a main-loop gadget")
    p.add_argument("model")
    p.add_argument("--rank-policy", default=SUB_HIERARCHY)
    _common(p, suppress=True)
    p.set_defaults(func=cmd_gadgets)

    p = sub.add_parser("gen", help="write a seeded synthetic model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--max-bases", type=int, default=2)
    p.add_argument("--members", type=int, default=4)
    p.add_argument("--gadget-density", type=float, default=0.1)
    p.add_argument("--callsites", type=int, default=10)
    _common(p, suppress=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        status, text = args.func(args)
    except UsageError as exc:
        print(f"reckon: error: {exc}", file=sys.stderr)
        return USAGE
    except DomainError as exc:
        print(f"reckon: {exc}", file=sys.stderr)
        return FAILURE
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
