"""Reading, writing and synthesizing program models.

Models live in a single JSON document (``*.reckon.json``). The loader checks
structure with a JSON schema, builds the model and then runs the semantic
validator; any violation aborts the load.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .model import (
    FUNCTION_POINTER,
    GADGET_KINDS,
    VIRTUAL_DISPATCH,
    Callsite,
    ClassDef,
    ClassHierarchy,
    DirectCall,
    FunctionSignature,
    GadgetAnnotation,
    Member,
    ProgramModel,
    Violation,
)

FORMAT_VERSION = 1


class ModelLoadError(ValueError):
    pass


class ModelSyntaxError(ModelLoadError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class ModelFormatError(ModelLoadError):
    pass


class ModelValidationError(ModelLoadError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("\n".join(str(v) for v in violations))


_TYPES = {"type": "array", "items": {"type": "string"}}
_GADGET = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"type": "string"},
                "startAddress": {"type": ["integer", "null"]},
                "usable": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    ]
}
_MEMBER = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "virtual": {"type": "boolean"},
        "pure": {"type": "boolean"},
        "params": _TYPES,
        "paramCount": {"type": "integer", "minimum": 0},
        "return": {"type": "string"},
        "gadgets": {"type": "array", "items": _GADGET},
    },
    "additionalProperties": False,
}
SCHEMA = {
    "type": "object",
    "required": ["formatVersion"],
    "properties": {
        "formatVersion": {"type": "integer"},
        "program": {"type": "string"},
        "classes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "sharedBases": _TYPES,
                    "replicatedBases": _TYPES,
                    "members": {"type": "array", "items": _MEMBER},
                },
                "additionalProperties": False,
            },
        },
        "freeFunctions": {"type": "array", "items": _MEMBER},
        "callsites": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "location": {"type": "string"},
                    "kind": {"enum": [VIRTUAL_DISPATCH, FUNCTION_POINTER]},
                    "staticReceiverType": {"type": ["string", "null"]},
                    "member": {"type": ["string", "null"]},
                    "args": _TYPES,
                    "returnUsed": {"type": "boolean"},
                    "controllable": {"type": "boolean"},
                },
                "additionalProperties": False,
            },
        },
        "directCalls": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to"],
                "properties": {"from": {"type": "string"}, "to": {"type": "string"}},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}


def _member(owner: str, d: dict) -> Member:
    gadgets = []
    for g in d.get("gadgets", []):
        if isinstance(g, str):
            g = {"kind": g}
        gadgets.append(GadgetAnnotation(g["kind"], g.get("startAddress"), g.get("usable", True)))
    params = tuple(d.get("params", []))
    count = d.get("paramCount")
    return Member(
        owning_class=owner,
        name=d["name"],
        signature=FunctionSignature(
            params, d.get("return", "void"), None if count == len(params) else count
        ),
        is_virtual=d.get("virtual", False),
        is_pure=d.get("pure", False),
        gadgets=tuple(gadgets),
    )


def model_from_dict(doc: dict, check: bool = True) -> ProgramModel:
    """Build a model from a parsed document; ``check`` runs the validator."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelFormatError(f"{path}: {exc.message}") from None
    if doc["formatVersion"] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported formatVersion {doc['formatVersion']}")

    seen: set[str] = set()
    classes = []
    for c in doc.get("classes", []):
        if c["name"] in seen:
            raise ModelFormatError(f"duplicate class {c['name']}")
        seen.add(c["name"])
        classes.append(
            ClassDef(
                c["name"],
                tuple(c.get("sharedBases", [])),
                tuple(c.get("replicatedBases", [])),
                tuple(_member(c["name"], m) for m in c.get("members", [])),
            )
        )
    for g in (
        gk for c in classes for m in c.members for gk in m.gadget_kinds
    ):
        if g not in GADGET_KINDS:
            raise ModelFormatError(f"unknown gadget kind {g}")

    model = ProgramModel(
        name=doc.get("program", ""),
        hierarchy=ClassHierarchy(tuple(classes)),
        free_functions=tuple(_member("", f) for f in doc.get("freeFunctions", [])),
        callsites=tuple(
            Callsite(
                id=cs["id"],
                location=cs.get("location", ""),
                kind=cs.get("kind", VIRTUAL_DISPATCH),
                static_receiver_type=cs.get("staticReceiverType"),
                member_name=cs.get("member"),
                provided_arg_types=tuple(cs.get("args", [])),
                return_used=cs.get("returnUsed", False),
                controllable=cs.get("controllable", False),
            )
            for cs in doc.get("callsites", [])
        ),
        direct_calls=tuple(DirectCall(d["from"], d["to"]) for d in doc.get("directCalls", [])),
    )
    if check and model.violations:
        raise ModelValidationError(model.violations)
    return model


def load_model(text: str, check: bool = True) -> ProgramModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("top level must be an object")
    return model_from_dict(doc, check=check)


def read_model(path: str | Path, check: bool = True) -> ProgramModel:
    return load_model(Path(path).read_text(encoding="utf-8"), check=check)


def _member_dict(m: Member) -> dict:
    d = {
        "name": m.name,
        "virtual": m.is_virtual,
        "pure": m.is_pure,
        "params": list(m.param_types),
        "return": m.signature.return_type,
        "gadgets": [
            g.kind if g.start_address is None and g.usable
            else {"kind": g.kind, "startAddress": g.start_address, "usable": g.usable}
            for g in m.gadgets
        ],
    }
    if m.signature.declared_param_count is not None:
        d["paramCount"] = m.signature.declared_param_count
    return d


def model_to_dict(model: ProgramModel) -> dict:
    return {
        "formatVersion": FORMAT_VERSION,
        "program": model.name,
        "classes": [
            {
                "name": c.name,
                "sharedBases": list(c.shared_bases),
                "replicatedBases": list(c.replicated_bases),
                "members": [_member_dict(m) for m in c.members],
            }
            for c in model.hierarchy
        ],
        "freeFunctions": [_member_dict(f) for f in model.free_functions],
        "callsites": [
            {
                "id": cs.id,
                "location": cs.location,
                "kind": cs.kind,
                "staticReceiverType": cs.static_receiver_type,
                "member": cs.member_name,
                "args": list(cs.provided_arg_types),
                "returnUsed": cs.return_used,
                "controllable": cs.controllable,
            }
            for cs in model.callsites
        ],
        "directCalls": [{"from": d.source, "to": d.callee} for d in model.direct_calls],
    }


def save_model(model: ProgramModel) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def fixture_path(name: str) -> Path:
    """Path of a model shipped with the package, e.g. ``car``."""
    return Path(__file__).parent / "fixtures" / f"{name}.reckon.json"


def load_fixture(name: str) -> ProgramModel:
    return read_model(fixture_path(name))


@dataclass(frozen=True)
class SyntheticSpec:
    class_count: int = 20
    max_bases: int = 2
    max_members: int = 4
    gadget_density: float = 0.1
    callsite_count: int = 10
    shared_probability: float = 0.3
    controllable_probability: float = 0.5

    def __post_init__(self):
        for name in ("class_count", "max_bases", "max_members", "callsite_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.gadget_density <= 1.0:
            raise ValueError("gadget_density must lie in [0, 1]")


_TYPE_POOL = ("int", "long", "float", "double", "bool", "char*", "void*", "int*", "Obj*")
_RETURN_POOL = ("void", "void", "int", "bool", "void*")


def _name_pool(rng: random.Random, size: int) -> dict[str, FunctionSignature]:
    # One signature per name keeps overriding and hiding well defined.
    pool = {}
    for i in range(size):
        params = tuple(rng.choice(_TYPE_POOL) for _ in range(rng.choice((0, 0, 1, 1, 2, 3, 7))))
        pool[f"m{i}"] = FunctionSignature(params, rng.choice(_RETURN_POOL))
    return pool


def generate_synthetic(seed: int, spec: SyntheticSpec = SyntheticSpec()) -> ProgramModel:
    """Deterministic random model that always validates.

    Bases are drawn from earlier classes only, so there are no cycles. A
    member overriding an inherited virtual signature is itself virtual.
    """
    rng = random.Random(seed)
    pool = _name_pool(rng, max(4, spec.max_members * 3))
    names = list(pool)

    classes: list[ClassDef] = []
    virtual_keys: dict[str, set[str]] = {}  # class -> virtual names visible in it
    for i in range(spec.class_count):
        cname = f"C{i}"
        bases = rng.sample(range(i), min(i, rng.randint(0, spec.max_bases))) if i else []
        shared, replicated = [], []
        for b in sorted(bases):
            (shared if rng.random() < spec.shared_probability else replicated).append(f"C{b}")
        inherited = set()
        for b in shared + replicated:
            inherited |= virtual_keys[b]
        members = []
        if rng.random() < 0.5:
            # Generated destructors are always virtual, so clause v cannot trip.
            members.append(Member(cname, f"~{cname}", FunctionSignature(), is_virtual=True))
        for n in rng.sample(names, rng.randint(0, spec.max_members)):
            virt = n in inherited or rng.random() < 0.6
            gadgets = ()
            if virt and rng.random() < spec.gadget_density:
                kind = rng.choice(("ML-G",) * 3 + GADGET_KINDS[1:])
                gadgets = (GadgetAnnotation(kind, rng.randrange(1 << 20)),)
            members.append(
                Member(
                    cname,
                    n,
                    pool[n],
                    is_virtual=virt,
                    is_pure=virt and rng.random() < 0.1,
                    gadgets=gadgets,
                )
            )
        classes.append(ClassDef(cname, tuple(shared), tuple(replicated), tuple(members)))
        virtual_keys[cname] = inherited | {m.name for m in members if m.is_virtual}
    hierarchy = ClassHierarchy(tuple(classes))

    free = tuple(
        Member("", f"f{i}", FunctionSignature(*_free_sig(rng)))
        for i in range(rng.randint(0, 4))
    )
    model = ProgramModel(f"synthetic-{seed}", hierarchy, free)
    callsites = _synthetic_callsites(rng, model, spec)
    calls = []
    functions = model.functions
    for i in range(rng.randint(0, len(callsites))):
        if functions:
            calls.append(DirectCall(f"direct:{i}", model.ref(rng.choice(functions))))
    return ProgramModel(model.name, hierarchy, free, tuple(callsites), tuple(calls))


def _free_sig(rng: random.Random) -> tuple[tuple[str, ...], str]:
    params = tuple(rng.choice(_TYPE_POOL) for _ in range(rng.randint(0, 3)))
    return params, rng.choice(_RETURN_POOL)


def _synthetic_callsites(
    rng: random.Random, model: ProgramModel, spec: SyntheticSpec
) -> list[Callsite]:
    from .subobjects import MemberLookupError, resolve_dispatch_member

    h = model.hierarchy
    virtual = [c.name for c in h if c.name in h.virtual_classes] if len(h) else []
    out: list[Callsite] = []
    attempts = 0
    while len(out) < spec.callsite_count and attempts < spec.callsite_count * 20:
        attempts += 1
        cid = f"cs{len(out)}"
        loc = f"synthetic.cpp:{10 + len(out)}:5"
        controllable = rng.random() < spec.controllable_probability
        if virtual and rng.random() < 0.8:
            recv = rng.choice(virtual)
            visible = sorted(
                {m.name for a in h.ancestors[recv] for m in h[a].members if m.is_virtual}
            )
            if not visible:
                continue
            name = rng.choice(visible)
            probe = Callsite(cid, loc, VIRTUAL_DISPATCH, recv, name)
            try:
                m = resolve_dispatch_member(h, probe)
            except MemberLookupError:
                continue
            if not m.is_virtual:
                continue
            out.append(
                Callsite(cid, loc, VIRTUAL_DISPATCH, recv, name, m.param_types,
                         rng.random() < 0.3, controllable)
            )
        else:
            args = tuple(rng.choice(_TYPE_POOL) for _ in range(rng.randint(0, 4)))
            out.append(Callsite(cid, loc, FUNCTION_POINTER, None, None, args,
                                rng.random() < 0.3, controllable))
    return out
