"""Plant a main-loop gadget and list the controllable callsites that reach it.

    python3 scripts/case_study.py [--out loop.reckon.json]
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from reckon.cli import main as reckon
from reckon.modelio import model_from_dict, save_model


def planted_model():
    def call(i, cls, member, args=()):
        return {"id": f"c{i}", "location": f"loop.cpp:{10 * i}:5", "kind": "virtual-dispatch",
                "staticReceiverType": cls, "member": member, "args": list(args), "controllable": True}

    return model_from_dict({
        "formatVersion": 1,
        "program": "planted-loop",
        "classes": [
            {"name": "Task", "members": [{"name": "run", "virtual": True}]},
            {"name": "Batch", "replicatedBases": ["Task"], "members": [
                {"name": "run", "virtual": True, "gadgets": [{"kind": "ML-G", "startAddress": 4096, "usable": True}]}]},
            {"name": "Sink", "members": [{"name": "put", "virtual": True, "params": ["int"]}]},
            {"name": "FileSink", "replicatedBases": ["Sink"], "members": [
                {"name": "put", "virtual": True, "params": ["int"], "gadgets": ["W-G"]}]},
        ],
        "callsites": [
            call(1, "Task", "run"), call(2, "Batch", "run"),
            call(3, "Sink", "put", ["int"]), call(4, "Sink", "put", ["int"]), call(5, "FileSink", "put", ["int"]),
        ],
    })


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="also keep the generated model here")
    args = ap.parse_args(argv)
    text = save_model(planted_model())
    if args.out:
        path = Path(args.out)
        path.write_text(text)
    else:
        path = Path(tempfile.mkdtemp()) / "planted.reckon.json"
        path.write_text(text)
    return reckon(["gadgets", str(path)])


if __name__ == "__main__":
    sys.exit(main())
