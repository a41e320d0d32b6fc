#!/usr/bin/env python3
"""Regenerate the golden CLI outputs under tests/golden/.

Run from anywhere; paths inside reports stay relative because the CLI is
invoked with the fixtures directory as the working directory.  Review the
diff before committing: these files define the frozen observable surface.
"""

import io
import os
import sys
from contextlib import redirect_stdout
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fssm.cli import main  # noqa: E402
from fssm.modelfile import parse_model, serialize_model  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = ROOT / "tests" / "golden"

# (golden file, expected exit code, argv)
CASES = [
    ("validate_net1.json", 0, ["validate", "net1.json", "--format", "json"]),
    ("validate_net1.txt", 0, ["validate", "net1.json"]),
    ("explore_net1.json", 0, ["explore", "net1.json", "--format", "json"]),
    ("explore_net1.dot", 0, ["explore", "net1.json", "--dot", "-"]),
    (
        "explore_net1_markings.dot",
        0,
        ["explore", "net1.json", "--dot", "-", "--show-markings"],
    ),
    ("blp_net3.json", 1, ["check", "blp", "net3.json", "--format", "json"]),
    ("blp_net3.txt", 1, ["check", "blp", "net3.json"]),
    ("blp_leak.json", 1, ["check", "blp", "net1_leak.json", "--format", "json"]),
    (
        "blp_static_net3.json",
        1,
        ["check", "blp", "net3.json", "--static", "--format", "json"],
    ),
    (
        "blp_rules_contain.json",
        0,
        ["check", "blp", "net3.json", "--rules", "containment", "--format", "json"],
    ),
    (
        "invariant_never.json",
        1,
        [
            "check", "invariant", "net1.json",
            "--pred", "sec_p2", "--mode", "never", "--format", "json",
        ],
    ),
    (
        "invariant_always.json",
        0,
        [
            "check", "invariant", "net1.json",
            "--pred", "p1_small", "--mode", "always", "--format", "json",
        ],
    ),
    ("ni_net2.json", 0, ["check", "ni", "net2.json", "--observer", "Public", "--format", "json"]),
    ("ni_net3.json", 1, ["check", "ni", "net3.json", "--observer", "low", "--format", "json"]),
    ("ni_net3.txt", 1, ["check", "ni", "net3.json", "--observer", "low"]),
    (
        "opacity_state.json",
        1,
        [
            "check", "opacity", "net1.json",
            "--secret", "sec_p2", "--obs", "u_map", "--format", "json",
        ],
    ),
    (
        "opacity_silent.json",
        0,
        [
            "check", "opacity", "net1.json",
            "--secret", "sec_p2", "--obs", "silent", "--format", "json",
        ],
    ),
    (
        "opacity_run.json",
        1,
        [
            "check", "opacity", "net1.json",
            "--secret", "mon_up", "--obs", "u_map", "--format", "json",
        ],
    ),
    ("allocate_wf1.json", 0, ["allocate", "wf1.json", "--format", "json"]),
    ("allocate_wf1.txt", 0, ["allocate", "wf1.json"]),
    ("allocate_enum.json", 0, ["allocate", "wf1.json", "--enumerate", "--format", "json"]),
    (
        "emit_net.json",
        0,
        ["allocate", "wf1.json", "--emit-net", "-", "--format", "json"],
    ),
]


def regen() -> None:
    GOLDEN.mkdir(exist_ok=True)
    os.chdir(FIXTURES)
    for name, want_code, argv in CASES:
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = main(argv)
        if code != want_code:
            raise SystemExit(f"{name}: exit {code}, expected {want_code} ({argv})")
        (GOLDEN / name).write_text(buf.getvalue())
        print(f"wrote {name} ({len(buf.getvalue())} bytes)")

    canonical = serialize_model(parse_model((FIXTURES / "net1.json").read_text()))
    (GOLDEN / "net1.canonical.json").write_text(canonical)
    print(f"wrote net1.canonical.json ({len(canonical)} bytes)")


if __name__ == "__main__":
    regen()
