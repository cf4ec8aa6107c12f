"""Capture real tsc transcripts for the parser golden suite.

Builds a handful of small probe projects in a scratch directory, runs tsc
on each in plain and pretty mode, and writes the transcripts under
tests/golden/. Pretty output is stored with colour codes stripped.

    python scripts/capture_golden.py --out tests/golden
"""

from __future__ import annotations

import argparse
import json
import re
import subprocess
import sys
import tempfile
from pathlib import Path

CONFIG = {"compilerOptions": {"allowJs": True, "checkJs": True, "noEmit": True,
                              "noImplicitAny": False, "strict": False},
          "include": ["**/*.js"]}

PROBES: dict[str, dict[str, str]] = {
    "mixed": {
        "t.js": """\
/** @param {number} n */
function square(n) { return n * n; }
/** @type {number} */
let wrong = "text";
const sq = square("4");
const sq2 = square(1, 2);
const size = [1, 2].lenght;
const v = notDefinedAnywhere + 1;
const m = Mathh.max(1, 2);
const k = 5;
k();
const nn = new k();
/** @type {{ a: number, b: { c: string } }} */
const deep = { a: 1, b: { c: 2 } };
/** @type {{ a: number }} */
const only = { a: 1, extra: 2 };
const fixed = 1;
fixed = 2;
var dup = 1;
var dup = "one";
const pair = (1, 2);
const inst = 5 instanceof Object;
const early = late + 1;
const late = 2;
const bo = true + 1;
/** @type {Array<{ id: number, tags: string[] }>} */
const rows = [{ id: 1, tags: [1] }];
/** @type {(x: number) => string} */
const fmt = (x) => x;
// @ts-expect-error -- stale
const fine = 1;
module.exports = { wrong, sq, sq2, size, v, m, nn, deep, only, pair, inst, early, bo, rows, fmt, fine };
""",
    },
    "modules": {
        "app/main.js": """\
const lp = require("left-pad");
const fs = require("fs");
const helper = require("./helper");
helper.run("x");
process.exit(helper.missing);
module.exports = { lp, fs };
""",
        "app/helper.js": """\
/** @param {number} times */
function run(times) { return times; }
module.exports = { run };
""",
        "old (copy)/legacy.js": """\
/** @type {string} */
const name = 42;
module.exports = { name };
""",
    },
    "single": {
        "only.js": "/** @type {number} */\nconst x = 'one';\nmodule.exports = { x };\n",
    },
}

_ANSI = re.compile(r"\x1b\[[0-9;]*m")


def run(tsc: str, root: Path, pretty: bool) -> str:
    proc = subprocess.run([tsc, "-p", "tsconfig.json", "--pretty", "true" if pretty else "false"],
                          cwd=root, capture_output=True, text=True)
    return _ANSI.sub("", proc.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("tests/golden"))
    ap.add_argument("--tsc", default="tsc")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for name, files in PROBES.items():
            root = Path(tmp) / name
            for rel, text in files.items():
                (root / rel).parent.mkdir(parents=True, exist_ok=True)
                (root / rel).write_text(text, encoding="utf-8")
            (root / "tsconfig.json").write_text(json.dumps(CONFIG), encoding="utf-8")
            (args.out / f"{name}.plain.txt").write_text(run(args.tsc, root, False), encoding="utf-8")
            (args.out / f"{name}.pretty.txt").write_text(run(args.tsc, root, True), encoding="utf-8")
        # a project-level error with no file position
        root = Path(tmp) / "global"
        root.mkdir()
        (root / "a.js").write_text("module.exports = 1;\n", encoding="utf-8")
        cfg = json.loads(json.dumps(CONFIG))
        cfg["compilerOptions"]["types"] = ["node"]
        (root / "tsconfig.json").write_text(json.dumps(cfg), encoding="utf-8")
        (args.out / "global.plain.txt").write_text(run(args.tsc, root, False), encoding="utf-8")
    for p in sorted(args.out.glob("*.txt")):
        print(f"{p}: {len(p.read_text().splitlines())} lines")
    return 0


if __name__ == "__main__":
    sys.exit(main())
