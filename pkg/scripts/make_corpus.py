"""Generate the seeded JavaScript corpora used by the end-to-end tests.

Each corpus is plain CommonJS with JSDoc annotations. Clean code blocks are
interleaved with seeded error sites; every site records the file, line and
diagnostic code it is designed to produce. ``--verify`` runs tsc over the
result and fails unless its diagnostics match the design exactly, which is
how the committed expected outputs were produced.

    python scripts/make_corpus.py --out tests/fixtures/corpora --verify
"""

from __future__ import annotations

import argparse
import json
import random
import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

TSCONFIG = {
    "compilerOptions": {"allowJs": True, "checkJs": True, "noEmit": True,
                        "noImplicitAny": False, "strict": False},
    "include": ["**/*.js"],
}


@dataclass(frozen=True)
class CorpusSpec:
    name: str
    seed: int
    files: int
    blocks_per_file: int
    seeds: int


CORPORA = (
    CorpusSpec("ledger", 11, 6, 9, 14),
    CorpusSpec("inventory", 23, 12, 11, 32),
    CorpusSpec("scheduler", 37, 20, 15, 56),
)

# Clean blocks. {n} is a unique suffix; every block defines the names it lists.
CLEAN = [
    ("sum{n}", """\
/**
 * Add up a list of numbers.
 * @param {number[]} values
 * @returns {number}
 */
function sum{n}(values) {
  let total = 0;
  for (const v of values) {
    total += v;
  }
  return total;
}
"""),
    ("Counter{n}", """\
class Counter{n} {
  constructor(start) {
    this.count = start || 0;
  }

  /** @param {number} step */
  bump(step) {
    this.count += step;
    return this.count;
  }
}
"""),
    ("label{n}", """\
/**
 * @param {string} name
 * @param {number} qty
 */
function label{n}(name, qty) {
  return `${name}: ${qty} item${qty === 1 ? "" : "s"}`;
}
"""),
    ("slug{n}", """\
// lower-case, dash separated
function slug{n}(text) {
  return String(text).toLowerCase().replace(/[^a-z0-9]+/g, "-").replace(/^-|-$/g, "");
}
"""),
    ("ratio{n}", """\
const ratio{n} = (a, b) => a / b / 2;
const half{n} = ratio{n}(10, 1) / 2; // not a regex: 10 / 1 / 2 / 2
"""),
    ("merge{n}", """\
const defaults{n} = { retries: 3, delay: 250, verbose: false };

function merge{n}(opts) {
  return Object.assign({}, defaults{n}, opts);
}
"""),
    ("kind{n}", """\
/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind{n}(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}
"""),
    ("group{n}", """\
/**
 * @param {Array<{ key: string, value: number }>} rows
 */
function group{n}(rows) {
  const out = {};
  for (const row of rows) {
    out[row.key] = (out[row.key] || 0) + row.value;
  }
  return out;
}
"""),
    ("parse{n}", """\
function parse{n}(text) {
  try {
    return JSON.parse(text);
  } catch (err) {
    return null;
  }
}
"""),
    ("unique{n}", """\
/**
 * @template T
 * @param {T[]} items
 * @returns {T[]}
 */
function unique{n}(items) {
  const seen = new Set();
  return items.filter((item) => {
    if (seen.has(item)) return false;
    seen.add(item);
    return true;
  });
}
"""),
    ("banner{n}", """\
/*
 * Banner text spans lines on purpose.
 */
const banner{n} = `
  ==== report ====
  generated ${new Date(0).toISOString()}
`;
"""),
    ("memo{n}", """\
function memo{n}(fn) {
  const cache = new Map();
  return function (key) {
    if (!cache.has(key)) {
      cache.set(key, fn(key));
    }
    return cache.get(key);
  };
}
"""),
    ("Queue{n}", """\
class Queue{n} {
  constructor() {
    this.items = [];
  }

  push(item) {
    this.items.push(item);
    return this;
  }

  shift() {
    return this.items.length ? this.items.shift() : undefined;
  }

  get size() {
    return this.items.length;
  }
}
"""),
    ("pad{n}", """\
function pad{n}(value, width) {
  let s = String(value);
  while (s.length < width) s = "0" + s;
  return s;
}
"""),
]

# Seeded error sites. A line ending in "  #!" is where the error is reported.
SEEDS = [
    ("TS2322", ("wrong{n}", "/** @type {number} */\nlet wrong{n} = \"text\";  #!\n")),
    ("TS2345", ("sq{n}", "/** @param {number} n */\nfunction square{n}(n) { return n * n; }\nconst sq{n} = square{n}(\"4\");  #!\n")),
    ("TS2554", ("sq{n}", "/** @param {number} n */\nfunction square{n}(n) { return n * n; }\nconst sq{n} = square{n}(1, 2);  #!\n")),
    ("TS2551", ("size{n}", "const size{n} = [1, 2].lenght;  #!\n")),
    ("TS2304", ("v{n}", "const v{n} = notDefinedAnywhere{n} + 1;  #!\n")),
    ("TS2552", ("m{n}", "const m{n} = Mathh.max(1, 2);  #!\n")),
    ("TS2349", ("k{n}", "const k{n} = 5;\nk{n}();  #!\n")),
    ("TS2362", ("d{n}", "/** @type {string} */\nconst s{n} = \"a\";\nconst d{n} = s{n} - 1;  #!\n")),
    ("TS2367", ("c{n}", "/** @type {number} */\nconst c{n} = 3;\nif (c{n} === \"3\") {  #!\n  util.words(\"three\");\n}\n")),
    ("TS2741", ("pt{n}", "/** @type {{ a: number, b: number }} */\nconst pt{n} = { a: 1 };  #!\n")),
    ("TS2353", ("only{n}", "/** @type {{ a: number }} */\nconst only{n} = { a: 1, extra: 2 };  #!\n")),
    ("TS2588", ("fixed{n}", "const fixed{n} = 1;\nfixed{n} = 2;  #!\n")),
    ("TS2403", ("dup{n}", "var dup{n} = 1;\nvar dup{n} = \"one\";  #!\n")),
    ("TS2695", ("pair{n}", "const pair{n} = (1, 2);  #!\n")),
    ("TS2358", ("inst{n}", "const inst{n} = 5 instanceof Object;  #!\n")),
    ("TS2448", ("early{n}", "const early{n} = late{n} + 1;  #!\nconst late{n} = 2;\n")),
    ("TS2365", ("bo{n}", "const bo{n} = true + 1;  #!\n")),
    ("TS2555", ("atl{n}", "/** @param {string} a @param {...number} rest */\nfunction atl{n}(a, ...rest) { return a + rest.length; }\natl{n}();  #!\n")),
    ("TS2351", ("nn{n}", "const kk{n} = 7;\nconst nn{n} = new kk{n}();  #!\n")),
    ("TS2339", ("ro{n}", "/** @type {readonly number[]} */\nconst ro{n} = [1];\nro{n}.push(2);  #!\n")),
    # across files: the helper lives in util.js
    ("TS2345", ("cl{n}", "const cl{n} = util.clamp(\"5\", 0, 10);  #!\n")),
    ("TS2554", ("cl{n}", "const cl{n} = util.clamp(5);  #!\n")),
]

UTIL = """\
/**
 * Shared helpers.
 */

/**
 * Keep a number inside a range.
 * @param {number} value
 * @param {number} lo
 * @param {number} hi
 * @returns {number}
 */
function clamp(value, lo, hi) {
  return Math.min(hi, Math.max(lo, value));
}

/**
 * @param {string} text
 * @returns {string[]}
 */
function words(text) {
  return text.split(/\\s+/).filter(Boolean);
}

module.exports = { clamp, words };
"""


def _render(template: str, n: str) -> tuple[list[str], list[int]]:
    lines, marks = [], []
    for i, line in enumerate(template.replace("{n}", n).splitlines()):
        if line.endswith("  #!"):
            line = line[: -len("  #!")]
            marks.append(i)
        lines.append(line)
    return lines, marks


def generate(spec: CorpusSpec) -> tuple[dict[str, str], list[dict]]:
    """Return {relative path: content} and the seed design."""
    rng = random.Random(spec.seed)
    paths = []
    for i in range(spec.files):
        sub = "src/lib" if i % 3 == 2 else "src"
        paths.append(f"{sub}/{spec.name}_{i:02d}.js")
    # spread seeds over files, using every code before repeating any
    codes = list(range(len(SEEDS)))
    rng.shuffle(codes)
    plan: dict[int, list[int]] = {i: [] for i in range(spec.files)}
    for k in range(spec.seeds):
        plan[rng.randrange(spec.files)].append(codes[k % len(codes)])

    files = {"src/util.js": UTIL}
    design = []
    for i, path in enumerate(paths):
        util_path = "./util" if path.startswith("src/") and path.count("/") == 1 else "../util"
        out = [f"// {spec.name} module {i}", "\"use strict\";", "",
               f"const util = require(\"{util_path}\");", ""]
        exported = ["util"]
        items = [("clean", rng.randrange(len(CLEAN))) for _ in range(spec.blocks_per_file)]
        items += [("seed", s) for s in plan[i]]
        rng.shuffle(items)
        for j, (kind, idx) in enumerate(items):
            n = f"_{i}_{j}"
            name, template = (CLEAN if kind == "clean" else [s[1] for s in SEEDS])[idx]
            lines, marks = _render(template, n)
            for m in marks:
                design.append({"path": path, "line": len(out) + m + 1, "code": SEEDS[idx][0]})
            out.extend(lines)
            out.append("")
            exported.append(name.replace("{n}", n))
        out.append(f"module.exports = {{ {', '.join(exported)} }};")
        files[path] = "\n".join(out) + "\n"
    design.sort(key=lambda d: (d["path"], d["line"]))
    return files, design


def write(spec: CorpusSpec, out: Path) -> list[dict]:
    root = out / spec.name
    if root.exists():
        shutil.rmtree(root)
    files, design = generate(spec)
    for rel, text in files.items():
        (root / rel).parent.mkdir(parents=True, exist_ok=True)
        (root / rel).write_text(text, encoding="utf-8")
    (out / f"{spec.name}.seeds.json").write_text(json.dumps(design, indent=1) + "\n", encoding="utf-8")
    return design


def verify(spec: CorpusSpec, out: Path, design: list[dict], tsc: str) -> bool:
    """Run tsc on a scratch copy and compare with the design."""
    scratch = out / f".{spec.name}-check"
    if scratch.exists():
        shutil.rmtree(scratch)
    shutil.copytree(out / spec.name, scratch)
    (scratch / "tsconfig.json").write_text(json.dumps(TSCONFIG), encoding="utf-8")
    proc = subprocess.run([tsc, "-p", "tsconfig.json", "--pretty", "false"], cwd=scratch,
                          capture_output=True, text=True)
    shutil.rmtree(scratch)
    (out / f"{spec.name}.expected.txt").write_text(proc.stdout, encoding="utf-8")
    got = []
    for line in proc.stdout.splitlines():
        if line.startswith(" ") or "): error " not in line:
            continue
        loc, _, rest = line.partition("): error ")
        path, _, pos = loc.rpartition("(")
        got.append({"path": path, "line": int(pos.split(",")[0]), "code": rest.split(":")[0]})
    got.sort(key=lambda d: (d["path"], d["line"]))
    if got != design:
        missing = [d for d in design if d not in got]
        extra = [d for d in got if d not in design]
        print(f"{spec.name}: design mismatch\n  missing {missing}\n  extra {extra}", file=sys.stderr)
        return False
    return True


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("tests/fixtures/corpora"))
    ap.add_argument("--verify", action="store_true", help="check the design against tsc")
    ap.add_argument("--tsc", default="tsc")
    args = ap.parse_args(argv)
    ok = True
    for spec in CORPORA:
        design = write(spec, args.out)
        loc = sum(1 for p in (args.out / spec.name).rglob("*.js")
                  for line in p.read_text().splitlines() if line.strip())
        codes = sorted({d["code"] for d in design})
        print(f"{spec.name}: {loc} LOC, {len(design)} seeded errors, {len(codes)} codes")
        if args.verify:
            ok = verify(spec, args.out, design, args.tsc) and ok
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
