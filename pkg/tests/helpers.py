"""Shared test utilities: source generators, the acorn oracle, test backends."""

from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

from hypothesis import strategies as st

from retrotype.agent import ScriptedBackend, _tool
from retrotype.workspace import Phase, scaffold_config

FIXTURES = Path(__file__).parent / "fixtures"
CORPORA = FIXTURES / "corpora"
CORPUS_NAMES = ("ledger", "inventory", "scheduler")
ACORN = Path("/usr/lib/node_modules/ts-node/node_modules/acorn")


def tsc_available() -> bool:
    return shutil.which("tsc") is not None


def copy_repo(src: Path, dst: Path, *, config: bool = True) -> Path:
    shutil.copytree(src, dst)
    if config:
        scaffold_config(Phase.MINIMAL_SETUP, dst)
    return dst


# ---------------------------------------------------------------------------
# Generated JavaScript. Each strategy yields the expected canonical lexemes;
# the renderer joins them with separators of the caller's choosing.

IDENTS = ["a", "b", "count", "total", "_x", "$el", "value2", "k", "π", "row"]
NUMBERS = ["0", "1", "42", "3.14", ".5", "1e3", "0x1F", "0b101", "0o17", "1_000", "10n", "2.5e-3"]
STRINGS = ['""', "''", '"abc"', "'it\\'s'", '"tab\\tq\\"uote"', "'//not a comment'",
           '"/* nor this */"', "'ü€'", '"a\\\\"']
REGEXES = ["/ab+c/", "/ab+c/gi", "/[/]/", "/\\//g", "/^\\s*$/m", "/a{2,3}?/u"]
BINOPS = ["+", "-", "*", "%", "/", "===", "<", ">=", "&&", "||", "??"]

ident = st.sampled_from(IDENTS)
number = st.sampled_from(NUMBERS)
string = st.sampled_from(STRINGS)
regex = st.sampled_from(REGEXES)
binop = st.sampled_from(BINOPS)

# built once: constructing strategies inside composites dominates generation time
_TEMPLATE_TEXT = st.sampled_from(["", "x", "a b", "50%", "\\`", "$", "{}", "\\${no}"])
_SUBSTITUTIONS = (st.integers(0, 2), st.integers(0, 1))
_ATOM_KINDS = (st.sampled_from(["ident", "number", "string", "paren", "member", "index", "template"]),
               st.sampled_from(["ident", "number", "string", "paren", "member", "index"]))
_TAIL = st.integers(0, 2)
_STATEMENT_KIND = st.integers(0, 7)
_PROGRAM_LENGTHS: dict[int, st.SearchStrategy] = {}


@st.composite
def template(draw, depth=0):
    """A template literal as canonical chunks plus substitution tokens."""
    text = _TEMPLATE_TEXT
    n = draw(_SUBSTITUTIONS[0 if depth == 0 else 1])
    if n == 0:
        return [f"`{draw(text)}`"]
    toks = [f"`{draw(text)}${{"]
    for i in range(n):
        toks += draw(expr(depth + 1))
        toks.append(f"}}{draw(text)}" + ("`" if i == n - 1 else "${"))
    return toks


@st.composite
def atom(draw, depth=0):
    kind = draw(_ATOM_KINDS[0 if depth < 2 else 1])
    if kind == "ident":
        return [draw(ident)]
    if kind == "number":
        return [draw(number)]
    if kind == "string":
        return [draw(string)]
    if kind == "template":
        return draw(template(depth))
    if kind == "paren":
        return ["(", draw(ident), "+", draw(number), ")"]
    if kind == "member":
        return [draw(ident), ".", draw(ident)]
    return [draw(ident), "[", draw(number), "]"]


@st.composite
def expr(draw, depth=0):
    toks = draw(atom(depth))
    for _ in range(draw(_TAIL)):
        toks += [draw(binop)] + draw(atom(depth))
    return toks


@st.composite
def statement(draw):
    kind = draw(_STATEMENT_KIND)
    if kind == 0:
        return ["let", draw(ident), "="] + draw(expr()) + [";"]
    if kind == 1:  # division, never a regex
        return [draw(ident), "=", draw(ident), "/", draw(number), "/", draw(ident), ";"]
    if kind == 2:
        return ["const", draw(ident), "=", draw(regex), ".", "test", "(", draw(string), ")", ";"]
    if kind == 3:
        return ["function", draw(ident), "(", draw(ident), ")", "{", "return"] + draw(expr()) + [";", "}"]
    if kind == 4:
        return (["if", "(", draw(ident), ">", draw(number), ")", "{", draw(ident), "(", ]
                + draw(expr()) + [",", draw(regex), ")", ";", "}"])
    if kind == 5:
        return [draw(ident), "=", "typeof", draw(regex), ";"]
    if kind == 6:
        return [draw(ident), "=", "(", draw(ident), ")", "=>", "{", "return", draw(ident), "/", "2", ";", "}"]
    return [draw(ident), "?.", draw(ident), "??=", draw(number), ";"]


@st.composite
def program(draw, max_statements=6):
    toks: list[str] = []
    lengths = _PROGRAM_LENGTHS.setdefault(max_statements, st.integers(1, max_statements))
    for _ in range(draw(lengths)):
        toks += draw(statement())
    return toks


COMMENTS = ["/* c */", "/** @type {number} */", "// note\n", "/*\n multi\n line */", "\n", "\t", "  ",
            "/* a // b */", "// @ts-expect-error -- [agentic-typer:valid] x\n"]
SEPARATORS = [" "] + COMMENTS
# one seeded Random per example: a draw per separator made generation the bottleneck
separator_rng = st.randoms(use_true_random=False)


def separators(rng, n: int) -> list[str]:
    return [rng.choice(SEPARATORS) for _ in range(n)]


def render(tokens: list[str], seps: list[str] | None = None) -> str:
    """Join tokens; ``seps[i]`` goes between token i and i+1 (default one space)."""
    out = []
    for i, t in enumerate(tokens):
        out.append(t)
        if i < len(tokens) - 1:
            # padded so a comment never fuses with a neighbouring "/"
            out.append(f" {seps[i]} " if seps else " ")
    return "".join(out)


def mutate_lexeme(lexeme: str) -> str | None:
    """A different lexeme of the same token kind, or None if not mutable."""
    if lexeme in ("+", "-", "*", "%"):
        return {"+": "-", "-": "*", "*": "%", "%": "+"}[lexeme]
    if lexeme in IDENTS:
        return lexeme + "q"
    if lexeme in NUMBERS:
        return "7" if lexeme != "7" else "8"
    if lexeme in STRINGS:
        return lexeme[0] + "Z" + lexeme[1:]
    if lexeme in REGEXES:
        return "/Z" + lexeme[1:]
    if lexeme.startswith("`") or lexeme.startswith("}") and len(lexeme) > 1:
        return lexeme[0] + "Z" + lexeme[1:]
    return None


# ---------------------------------------------------------------------------
# acorn as an independent tokenizer

_ACORN_SCRIPT = r"""
const acorn = require(process.argv[1]);
let input = "";
process.stdin.on("data", (d) => (input += d));
process.stdin.on("end", () => {
  const out = JSON.parse(input).map((src) => {
    try {
      const toks = [];
      for (const t of acorn.tokenizer(src, { ecmaVersion: "latest", allowHashBang: true })) {
        toks.push([t.type.label, t.start, t.end]);
      }
      return toks;
    } catch (e) {
      return { error: String(e) };
    }
  });
  process.stdout.write(JSON.stringify(out));
});
"""


def acorn_available() -> bool:
    return shutil.which("node") is not None and ACORN.exists()


def acorn_lexemes(sources: list[str]) -> list[list[str] | dict]:
    """Tokenize with acorn and merge template pieces into canonical chunks."""
    proc = subprocess.run(["node", "-e", _ACORN_SCRIPT, str(ACORN)], input=json.dumps(sources),
                          capture_output=True, text=True, check=True)
    results = []
    for src, toks in zip(sources, json.loads(proc.stdout)):
        if isinstance(toks, dict):
            results.append(toks)
            continue
        out: list[str] = []
        stack: list[str] = []
        i = 0
        while i < len(toks):
            label, start, end = toks[i]
            opens_chunk = label == "`" or (label == "}" and stack and stack[-1] == "t")
            if label == "}" and stack:
                stack.pop()
            if opens_chunk:
                # chunk = opener, template text, then "${" or "`"
                j = i + 1
                while toks[j][0] == "template":
                    j += 1
                closer = toks[j]
                if closer[0] == "${":
                    stack.append("t")
                out.append(src[start:closer[2]])
                i = j + 1
                continue
            if label in ("{", "${"):
                stack.append("b" if label == "{" else "t")
            out.append(src[start:end])
            i += 1
        results.append(out)
    return results


# ---------------------------------------------------------------------------
# test backends


class RewriteBackend(ScriptedBackend):
    """Applies one textual rewrite to a chosen file, then behaves like the scripted policy.

    Models a backend that fixes a root cause through an annotation change.
    """

    def __init__(self, rewrites: dict[str, tuple[str, str]], **kw):
        super().__init__(**kw)
        self.rewrites = rewrites
        self._turn = None

    def exchange(self, frame):
        if frame["type"] == "turn" and frame["file"] in self.rewrites:
            old, new = self.rewrites[frame["file"]]
            if old in frame["content"]:
                self._turn = dict(frame, content=frame["content"].replace(old, new))
                return _tool("edit_file", path=frame["file"], content=self._turn["content"])
        if self._turn is not None and frame["type"] == "result":
            turn, self._turn = self._turn, None
            # diagnostics in the turn frame are stale after the fix; ask the checker
            return _tool("check_file", path=turn["file"]) if frame["name"] == "edit_file" else \
                super().exchange(dict(turn, diagnostics=frame["result"]["diagnostics"]))
        return super().exchange(frame)


class AdversarialBackend(ScriptedBackend):
    """Opens every attempt with one behavior-changing edit, then suppresses."""

    def __init__(self, **kw):
        super().__init__(**kw)
        self._turn = None
        self.attempted = 0

    @staticmethod
    def sabotage(content: str) -> str:
        # flip the first strict equality; fall back to appending a statement
        if "===" in content:
            return content.replace("===", "!==", 1)
        return content + "\nglobalThis.tampered = 1;\n"

    def exchange(self, frame):
        if frame["type"] == "turn":
            self._turn = frame
            self.attempted += 1
            return _tool("edit_file", path=frame["file"], content=self.sabotage(frame["content"]))
        if self._turn is not None:
            turn, self._turn = self._turn, None
            return super().exchange(turn)
        return super().exchange(frame)
