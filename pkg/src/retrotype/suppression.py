"""Suppression directives: rendering, placement, cleanup and scanning.

A directive is a checked ``// @ts-expect-error`` comment on its own line,
tagged so the tool can tell its own directives from hand-written ones::

    // @ts-expect-error -- [agentic-typer:bug] argument count mismatch; review

It silences every error on the line below it, and the checker flags it
(TS2578) once that line no longer has an error.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .checker import UNUSED_DIRECTIVE_CODE, ErrorSnapshot
from .fingerprint import LexError, fingerprint, opaque_lines

TAG = "agentic-typer"
DIRECTIVE_RE = re.compile(
    r"^(?P<indent>[ \t]*)// @ts-expect-error -- \[agentic-typer:(?P<cat>bug|valid)\] (?P<expl>.+)$"
)
# Any checker directive comment, tagged or not.
_ANY_DIRECTIVE_RE = re.compile(r"^\s*//\s*@ts-(?:expect-error|ignore)\b")
_KEYWORD_RE = re.compile(r"@ts-expect-error\b")
_ANY_KEYWORD_RE = re.compile(r"@ts-(?:expect-error|ignore)\b")


class SuppressionError(ValueError):
    pass


class SuppressionCategory(Enum):
    BUG = "bug"
    VALID_PATTERN = "valid"

    @classmethod
    def parse(cls, text: str) -> SuppressionCategory:
        text = text.strip().lower()
        if text in ("valid_pattern", "valid-pattern"):
            return cls.VALID_PATTERN
        return cls(text)


@dataclass(frozen=True)
class Suppression:
    path: str
    anchor_line: int
    category: SuppressionCategory
    explanation: str
    suppressed_codes: tuple[str, ...]

    def __post_init__(self):
        if not self.explanation.strip() or any(c in self.explanation for c in "\r\n"):
            raise ValueError("explanation must be a non-empty single line")
        if not self.suppressed_codes:
            raise ValueError("a suppression must cover at least one diagnostic code")


@dataclass(frozen=True)
class Directive:
    """A tool directive found in a source file."""

    path: str
    line: int  # line of the comment itself
    category: SuppressionCategory
    explanation: str
    anchor_text: str

    @property
    def anchor_line(self) -> int:
        return self.line + 1

    @property
    def anchor_hash(self) -> str:
        return anchor_hash(self.anchor_text)


def anchor_hash(line_text: str) -> str:
    return hashlib.sha256(line_text.strip().encode("utf-8")).hexdigest()


def render_directive(s: Suppression, indent: str = "") -> str:
    if indent.strip(" \t"):
        raise ValueError("indent must be whitespace")
    return f"{indent}// @ts-expect-error -- [{TAG}:{s.category.value}] {s.explanation}"


def parse_directive(line: str) -> tuple[SuppressionCategory, str] | None:
    m = DIRECTIVE_RE.match(line.rstrip("\r\n"))
    if m is None:
        return None
    return SuppressionCategory(m["cat"]), m["expl"]


def one_line(text: str, limit: int = 160) -> str:
    """Collapse text to a single line usable as an explanation."""
    flat = " ".join(text.split())
    return flat if len(flat) <= limit else flat[: limit - 3].rstrip() + "..."


def _split(content: str) -> tuple[list[str], bool]:
    lines = content.split("\n")
    trailing = content.endswith("\n")
    if trailing:
        lines.pop()
    return lines, trailing


def _join(lines: list[str], trailing: bool) -> str:
    return "\n".join(lines) + ("\n" if trailing else "")


def is_directive_line(text: str) -> bool:
    return _ANY_DIRECTIVE_RE.match(text) is not None


def insert_suppression(content: str, line: int, s: Suppression) -> str:
    """Insert the directive for ``s`` directly above ``line`` (1-based)."""
    lines, trailing = _split(content)
    if not 1 <= line <= len(lines):
        raise SuppressionError(f"line {line} out of range 1..{len(lines)}")
    target = lines[line - 1]
    if is_directive_line(target):
        raise SuppressionError(f"line {line} is itself a directive")
    if line > 1 and is_directive_line(lines[line - 2]):
        raise SuppressionError(f"line {line} is already governed by a directive")
    if line in opaque_lines(content):
        raise SuppressionError(f"line {line} starts inside a comment or multi-line literal")
    indent = target[: len(target) - len(target.lstrip(" \t"))]
    directive = render_directive(s, indent)
    if target.endswith("\r"):
        directive += "\r"
    new = _join(lines[: line - 1] + [directive] + lines[line - 1:], trailing)
    if fingerprint(new) != fingerprint(content):
        raise SuppressionError(f"directive above line {line} would change the token stream")
    return new


@dataclass(frozen=True)
class Removal:
    path: str
    line: int
    text: str


def remove_directive(content: str, line: int) -> str:
    """Remove the directive comment on ``line``; the token stream is unchanged.

    A directive on its own line is deleted with its line. One trailing code
    on the same line is cut back to the code.
    """
    lines, trailing = _split(content)
    text = lines[line - 1]
    m = _KEYWORD_RE.search(text)
    if m is None:
        raise SuppressionError(f"no directive on line {line}")
    if is_directive_line(text):
        del lines[line - 1]
    else:
        start = text.rfind("//", 0, m.start())
        if start < 0:
            raise SuppressionError(f"cannot isolate the directive on line {line}")
        cr = "\r" if text.endswith("\r") else ""
        lines[line - 1] = text[:start].rstrip() + cr
    new = _join(lines, trailing)
    if fingerprint(new) != fingerprint(content):
        raise SuppressionError(f"removing line {line} would change the token stream")
    return new


def cleanup_unused(root: Path, snapshot: ErrorSnapshot, dry_run: bool = False) -> list[Removal]:
    """Delete every directive the checker reports as unused."""
    root = Path(root)
    removed = []
    for path, diags in snapshot.by_file.items():
        lines = sorted({d.line for d in diags if d.code == UNUSED_DIRECTIVE_CODE}, reverse=True)
        if not lines:
            continue
        file = root / path
        content = file.read_bytes().decode("utf-8")
        for n in lines:
            text = _split(content)[0][n - 1]
            try:
                content = remove_directive(content, n)
            except (SuppressionError, LexError, IndexError):
                continue
            removed.append(Removal(path, n, text.rstrip("\r")))
        if not dry_run:
            file.write_bytes(content.encode("utf-8"))
    removed.sort(key=lambda r: (r.path, r.line))
    return removed


@dataclass
class ScanResult:
    directives: list[Directive]
    foreign: list[tuple[str, int, str]]


def scan_content(path: str, content: str) -> ScanResult:
    directives, foreign = [], []
    lines, _ = _split(content)
    for i, text in enumerate(lines, start=1):
        if not _ANY_KEYWORD_RE.search(text):
            continue
        parsed = parse_directive(text)
        if parsed is None:
            if text.lstrip().startswith("//"):
                foreign.append((path, i, text.strip()))
            continue
        anchor = lines[i] if i < len(lines) else ""
        directives.append(Directive(path, i, parsed[0], parsed[1], anchor.rstrip("\r")))
    return ScanResult(directives, foreign)


def scan_suppressions(root: Path, paths) -> ScanResult:
    """Parse tool directives in ``paths``; untagged ones are listed as foreign."""
    root = Path(root)
    result = ScanResult([], [])
    for path in sorted(paths):
        try:
            content = (root / path).read_bytes().decode("utf-8")
        except (OSError, UnicodeDecodeError):
            continue
        part = scan_content(path, content)
        result.directives.extend(part.directives)
        result.foreign.extend(part.foreign)
    return result
