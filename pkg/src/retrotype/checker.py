"""Adapter around the external type checker (``tsc``).

The checker runs as a subprocess with plain output. Its diagnostics are parsed
line by line with the grammar

    <path>(<line>,<col>): <severity> <CODE>: <message>

where indented lines that follow a diagnostic continue its message.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

DIAGNOSTIC_RE = re.compile(
    r"^(?P<path>\S.*?)\((?P<line>\d+),(?P<col>\d+)\): "
    r"(?P<severity>error|warning) (?P<code>[A-Z]+\d+): (?P<message>.*)$"
)
_GLOBAL_RE = re.compile(r"^(?:error|warning) (?P<code>[A-Z]+\d+): (?P<message>.*)$")
CODE_RE = re.compile(r"^[A-Z]+\d+$")

UNUSED_DIRECTIVE_CODE = "TS2578"


class CheckerError(RuntimeError):
    """The checker could not produce a usable snapshot."""

    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


class CheckerNotFound(CheckerError):
    pass


@dataclass(frozen=True, order=True)
class Diagnostic:
    path: str
    line: int
    column: int
    code: str
    message: str
    severity: str = "error"

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"diagnostic position must be 1-based: {self}")
        if not CODE_RE.match(self.code):
            raise ValueError(f"malformed diagnostic code {self.code!r}")

    def render(self) -> str:
        return f"{self.path}({self.line},{self.column}): {self.severity} {self.code}: {self.message}"

    @property
    def key(self) -> tuple[str, str, str]:
        """Position-free identity used when diffing snapshots."""
        return (self.path, self.code, normalize_message(self.message))

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "line": self.line,
            "column": self.column,
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, d: dict) -> Diagnostic:
        return cls(d["path"], d["line"], d["column"], d["code"], d["message"], d.get("severity", "error"))


def normalize_message(message: str) -> str:
    return " ".join(message.split())


def parse_diagnostic_line(line: str) -> Diagnostic | None:
    m = DIAGNOSTIC_RE.match(line.rstrip("\r\n"))
    if m is None:
        return None
    return Diagnostic(
        path=m["path"],
        line=int(m["line"]),
        column=int(m["col"]),
        code=m["code"],
        message=m["message"],
        severity=m["severity"],
    )


def parse_output(text: str) -> tuple[list[Diagnostic], list[str]]:
    """Parse a whole checker transcript.

    Returns the diagnostics (continuation lines folded into messages) and the
    project-level error lines that carry no file position, such as
    ``error TS2688: Cannot find type definition file for 'node'.``
    """
    diags: list[Diagnostic] = []
    global_errors: list[str] = []
    current: Diagnostic | None = None
    continuation: list[str] = []

    def flush():
        nonlocal current, continuation
        if current is not None:
            if continuation:
                msg = "\n".join([current.message, *continuation])
                current = Diagnostic(current.path, current.line, current.column,
                                     current.code, msg, current.severity)
            diags.append(current)
        current, continuation = None, []

    in_global = False
    for raw in text.splitlines():
        line = raw.rstrip("\r")
        diag = parse_diagnostic_line(line)
        if diag is not None:
            flush()
            current, in_global = diag, False
        elif line[:1] in (" ", "\t") and line.strip() and (current is not None or in_global):
            if current is not None:
                continuation.append(line)
        else:
            flush()
            in_global = line.startswith("error") and _GLOBAL_RE.match(line) is not None
            if in_global:
                global_errors.append(line)
    flush()
    return diags, global_errors


_ANSI_RE = re.compile(r"\x1b\[[0-9;]*m")
_SUMMARY_RE = re.compile(
    r"^Found (?P<count>\d+) errors?"
    r"(?:(?P<dot>\.)| in (?P<files>\d+) files\.| in the same file, starting at: (?P<first>\S+)| in (?P<only>\S+))$"
)
_TABLE_ROW_RE = re.compile(r"^(?P<pad> *)(?P<count>\d+)  (?P<loc>\S.*)$")


def strip_ansi(text: str) -> str:
    return _ANSI_RE.sub("", text)


@dataclass(frozen=True)
class Summary:
    """The closing ``Found N errors ...`` line of a pretty-mode transcript."""

    errors: int
    files: int | None = None  # set for the "in N files." form
    first: str | None = None  # "path:line" of the first error
    same_file: bool = False

    def render(self) -> str:
        noun = "error" if self.errors == 1 else "errors"
        if self.files is not None:
            return f"Found {self.errors} {noun} in {self.files} files."
        if self.first is not None and self.same_file:
            return f"Found {self.errors} {noun} in the same file, starting at: {self.first}"
        if self.first is not None:
            return f"Found {self.errors} {noun} in {self.first}"
        return f"Found {self.errors} {noun}."


def parse_summary_line(line: str) -> Summary | None:
    m = _SUMMARY_RE.match(strip_ansi(line).rstrip("\r\n"))
    if m is None:
        return None
    count = int(m["count"])
    if m["files"] is not None:
        return Summary(count, files=int(m["files"]))
    if m["first"] is not None:
        return Summary(count, first=m["first"], same_file=True)
    if m["only"] is not None:
        return Summary(count, first=m["only"])
    return Summary(count)


@dataclass(frozen=True)
class SummaryRow:
    """One row of the per-file table that follows a multi-file summary."""

    errors: int
    location: str
    width: int = 6

    def render(self) -> str:
        return f"{self.errors:>{self.width}}  {self.location}"


def parse_summary_row(line: str) -> SummaryRow | None:
    m = _TABLE_ROW_RE.match(strip_ansi(line).rstrip("\r\n"))
    if m is None:
        return None
    return SummaryRow(int(m["count"]), m["loc"], len(m["pad"]) + len(m["count"]))


def _sort_key(d: Diagnostic):
    return (d.line, d.column, d.code, d.message)


@dataclass(frozen=True)
class ErrorSnapshot:
    by_file: dict[str, tuple[Diagnostic, ...]]
    warnings: tuple[Diagnostic, ...] = ()
    taken_at: float = field(default=0.0, compare=False)

    @classmethod
    def from_diagnostics(cls, diags, taken_at: float | None = None) -> ErrorSnapshot:
        by_file: dict[str, list[Diagnostic]] = {}
        warnings = []
        for d in diags:
            if d.severity == "error":
                by_file.setdefault(d.path, []).append(d)
            else:
                warnings.append(d)
        return cls(
            by_file={p: tuple(sorted(ds, key=_sort_key)) for p, ds in sorted(by_file.items())},
            warnings=tuple(sorted(warnings)),
            taken_at=time.monotonic() if taken_at is None else taken_at,
        )

    @property
    def total(self) -> int:
        return sum(len(ds) for ds in self.by_file.values())

    def errors(self) -> list[Diagnostic]:
        return [d for ds in self.by_file.values() for d in ds]

    def for_file(self, path: str) -> tuple[Diagnostic, ...]:
        return self.by_file.get(path, ())

    def restrict(self, path: str) -> ErrorSnapshot:
        return ErrorSnapshot({path: self.by_file[path]} if path in self.by_file else {},
                             tuple(w for w in self.warnings if w.path == path), self.taken_at)

    def count(self, code: str) -> int:
        return sum(1 for d in self.errors() if d.code == code)


@dataclass(frozen=True)
class SnapshotDiff:
    resolved: Counter
    introduced: Counter

    def __bool__(self):
        return bool(self.resolved or self.introduced)


def diff_snapshots(before: ErrorSnapshot, after: ErrorSnapshot) -> SnapshotDiff:
    """Resolved and introduced errors, keyed on (path, code, message).

    Line and column are ignored so that lines shifted by an inserted comment
    are not reported as churn.
    """
    b = Counter(d.key for d in before.errors())
    a = Counter(d.key for d in after.errors())
    return SnapshotDiff(resolved=b - a, introduced=a - b)


def resolve_checker(explicit: str | os.PathLike | None, root: Path) -> str:
    """Explicit path, then the project-local install, then PATH."""
    if explicit:
        p = Path(explicit)
        if p.is_file() and os.access(p, os.X_OK):
            return str(p)
        found = shutil.which(str(explicit))
        if found:
            return found
        raise CheckerNotFound(f"checker executable not found: {explicit}")
    local = root / "node_modules" / ".bin" / "tsc"
    if local.is_file() and os.access(local, os.X_OK):
        return str(local)
    found = shutil.which("tsc")
    if found is None:
        raise CheckerNotFound(
            "tsc not found; install it with `npm install --save-dev typescript` or pass --checker"
        )
    return found


_locks: dict[Path, threading.Lock] = {}
_locks_guard = threading.Lock()


def repo_lock(root: Path) -> threading.Lock:
    root = Path(root).resolve()
    with _locks_guard:
        return _locks.setdefault(root, threading.Lock())


def run_check(root: Path, scope: str | None = None, *, checker: str | None = None,
              config_name: str = "tsconfig.json", timeout: float = 600.0) -> ErrorSnapshot:
    """Run the checker over the whole project and parse its output.

    With ``scope`` set to a repo-relative path, the snapshot is filtered to
    that file. The check itself stays project-wide because types flow across
    files and an isolated check of one file would be unsound.
    """
    root = Path(root)
    exe = resolve_checker(checker, root)
    cmd = [exe, "-p", config_name, "--pretty", "false"]
    with repo_lock(root):
        try:
            proc = subprocess.run(cmd, cwd=root, capture_output=True, timeout=timeout)
        except FileNotFoundError as exc:
            raise CheckerNotFound(str(exc)) from exc
        except subprocess.TimeoutExpired as exc:
            raise CheckerError(f"checker timed out after {timeout}s") from exc
        taken = time.monotonic()
    out = proc.stdout.decode("utf-8", errors="replace")
    diags, global_errors = parse_output(out)
    if global_errors:
        raise CheckerError("checker reported project-level errors:\n" + "\n".join(global_errors), out)
    if proc.returncode != 0 and not diags:
        err = proc.stderr.decode("utf-8", errors="replace")
        raise CheckerError(f"checker exited {proc.returncode} without diagnostics", out + err)
    snap = ErrorSnapshot.from_diagnostics(diags, taken)
    return snap.restrict(scope) if scope is not None else snap


class CoalescingChecker:
    """Serializes checker runs for one repository and shares their results.

    A caller that asks for a check while another run is in flight waits for
    the next run to start after its request, so concurrent sessions asking at
    the same time are served by a single checker invocation. A run that began
    after the request has seen every edit made before it.
    """

    def __init__(self, root: Path, checker: str | None = None, config_name: str = "tsconfig.json"):
        self.root = Path(root)
        self.checker = checker
        self.config_name = config_name
        self.runs = 0
        self._cond = threading.Condition()
        self._running = False
        self._started = 0  # number of runs started
        self._results: dict[int, ErrorSnapshot | BaseException] = {}

    def check(self, scope: str | None = None) -> ErrorSnapshot:
        with self._cond:
            # any run numbered > needed_after started after this request
            needed_after = self._started
            while True:
                done = [n for n in self._results if n > needed_after]
                if done:
                    result = self._results[min(done)]
                    break
                if not self._running:
                    self._running = True
                    self._started += 1
                    ticket = self._started
                    self._cond.release()
                    try:
                        result = run_check(self.root, checker=self.checker, config_name=self.config_name)
                    except BaseException as exc:  # handed to every waiter
                        result = exc
                    finally:
                        self._cond.acquire()
                        self._running = False
                        self.runs += 1
                        self._results = {ticket: result}
                        self._cond.notify_all()
                    break
                self._cond.wait()
        if isinstance(result, BaseException):
            raise result
        return result.restrict(scope) if scope is not None else result
