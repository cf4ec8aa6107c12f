"""One agent session per file, with every edit gated by the fingerprint hook.

A session hands the file and its diagnostics to a backend and executes the
tool calls it sends back. Backends talk in the same frames whether they run
in-process or as a subprocess speaking newline-delimited JSON:

    to backend:   {"v": 1, "type": "turn", "session", "file", "content",
                   "diagnostics": [...], "attempt", "last_verdict"}
                  {"v": 1, "type": "result", "session", "name", "args",
                   "result" | "error"}
    from backend: {"v": 1, "type": "tool", "name", "args", "usage": {"in", "out"}}

Tools are ``read_file``, ``edit_file``, ``check_file`` and ``finish``. When a
backend finishes or runs out of turns, the file is re-checked and any errors
left send it around again, up to ``max_attempts`` times.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import os
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol

from .checker import UNUSED_DIRECTIVE_CODE, Diagnostic
from .fingerprint import Fingerprint, LexError, TokenDiff, fingerprint, restricted_breaks, token_diff
from .suppression import (
    Suppression,
    SuppressionCategory,
    SuppressionError,
    anchor_hash,
    insert_suppression,
    one_line,
    parse_directive,
    remove_directive,
)
from .workspace import MISSING_DECLARATION_CODES, resolve_missing_types

PROTOCOL_VERSION = 1
TOOLS = ("read_file", "edit_file", "check_file", "finish")

DEFAULT_MAX_TURNS = 30
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_TURN_TIMEOUT = 120.0

# Argument-count and nonexistent-property errors usually point at real bugs.
DEFAULT_CLASSIFICATION = {
    "TS2554": SuppressionCategory.BUG,
    "TS2555": SuppressionCategory.BUG,
    "TS2339": SuppressionCategory.BUG,
    "TS2551": SuppressionCategory.BUG,
}


class BackendError(RuntimeError):
    """The backend crashed, timed out or broke the protocol."""


class HookMode(str, Enum):
    REJECT = "reject"
    ALERT = "alert"


class HookReason(str, Enum):
    BEHAVIOR_CHANGE = "behavior_change"
    LEXICAL_ERROR = "lexical_error"
    FOREIGN_PATH = "foreign_path"


class Status(str, Enum):
    RESOLVED = "resolved"
    EXHAUSTED = "exhausted"
    BACKEND_FAILURE = "backend_failure"
    INTERRUPTED = "interrupted"


@dataclass(frozen=True)
class WorkOrder:
    path: str
    diagnostics: tuple[Diagnostic, ...]
    attempt: int = 0
    max_turns: int = DEFAULT_MAX_TURNS
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        if not 0 <= self.attempt < self.max_attempts:
            raise ValueError("attempt must be below max_attempts")
        if self.max_turns < 1:
            raise ValueError("max_turns must be positive")
        if any(d.path != self.path for d in self.diagnostics):
            raise ValueError(f"work order for {self.path} holds diagnostics of other files")


@dataclass(frozen=True)
class EditProposal:
    path: str
    new_content: str


@dataclass(frozen=True)
class HookVerdict:
    accepted: bool
    reason: HookReason | None = None
    diff: TokenDiff | None = None
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "reason": self.reason.value if self.reason else None,
            "diff": [e.render() for e in self.diff.edits] if self.diff else [],
            "detail": self.detail,
        }


def _resolve_in_root(root: Path, path: str) -> Path:
    full = (root / path).resolve()
    if root.resolve() not in full.parents:
        raise ValueError(f"{path} is outside the repository")
    return full


def apply_edit_hooked(proposal: EditProposal, baseline: Fingerprint, mode: HookMode = HookMode.REJECT,
                      *, owned_path: str, root: Path) -> HookVerdict:
    """Write ``proposal`` only if it keeps the token stream of ``baseline``.

    ``baseline`` is the fingerprint taken when the run started, so a chain of
    small edits cannot drift away from the original behavior. In alert mode a
    behavior-changing edit is written anyway and the verdict carries the diff.
    """
    if proposal.path != owned_path:
        return HookVerdict(False, HookReason.FOREIGN_PATH, detail=f"session owns {owned_path} only")
    try:
        after = fingerprint(proposal.new_content)
    except LexError as exc:
        return HookVerdict(False, HookReason.LEXICAL_ERROR, detail=str(exc))
    target = _resolve_in_root(Path(root), proposal.path)
    detail = ""
    if after == baseline:
        moved = _moved_breaks(baseline, after)
        if not moved:
            target.write_bytes(proposal.new_content.encode("utf-8"))
            return HookVerdict(True)
        diff, detail = TokenDiff(()), "; ".join(moved)
    else:
        diff = token_diff(baseline, after)
    if mode is HookMode.ALERT:
        target.write_bytes(proposal.new_content.encode("utf-8"))
        return HookVerdict(True, HookReason.BEHAVIOR_CHANGE, diff, detail)
    return HookVerdict(False, HookReason.BEHAVIOR_CHANGE, diff, detail)


def _moved_breaks(baseline: Fingerprint, after: Fingerprint) -> list[str]:
    old, new = restricted_breaks(baseline), restricted_breaks(after)
    out = []
    for i in sorted(old ^ new):
        tok, prev = after.tokens[i], after.tokens[i - 1]
        change = "added" if i in new else "removed"
        out.append(f"line {prev.line}: line break between {prev.lexeme!r} and {tok.lexeme!r} {change}")
    return out


class AgentBackend(Protocol):
    def exchange(self, frame: dict) -> dict: ...

    def close(self) -> None: ...


@dataclass
class SessionOutcome:
    path: str
    status: Status
    suppressions_added: list[Suppression] = field(default_factory=list)
    turns_used: int = 0
    attempts: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    transcript: list[dict] = field(default_factory=list)
    verdicts: list[HookVerdict] = field(default_factory=list)
    remaining: tuple[Diagnostic, ...] = ()
    reported_types: list[tuple[str, str]] = field(default_factory=list)
    error: str = ""


def _line_map(old: list[str], new: list[str]) -> dict[int, int]:
    """Map 1-based old line numbers to new ones for lines kept verbatim."""
    out = {}
    sm = difflib.SequenceMatcher(None, old, new, autojunk=False)
    for a, b, size in sm.get_matching_blocks():
        for k in range(size):
            out[a + k + 1] = b + k + 1
    return out


class _Tracker:
    """Follows diagnostics through edits to audit inserted directives."""

    def __init__(self, path: str, content: str, diags):
        self.path = path
        self.content = content
        self.diags = list(diags)

    def reset(self, content: str, diags):
        self.content = content
        self.diags = list(diags)

    def apply(self, new_content: str):
        old_lines = self.content.split("\n")
        new_lines = new_content.split("\n")
        mapping = _line_map(old_lines, new_lines)
        inverse = {v: k for k, v in mapping.items()}
        added, removed = [], []
        for j, text in enumerate(new_lines, start=1):
            if j in inverse:
                continue
            parsed = parse_directive(text)
            if parsed is None:
                continue
            anchor_new = j + 1
            old_anchor = inverse.get(anchor_new)
            covered = [d for d in self.diags if old_anchor is not None and d.line == old_anchor]
            anchor_text = new_lines[anchor_new - 1] if anchor_new <= len(new_lines) else ""
            added.append((anchor_new, parsed, covered, anchor_text.rstrip("\r")))
        for i, text in enumerate(old_lines, start=1):
            if i not in mapping and parse_directive(text) is not None:
                removed.append((i, text.rstrip("\r")))
        self.diags = [
            Diagnostic(d.path, mapping[d.line], d.column, d.code, d.message, d.severity)
            for d in self.diags if d.line in mapping
        ]
        self.content = new_content
        return added, removed


class _NullEvents:
    def emit(self, type_: str, **fields):
        pass


def _turn_frame(session: str, path: str, content: str, diags, attempt: int, verdict) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": "turn",
        "session": session,
        "file": path,
        "content": content,
        "diagnostics": [d.to_json() for d in diags],
        "attempt": attempt,
        "last_verdict": verdict.to_json() if verdict else None,
    }


def _validate_call(frame) -> tuple[str, dict, int, int]:
    if not isinstance(frame, dict) or frame.get("type") != "tool" or frame.get("v") != PROTOCOL_VERSION:
        raise BackendError(f"malformed tool frame: {frame!r:.200}")
    name = frame.get("name")
    if name not in TOOLS:
        raise BackendError(f"unknown tool {name!r}")
    args = frame.get("args") or {}
    if not isinstance(args, dict):
        raise BackendError("tool args must be an object")
    usage = frame.get("usage") or {}
    try:
        return name, args, int(usage.get("in", 0)), int(usage.get("out", 0))
    except (TypeError, ValueError, AttributeError) as exc:
        raise BackendError(f"bad usage field: {usage!r}") from exc


def run_session(order: WorkOrder, backend: AgentBackend, *, root: Path, baseline: Fingerprint,
                checker, hook_mode: HookMode = HookMode.REJECT, events=None,
                session_id: str = "s0", stop: threading.Event | None = None) -> SessionOutcome:
    """Drive one backend over one file until it is clean or out of budget.

    ``checker`` is anything with ``check(scope) -> ErrorSnapshot``. The caller
    must own ``order.path`` exclusively for the duration.
    """
    root = Path(root)
    events = events or _NullEvents()
    path = order.path
    file = _resolve_in_root(root, path)
    outcome = SessionOutcome(path, Status.EXHAUSTED)
    diags = tuple(d for d in order.diagnostics if d.severity == "error")
    if not diags:
        outcome.status = Status.RESOLVED
        return outcome

    def read_own() -> str:
        return file.read_bytes().decode("utf-8")

    tracker = _Tracker(path, read_own(), diags)
    verdict: HookVerdict | None = None

    def run_tool(name: str, args: dict):
        nonlocal verdict
        target = args.get("path", path)
        if not isinstance(target, str):
            raise BackendError("path argument must be a string")
        if name == "read_file":
            return {"path": target, "content": _resolve_in_root(root, target).read_bytes().decode("utf-8")}
        if name == "check_file":
            snap = checker.check(target)
            if target == path:
                tracker.reset(read_own(), snap.for_file(path))
            return {"path": target, "diagnostics": [d.to_json() for d in snap.for_file(target)]}
        content = args.get("content")
        if not isinstance(content, str):
            raise BackendError("edit_file needs a string content argument")
        verdict = apply_edit_hooked(EditProposal(target, content), baseline, hook_mode,
                                    owned_path=path, root=root)
        outcome.verdicts.append(verdict)
        events.emit("hook_verdict", session=session_id, path=path, **verdict.to_json())
        if verdict.accepted:
            added, removed = tracker.apply(content)
            for anchor, (category, explanation), covered, anchor_text in added:
                record = dict(session=session_id, path=path, anchor_line=anchor,
                              category=category.value, explanation=explanation,
                              anchor_hash=anchor_hash(anchor_text),
                              codes=sorted({d.code for d in covered}),
                              covered=[list(d.key) for d in covered])
                if covered:
                    outcome.suppressions_added.append(Suppression(
                        path, anchor, category, explanation, tuple(sorted({d.code for d in covered}))))
                    events.emit("suppression_added", **record)
                else:
                    events.emit("suppression_unaudited", **record)
            for line, text in removed:
                events.emit("suppression_removed", session=session_id, path=path, line=line, text=text)
        return verdict.to_json()

    events.emit("session_started", session=session_id, path=path, errors=len(diags),
                max_turns=order.max_turns, max_attempts=order.max_attempts)
    try:
        for attempt in range(order.attempt, order.max_attempts):
            outcome.attempts += 1
            frame = _turn_frame(session_id, path, read_own(), diags, attempt, verdict)
            used = 0
            edits_before = len(outcome.verdicts)
            while used < order.max_turns:
                if stop is not None and stop.is_set():
                    outcome.status = Status.INTERRUPTED
                    break
                try:
                    reply = backend.exchange(frame)
                except BackendError:
                    raise
                except Exception as exc:
                    raise BackendError(f"backend crashed: {exc}") from exc
                name, args, t_in, t_out = _validate_call(reply)
                outcome.tokens_in += t_in
                outcome.tokens_out += t_out
                if name == "finish":
                    break
                used += 1
                outcome.turns_used += 1
                entry = {"turn": outcome.turns_used, "attempt": attempt, "name": name,
                         "path": args.get("path", path)}
                try:
                    result = run_tool(name, args)
                    frame = {"v": PROTOCOL_VERSION, "type": "result", "session": session_id,
                             "name": name, "args": _summarize(args), "result": result}
                    entry["ok"] = True
                except (OSError, ValueError, UnicodeDecodeError) as exc:
                    frame = {"v": PROTOCOL_VERSION, "type": "result", "session": session_id,
                             "name": name, "args": _summarize(args), "error": str(exc)}
                    entry["ok"] = False
                outcome.transcript.append(entry)
                events.emit("tool_call", session=session_id, **entry)
            if outcome.status is Status.INTERRUPTED:
                break
            snap = checker.check(path)
            diags = snap.for_file(path)
            tracker.reset(read_own(), diags)
            events.emit("verification", session=session_id, path=path, attempt=attempt, remaining=len(diags))
            if not diags:
                outcome.status = Status.RESOLVED
                break
            if len(outcome.verdicts) == edits_before:
                break  # nothing proposed; another attempt would see the same file
    except BackendError as exc:
        outcome.status = Status.BACKEND_FAILURE
        outcome.error = str(exc)
    finally:
        try:
            backend.close()
        except Exception:
            pass
    outcome.remaining = tuple(diags) if outcome.status is not Status.RESOLVED else ()
    reported = getattr(backend, "reported_types", None)
    if reported:
        outcome.reported_types = list(reported)
    events.emit("session_finished", session=session_id, path=path, status=outcome.status.value,
                turns=outcome.turns_used, attempts=outcome.attempts, tokens_in=outcome.tokens_in,
                tokens_out=outcome.tokens_out, remaining=len(outcome.remaining), error=outcome.error)
    return outcome


def _summarize(args: dict) -> dict:
    out = dict(args)
    if isinstance(out.get("content"), str):
        data = out.pop("content").encode("utf-8")
        out["content_sha256"] = hashlib.sha256(data).hexdigest()
        out["content_bytes"] = len(data)
    return out


def load_classification(path: Path | None) -> tuple[dict[str, SuppressionCategory], SuppressionCategory]:
    """Read a code -> category map; the ``"*"`` key sets the fallback."""
    mapping = dict(DEFAULT_CLASSIFICATION)
    fallback = SuppressionCategory.VALID_PATTERN
    if path is None:
        return mapping, fallback
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    for code, cat in raw.items():
        if code == "*":
            fallback = SuppressionCategory.parse(cat)
        else:
            mapping[code] = SuppressionCategory.parse(cat)
    return mapping, fallback


def explain(diags, category: SuppressionCategory) -> str:
    codes = ", ".join(sorted({d.code for d in diags}))
    first = "; ".join(dict.fromkeys(d.message.splitlines()[0] for d in diags))
    if category is SuppressionCategory.BUG:
        return one_line(f"{codes} needs review, likely bug: {first}")
    return one_line(f"{codes} {first}")


def plan_edits(content: str, diags, classification=None,
               fallback: SuppressionCategory = SuppressionCategory.VALID_PATTERN,
               missing_codes=MISSING_DECLARATION_CODES) -> tuple[list[str], list[tuple[str, str]]]:
    """The scripted policy as a pure function.

    Returns the successive whole-file contents to propose, one per edit, and
    the types packages to report instead of suppressing. Unused tool
    directives are dropped first; then every other error line gets one
    directive, working bottom-to-top so earlier insertions never shift the
    lines still to be handled.
    """
    classification = DEFAULT_CLASSIFICATION if classification is None else classification
    errors = [d for d in diags if d.severity == "error"]
    reported = resolve_missing_types([d for d in errors if d.code in missing_codes], missing_codes)
    contents = []
    current = content
    lines = current.split("\n")
    unused = sorted(n for n in {d.line for d in errors if d.code == UNUSED_DIRECTIVE_CODE}
                    if n <= len(lines) and parse_directive(lines[n - 1]) is not None)
    removed = []
    for n in reversed(unused):
        try:
            current = remove_directive(current, n)
        except SuppressionError:
            continue
        removed.append(n)
        contents.append(current)
    by_line: dict[int, list[Diagnostic]] = {}
    for d in errors:
        if d.code in missing_codes or d.code == UNUSED_DIRECTIVE_CODE:
            continue
        by_line.setdefault(d.line, []).append(d)
    for line in sorted(by_line, reverse=True):
        shifted = line - sum(1 for r in removed if r < line)
        group = by_line[line]
        category = fallback
        if any(classification.get(d.code) is SuppressionCategory.BUG for d in group):
            category = SuppressionCategory.BUG
        elif any(d.code in classification for d in group):
            category = classification[next(d.code for d in group if d.code in classification)]
        s = Suppression("", shifted, category, explain(group, category),
                        tuple(sorted({d.code for d in group})))
        try:
            current = insert_suppression(current, shifted, s)
        except (SuppressionError, LexError):
            continue
        contents.append(current)
    return contents, reported


class ScriptedBackend:
    """Deterministic, model-free backend: suppress and classify, never fix."""

    def __init__(self, classification=None, fallback=SuppressionCategory.VALID_PATTERN,
                 missing_codes=MISSING_DECLARATION_CODES):
        self.classification = DEFAULT_CLASSIFICATION if classification is None else classification
        self.fallback = fallback
        self.missing_codes = missing_codes
        self.pending: list[dict] = []
        self.reported_types: list[tuple[str, str]] = []

    def exchange(self, frame: dict) -> dict:
        if frame["type"] == "turn":
            diags = [Diagnostic.from_json(d) for d in frame["diagnostics"]]
            contents, reported = plan_edits(frame["content"], diags, self.classification,
                                            self.fallback, self.missing_codes)
            self.reported_types = sorted(set(self.reported_types) | set(reported))
            self.pending = [_tool("edit_file", path=frame["file"], content=c) for c in contents]
        if self.pending:
            return self.pending.pop(0)
        return _tool("finish")

    def close(self):
        pass


def _tool(name: str, **args) -> dict:
    return {"v": PROTOCOL_VERSION, "type": "tool", "name": name, "args": args}


class ExternalBackend:
    """A backend process speaking the JSON-lines protocol on stdin/stdout.

    The process inherits the environment, so credentials for whatever model
    it wraps pass through untouched.
    """

    def __init__(self, command: list[str] | str, timeout: float = DEFAULT_TURN_TIMEOUT, cwd: Path | None = None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.cwd = cwd
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()

    def _start(self):
        self.proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            cwd=self.cwd, env=os.environ.copy(), text=True, encoding="utf-8", bufsize=1,
        )
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def exchange(self, frame: dict) -> dict:
        if self.proc is None:
            self._start()
        try:
            self.proc.stdin.write(json.dumps(frame) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend process closed its input: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise BackendError(f"backend did not answer within {self.timeout}s") from None
        if line is None:
            raise BackendError(f"backend exited with status {self.proc.wait()}")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed frame: {line.strip()[:200]}") from exc

    def close(self):
        if self.proc is None:
            return
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        self.proc = None
