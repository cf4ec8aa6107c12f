"""A full phase-one run: snapshot, parallel sessions, verification rounds, cleanup."""

from __future__ import annotations

import logging
import threading
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agent import (
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MAX_TURNS,
    AgentBackend,
    HookMode,
    ScriptedBackend,
    SessionOutcome,
    Status,
    WorkOrder,
    run_session,
)
from .checker import CoalescingChecker, ErrorSnapshot
from .events import EventLog
from .fingerprint import LexError, fingerprint
from .suppression import cleanup_unused, scan_suppressions
from .workspace import (
    ConfigError,
    FileRecord,
    Phase,
    discover_sources,
    load_config,
    record_types_packages,
    resolve_missing_types,
    scaffold_config,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_UNRESOLVED, EXIT_ENV = 0, 1, 2


@dataclass
class RunPlan:
    phase: Phase = Phase.MINIMAL_SETUP
    parallelism: int = 10
    backend_factory: Callable[[], AgentBackend] = ScriptedBackend
    hook_mode: HookMode = HookMode.REJECT
    verification_rounds: int = 3
    max_turns: int = DEFAULT_MAX_TURNS
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    checker: str | None = None
    record_types: bool = True
    label: str = ""

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if self.verification_rounds < 0:
            raise ValueError("verification_rounds must be non-negative")


@dataclass
class RunState:
    root: Path
    files: list[FileRecord] = field(default_factory=list)
    initial_snapshot: ErrorSnapshot | None = None
    outcomes: list[SessionOutcome] = field(default_factory=list)
    round_snapshots: list[ErrorSnapshot] = field(default_factory=list)
    final_snapshot: ErrorSnapshot | None = None
    missing_types: list[tuple[str, str]] = field(default_factory=list)
    removed_directives: list = field(default_factory=list)
    preservation_violations: list[str] = field(default_factory=list)
    started: float = 0.0
    finished: float = 0.0
    incomplete: bool = False
    exit_code: int = EXIT_OK
    notice: str = ""

    @property
    def unresolved(self) -> int:
        return self.final_snapshot.total if self.final_snapshot else 0


class Ownership:
    """Exclusive per-path leases; a second lease on a live path is a bug."""

    def __init__(self):
        self._held: set[str] = set()
        self._lock = threading.Lock()

    def acquire(self, path: str):
        with self._lock:
            if path in self._held:
                raise RuntimeError(f"{path} is already owned by a live session")
            self._held.add(path)

    def release(self, path: str):
        with self._lock:
            self._held.discard(path)


def partition_work(snapshot: ErrorSnapshot, editable=None, *, max_turns: int = DEFAULT_MAX_TURNS,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> list[WorkOrder]:
    """One order per erroring file: most errors first, ties by path."""
    items = [(p, ds) for p, ds in snapshot.by_file.items()
             if ds and (editable is None or p in editable)]
    items.sort(key=lambda item: (-len(item[1]), item[0]))
    return [WorkOrder(p, tuple(ds), max_turns=max_turns, max_attempts=max_attempts) for p, ds in items]


def _snapshot_event(events, label: str, snap: ErrorSnapshot):
    events.emit("snapshot", label=label, total=snap.total,
                diagnostics=[d.to_json() for d in snap.errors()])


class _Runner:
    def __init__(self, plan: RunPlan, root: Path, events: EventLog, stop: threading.Event):
        self.plan = plan
        self.root = root
        self.events = events
        self.stop = stop
        self.ownership = Ownership()
        self.sessions = 0
        self.checker: CoalescingChecker | None = None
        self.baselines: dict = {}

    def session(self, order: WorkOrder, round_: int) -> SessionOutcome:
        self.sessions += 1
        sid = f"r{round_}-{order.path}"
        self.ownership.acquire(order.path)
        try:
            self.events.emit("dispatch", session=sid, path=order.path, round=round_,
                             errors=len(order.diagnostics))
            return run_session(order, self.plan.backend_factory(), root=self.root,
                               baseline=self.baselines[order.path], checker=self.checker,
                               hook_mode=self.plan.hook_mode, events=self.events,
                               session_id=sid, stop=self.stop)
        finally:
            self.ownership.release(order.path)


def execute_run(plan: RunPlan, root: Path, events: EventLog | None = None,
                stop: threading.Event | None = None) -> RunState:
    """Run phase one over the repository at ``root``.

    Raises ConfigError or CheckerError on environment failures; events
    written up to that point stay in the log.
    """
    root = Path(root).resolve()
    events = events if events is not None else EventLog()
    stop = stop or threading.Event()
    state = RunState(root, started=time.time())
    config = load_config(root)
    if config is None:
        raise ConfigError(f"no checker config in {root}; run `retrotype init` first")
    if plan.phase is not Phase.MINIMAL_SETUP:
        scaffold_config(plan.phase, root)
        state.notice = (f"phase {plan.phase.cli_name}: checker config written; "
                        "agent sessions for this phase are not implemented")
        state.exit_code = EXIT_ENV
        events.emit("run_started", label=plan.label, root=str(root), phase=plan.phase.cli_name,
                    parallelism=plan.parallelism, files=0, loc=0)
        events.emit("run_finished", exit_code=state.exit_code, incomplete=True, notice=state.notice,
                    final_total=0, unused_directives=0)
        return state
    if config.phase is not Phase.MINIMAL_SETUP:
        raise ConfigError(f"checker config is set up for {config.phase.cli_name}, not minimal-setup")

    skipped: list = []
    state.files = discover_sources(root, config, skipped)
    runner = _Runner(plan, root, events, stop)
    runner.baselines = {f.path: f.baseline_fingerprint for f in state.files}
    runner.checker = CoalescingChecker(root, plan.checker)
    events.emit("run_started", label=plan.label, root=str(root), phase=plan.phase.cli_name,
                parallelism=plan.parallelism, hook_mode=plan.hook_mode.value,
                rounds=plan.verification_rounds, files=len(state.files),
                loc=sum(f.loc for f in state.files),
                baselines={f.path: f.baseline_fingerprint.hash for f in state.files})
    for path, reason in skipped:
        events.emit("warning", kind="skipped_file", path=path, reason=reason)
    try:
        _pipeline(plan, root, events, stop, state, runner)
    except BaseException as exc:
        events.emit("run_aborted", error=f"{type(exc).__name__}: {exc}")
        raise
    return state


def _pipeline(plan, root, events, stop, state, runner):
    checker = runner.checker
    paths = [f.path for f in state.files]
    initial = checker.check()
    state.initial_snapshot = initial
    _snapshot_event(events, "initial", initial)
    existing = scan_suppressions(root, paths)
    events.emit("initial_suppressions", directives=[_directive_json(d) for d in existing.directives],
                foreign=len(existing.foreign))

    warnings: list[str] = []
    state.missing_types = resolve_missing_types(initial.errors(), warnings=warnings)
    for w in warnings:
        events.emit("warning", kind="missing_types", detail=w)
    added = []
    if state.missing_types and plan.record_types:
        added = record_types_packages(root, [pkg for _, pkg in state.missing_types])
    events.emit("missing_types", pairs=[list(p) for p in state.missing_types], recorded=added)

    orders = partition_work(initial, set(paths), max_turns=plan.max_turns, max_attempts=plan.max_attempts)
    with ThreadPoolExecutor(max_workers=plan.parallelism) as pool:
        futures = [pool.submit(runner.session, order, 0) for order in orders]
        state.outcomes.extend(f.result() for f in futures)
    if any(o.status is Status.INTERRUPTED for o in state.outcomes):
        state.incomplete = True

    verification_rounds(state, plan, runner)

    last = state.round_snapshots[-1] if state.round_snapshots else checker.check()
    state.removed_directives = cleanup_unused(root, last)
    events.emit("cleanup", removed=[{"path": r.path, "line": r.line, "text": r.text}
                                    for r in state.removed_directives])
    final = checker.check() if state.removed_directives or not state.round_snapshots else last
    state.final_snapshot = final
    _snapshot_event(events, "final", final)

    for f in state.files:
        try:
            now = fingerprint((root / f.path).read_bytes().decode("utf-8"))
        except (OSError, UnicodeDecodeError, LexError):
            state.preservation_violations.append(f.path)
            continue
        if now != f.baseline_fingerprint:
            state.preservation_violations.append(f.path)
    events.emit("preservation", checked=len(state.files), violations=state.preservation_violations)

    final_scan = scan_suppressions(root, paths)
    events.emit("final_suppressions", directives=[_directive_json(d) for d in final_scan.directives],
                foreign=len(final_scan.foreign))

    unused = final.count("TS2578")
    clean = final.total == 0 and unused == 0 and not state.incomplete
    if plan.hook_mode is HookMode.REJECT and state.preservation_violations:
        clean = False
    state.exit_code = EXIT_OK if clean else EXIT_UNRESOLVED
    state.finished = time.time()
    events.emit("run_finished", exit_code=state.exit_code, incomplete=state.incomplete,
                final_total=final.total, unused_directives=unused, checker_runs=checker.runs,
                sessions=runner.sessions)


def _directive_json(d) -> dict:
    return {"path": d.path, "line": d.line, "category": d.category.value,
            "explanation": d.explanation, "anchor_hash": d.anchor_hash}


def verification_rounds(state: RunState, plan: RunPlan, runner: _Runner) -> RunState:
    """Re-check the whole repository and send erroring files back, one at a time.

    Stops early once a snapshot is clean or a round changes nothing. Errors left after the last round
    stay in the final snapshot and make the run exit nonzero.
    """
    editable = {f.path for f in state.files}
    for round_ in range(1, plan.verification_rounds + 1):
        snap = runner.checker.check()
        state.round_snapshots.append(snap)
        _snapshot_event(runner.events, f"round-{round_}", snap)
        if snap.total == 0 or runner.stop.is_set():
            break
        orders = partition_work(snap, editable, max_turns=plan.max_turns, max_attempts=plan.max_attempts)
        if not orders:
            break
        changed = False
        for order in orders:
            if runner.stop.is_set():
                state.incomplete = True
                break
            outcome = runner.session(order, round_)
            state.outcomes.append(outcome)
            changed = changed or any(v.accepted for v in outcome.verdicts)
            if outcome.status is Status.INTERRUPTED:
                state.incomplete = True
        if not changed:
            # the repository is as this round's snapshot found it
            break
    else:
        if plan.verification_rounds > 0:
            snap = runner.checker.check()
            state.round_snapshots.append(snap)
            _snapshot_event(runner.events, "after-rounds", snap)
    return state
