"""Command line entry point: init, run, diff, report."""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import shutil
import signal
import sys
import tempfile
import threading
from dataclasses import dataclass, fields
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .agent import BackendError, ExternalBackend, HookMode, ScriptedBackend, load_classification
from .checker import CheckerError, run_check
from .events import EventLog, EventLogError, read_events
from .fingerprint import LexError, fingerprint, token_diff
from .orchestrator import EXIT_ENV, EXIT_OK, EXIT_UNRESOLVED, RunPlan, execute_run
from .report import build_report, dumps_json, load_baseline, render_review, render_table
from .workspace import ConfigError, Phase, resolve_missing_types, scaffold_config

PROJECT_FILE = "retrotype.config.json"
log = logging.getLogger("retrotype")


@dataclass
class CliConfig:
    root: Path = Path(".")
    phase: Phase = Phase.MINIMAL_SETUP
    parallelism: int = 10
    backend: str = "scripted"
    hook_mode: HookMode = HookMode.REJECT
    rounds: int = 3
    classification_map: Path | None = None
    baseline: Path | None = None
    price_in: Decimal = Decimal(0)
    price_out: Decimal = Decimal(0)
    json_out: Path | None = None
    log_out: Path | None = None
    manifest_out: Path | None = None
    checker: str | None = None
    max_turns: int = 30
    max_attempts: int = 3
    label: str | None = None
    overwrite: bool = False
    dry_run: bool = False

    def __post_init__(self):
        self.root = Path(self.root)
        self.phase = Phase.parse(self.phase)
        self.hook_mode = HookMode(self.hook_mode)
        self.price_in = _decimal(self.price_in, "price_in")
        self.price_out = _decimal(self.price_out, "price_out")
        for name in ("parallelism", "rounds", "max_turns", "max_attempts"):
            setattr(self, name, int(getattr(self, name)))
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be non-negative")
        if self.backend != "scripted":
            if not self.backend.startswith("external:") or not self.backend[len("external:"):].strip():
                raise ConfigError("backend must be 'scripted' or 'external:<command>'")

    @property
    def external_command(self) -> str | None:
        return self.backend[len("external:"):].strip() if self.backend.startswith("external:") else None


def _decimal(value, name: str) -> Decimal:
    try:
        d = Decimal(str(value))
    except InvalidOperation:
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if d < 0:
        raise ConfigError(f"{name} must be non-negative")
    return d


_PATH_FIELDS = {"classification_map", "baseline", "json_out", "log_out", "manifest_out"}
_FIELD_NAMES = {f.name for f in fields(CliConfig)}


def load_project_file(root: Path) -> dict:
    """Defaults stored in the repository; relative paths are taken from ``root``."""
    path = Path(root) / PROJECT_FILE
    if not path.exists():
        return {}
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    values = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in _FIELD_NAMES or name in ("root", "dry_run"):
            raise ConfigError(f"{path}: unknown setting {key!r}")
        if name in _PATH_FIELDS and value is not None:
            value = Path(root) / value
        values[name] = value
    return values


def resolve_config(flags: dict) -> CliConfig:
    """Merge flags over the project file over defaults."""
    root = Path(flags.get("root", "."))
    merged = load_project_file(root)
    merged.update({k: v for k, v in flags.items() if k in _FIELD_NAMES})
    merged["root"] = root
    try:
        return CliConfig(**merged)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _add_globals(p: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    g = p.add_argument_group("global options")
    g.add_argument("--root", default=S, help="repository root (default: current directory)")
    g.add_argument("--phase", default=S, help="minimal-setup, full-coverage or strict-mode")
    g.add_argument("--parallelism", "-k", type=int, default=S, help="concurrent sessions (default 10)")
    g.add_argument("--backend", default=S, help="'scripted' or 'external:<command>'")
    g.add_argument("--hook-mode", choices=[m.value for m in HookMode], default=S)
    g.add_argument("--rounds", type=int, default=S, help="verification rounds (default 3)")
    g.add_argument("--classification-map", default=S, help="JSON map of diagnostic code to bug|valid")
    g.add_argument("--baseline", default=S, help="baseline suppression manifest")
    g.add_argument("--price-in", default=S, help="USD per million input tokens")
    g.add_argument("--price-out", default=S, help="USD per million output tokens")
    g.add_argument("--json-out", default=S, help="write the JSON report here")
    g.add_argument("--log-out", default=S, help="write the JSON-lines event log here")
    g.add_argument("--manifest-out", default=S, help="write the suppression manifest here")
    g.add_argument("--checker", default=S, help="path to the tsc executable")
    g.add_argument("--max-turns", type=int, default=S)
    g.add_argument("--max-attempts", type=int, default=S)
    g.add_argument("--label", default=S, help="repository label in the report")
    g.add_argument("--overwrite", action="store_true", default=S, help="init: replace an existing config")
    g.add_argument("--dry-run", action="store_true", default=S, help="print intended edits, change nothing")
    g.add_argument("-v", "--verbose", action="count", default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retrotype", description=__doc__)
    _add_globals(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("init", help="write the checker config and count errors")
    _add_globals(p)
    p = sub.add_parser("run", help="run phase one over the repository")
    _add_globals(p)
    p = sub.add_parser("diff", help="compare the token streams of two files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    _add_globals(p)
    p = sub.add_parser("report", help="rebuild the report from an event log")
    p.add_argument("event_log")
    _add_globals(p)
    return parser


def _say(*parts, end="\n"):
    print(*parts, end=end, flush=True)


def _err(*parts):
    print("retrotype:", *parts, file=sys.stderr, flush=True)


def cmd_init(cfg: CliConfig) -> int:
    root = cfg.root.resolve()
    try:
        config = scaffold_config(cfg.phase, root, overwrite=cfg.overwrite, dry_run=cfg.dry_run)
    except ConfigError as exc:
        _err(exc)
        return EXIT_ENV
    if cfg.dry_run:
        _say(f"would write {root / 'tsconfig.json'}:")
        _say(config.dumps(), end="")
        if not (root / "tsconfig.json").exists():
            return EXIT_OK
    try:
        snap = run_check(root, checker=cfg.checker)
    except CheckerError as exc:
        _err(exc)
        if exc.output:
            _err(exc.output.strip())
        return EXIT_ENV
    errors = snap.errors()
    _say(f"{len(errors)} errors")
    by_code: dict[str, int] = {}
    for d in errors:
        by_code[d.code] = by_code.get(d.code, 0) + 1
    for code in sorted(by_code):
        _say(f"  {code}: {by_code[code]}")
    missing = resolve_missing_types(errors)
    if missing:
        _say("missing type declarations; install with:")
        _say("  npm install --save-dev " + " ".join(sorted({pkg for _, pkg in missing})))
    return EXIT_OK


def _backend_factory(cfg: CliConfig, root: Path):
    if cfg.external_command is not None:
        command = cfg.external_command
        return lambda: ExternalBackend(command, cwd=root)
    mapping, fallback = load_classification(cfg.classification_map)
    return lambda: ScriptedBackend(mapping, fallback)


def _copy_repo(src: Path, dst: Path):
    """Copy a repository for a dry run; installed packages are linked, not copied."""
    shutil.copytree(src, dst, symlinks=True, ignore=shutil.ignore_patterns("node_modules", ".git"))
    if (src / "node_modules").exists():
        (dst / "node_modules").symlink_to(src / "node_modules", target_is_directory=True)


def _print_changes(before: Path, after: Path, paths):
    for rel in sorted(paths):
        a = (before / rel).read_text(encoding="utf-8").splitlines(keepends=True)
        b = (after / rel).read_text(encoding="utf-8").splitlines(keepends=True)
        sys.stdout.writelines(difflib.unified_diff(a, b, f"a/{rel}", f"b/{rel}"))


def cmd_run(cfg: CliConfig) -> int:
    root = cfg.root.resolve()
    if not root.is_dir():
        _err(f"not a directory: {root}")
        return EXIT_ENV
    try:
        baseline = load_baseline(cfg.baseline) if cfg.baseline else None
        factory = _backend_factory(cfg, root)
    except (OSError, ValueError) as exc:
        _err(f"cannot load run inputs: {exc}")
        return EXIT_ENV
    plan = RunPlan(phase=cfg.phase, parallelism=cfg.parallelism, backend_factory=factory,
                   hook_mode=cfg.hook_mode, verification_rounds=cfg.rounds, max_turns=cfg.max_turns,
                   max_attempts=cfg.max_attempts, checker=cfg.checker, record_types=True,
                   label=cfg.label if cfg.label is not None else root.name)
    stop = threading.Event()

    def on_sigint(signum, frame):
        if stop.is_set():
            raise KeyboardInterrupt
        _err("interrupt: letting sessions finish their current step; press again to abort")
        stop.set()

    previous = None
    if threading.current_thread() is threading.main_thread():
        previous = signal.signal(signal.SIGINT, on_sigint)
    tmp = None
    work = root
    try:
        if cfg.dry_run:
            tmp = tempfile.TemporaryDirectory(prefix="retrotype-dry-")
            work = Path(tmp.name) / root.name
            _copy_repo(root, work)
            plan.backend_factory = _backend_factory(cfg, work)
        with EventLog(cfg.log_out) as events:
            try:
                state = execute_run(plan, work, events, stop)
            except (ConfigError, CheckerError, BackendError, OSError) as exc:
                _err(exc)
                output = getattr(exc, "output", "")
                if output:
                    _err(output.strip())
                return EXIT_ENV
            report = build_report(events.events, baseline, cfg.price_in, cfg.price_out, label=plan.label)
        if state.notice:
            _err(state.notice)
            return state.exit_code
        if cfg.dry_run:
            changed = [f.path for f in state.files
                       if (work / f.path).read_bytes() != f.baseline_content]
            manifest = work / "package.json"
            if manifest.exists() and (not (root / "package.json").exists()
                                      or manifest.read_bytes() != (root / "package.json").read_bytes()):
                changed.append("package.json")
            _print_changes(root, work, changed)
        _say(render_table(report), end="")
        _say(render_review(report), end="")
        if state.missing_types:
            _say("missing type declarations recorded in package.json; install with:")
            _say("  npm install --save-dev " + " ".join(sorted({p for _, p in state.missing_types})))
        if state.unresolved:
            _say(f"{state.unresolved} errors unresolved")
        if state.preservation_violations:
            _err("behavior preservation violated in: " + ", ".join(state.preservation_violations))
        if cfg.json_out:
            Path(cfg.json_out).write_text(dumps_json(report), encoding="utf-8")
        if cfg.manifest_out:
            Path(cfg.manifest_out).write_text(json.dumps(report.manifest(), indent=2) + "\n", encoding="utf-8")
        return state.exit_code
    finally:
        if previous is not None:
            signal.signal(signal.SIGINT, previous)
        if tmp is not None:
            tmp.cleanup()


def cmd_diff(path_a: str, path_b: str) -> int:
    try:
        texts = [Path(p).read_bytes().decode("utf-8") for p in (path_a, path_b)]
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"cannot read input: {exc}")
        return EXIT_ENV
    fps = []
    for path, text in zip((path_a, path_b), texts):
        try:
            fps.append(fingerprint(text))
        except LexError as exc:
            _err(f"{path}: {exc}")
            return EXIT_ENV
    if fps[0] == fps[1]:
        _say("equivalent")
        return EXIT_OK
    _say(token_diff(fps[0], fps[1]).render())
    return EXIT_UNRESOLVED


def cmd_report(log_path: str, cfg: CliConfig) -> int:
    try:
        events = read_events(Path(log_path))
        baseline = load_baseline(cfg.baseline) if cfg.baseline else None
        report = build_report(events, baseline, cfg.price_in, cfg.price_out, label=cfg.label)
    except (OSError, EventLogError, ValueError, KeyError, TypeError) as exc:
        _err(f"cannot build report: {exc}")
        return EXIT_ENV
    _say(render_table(report), end="")
    _say(render_review(report), end="")
    if cfg.json_out:
        Path(cfg.json_out).write_text(dumps_json(report), encoding="utf-8")
    if cfg.manifest_out:
        Path(cfg.manifest_out).write_text(json.dumps(report.manifest(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    verbose = args.pop("verbose", 0)
    logging.basicConfig(level=logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.pop("command")
    if command == "diff":
        return cmd_diff(args["file_a"], args["file_b"])
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        _err(exc)
        return EXIT_ENV
    if command == "init":
        return cmd_init(cfg)
    if command == "run":
        return cmd_run(cfg)
    return cmd_report(args["event_log"], cfg)


if __name__ == "__main__":
    sys.exit(main())
