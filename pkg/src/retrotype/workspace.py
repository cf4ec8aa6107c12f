"""Repository setup: source discovery, checker config per phase, types packages."""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path

from .fingerprint import Fingerprint, LexError, fingerprint

log = logging.getLogger(__name__)

CONFIG_NAME = "tsconfig.json"
MANIFEST_NAME = "package.json"

DEFAULT_INCLUDE = ("**/*.js", "**/*.cjs", "**/*.mjs")
DEFAULT_EXCLUDE = (
    "**/node_modules",
    "**/bower_components",
    "**/jspm_packages",
    "**/dist",
    "**/build",
    "**/out",
    "**/coverage",
    "**/.*",
)

# 2307 unresolvable module, 7016 untyped module, 2580/2591 node globals.
MISSING_DECLARATION_CODES = frozenset({"TS2307", "TS7016", "TS2580", "TS2591"})


class ConfigError(RuntimeError):
    pass


class Phase(Enum):
    MINIMAL_SETUP = 1
    FULL_COVERAGE = 2
    STRICT_MODE = 3

    def __lt__(self, other):
        if not isinstance(other, Phase):
            return NotImplemented
        return self.value < other.value

    def __le__(self, other):
        if not isinstance(other, Phase):
            return NotImplemented
        return self.value <= other.value

    @property
    def cli_name(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def parse(cls, text: str | int | Phase) -> Phase:
        if isinstance(text, Phase):
            return text
        if isinstance(text, int) or str(text).isdigit():
            return cls(int(text))
        key = str(text).strip().lower().replace("-", "_")
        aliases = {"minimal": "minimal_setup", "full": "full_coverage", "strict": "strict_mode"}
        return cls[aliases.get(key, key).upper()]

    def next(self) -> Phase:
        if self is Phase.STRICT_MODE:
            raise ValueError("strict mode is the last phase")
        return Phase(self.value + 1)

    def can_move_to(self, target: Phase) -> bool:
        return target is self or target.value == self.value + 1


@dataclass(frozen=True)
class CheckerConfig:
    allow_untyped_sources: bool = True
    check_untyped_sources: bool = True
    suppress_emit: bool = True
    no_implicit_any: bool = False
    strict: bool = False
    include_globs: tuple[str, ...] = DEFAULT_INCLUDE
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE
    # Type libraries to load. Checkers since TS 6 load none by default.
    types: tuple[str, ...] = ()

    @classmethod
    def for_phase(cls, phase: Phase, **kw) -> CheckerConfig:
        return cls(
            no_implicit_any=phase >= Phase.FULL_COVERAGE,
            strict=phase is Phase.STRICT_MODE,
            **kw,
        )

    @property
    def phase(self) -> Phase:
        if self.strict:
            return Phase.STRICT_MODE
        if self.no_implicit_any:
            return Phase.FULL_COVERAGE
        return Phase.MINIMAL_SETUP

    def to_json(self) -> dict:
        opts = {
            "allowJs": self.allow_untyped_sources,
            "checkJs": self.check_untyped_sources,
            "noEmit": self.suppress_emit,
            "noImplicitAny": self.no_implicit_any,
            "strict": self.strict,
        }
        if self.types:
            opts["types"] = list(self.types)
        return {
            "compilerOptions": opts,
            "include": list(self.include_globs),
            "exclude": list(self.exclude_globs),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> CheckerConfig:
        opts = d.get("compilerOptions", {})
        strict = bool(opts.get("strict", False))
        return cls(
            allow_untyped_sources=bool(opts.get("allowJs", False)),
            check_untyped_sources=bool(opts.get("checkJs", False)),
            suppress_emit=bool(opts.get("noEmit", False)),
            no_implicit_any=bool(opts.get("noImplicitAny", strict)),
            strict=strict,
            include_globs=tuple(d.get("include", DEFAULT_INCLUDE)),
            exclude_globs=tuple(d.get("exclude", DEFAULT_EXCLUDE)),
            types=tuple(opts.get("types", ())),
        )


def load_config(root: Path) -> CheckerConfig | None:
    path = Path(root) / CONFIG_NAME
    if not path.exists():
        return None
    try:
        return CheckerConfig.from_json(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def scaffold_config(phase: Phase, root: Path, *, overwrite: bool = False,
                    types: tuple[str, ...] | None = None, dry_run: bool = False) -> CheckerConfig:
    """Write the checker config for ``phase`` and return it.

    An existing config for a later phase, or one that would be skipped over
    (minimal setup straight to strict mode), is left alone unless
    ``overwrite`` is set. Include/exclude globs and type libraries of an
    existing config are carried over.
    """
    root = Path(root)
    existing = load_config(root)
    kw: dict = {}
    if existing is not None:
        if not existing.phase.can_move_to(phase) and not overwrite:
            raise ConfigError(
                f"{CONFIG_NAME} is configured for {existing.phase.cli_name}; "
                f"refusing to switch to {phase.cli_name} without --overwrite"
            )
        kw.update(include_globs=existing.include_globs, exclude_globs=existing.exclude_globs,
                  types=existing.types)
    if types is not None:
        kw["types"] = tuple(types)
    config = CheckerConfig.for_phase(phase, **kw)
    if not dry_run:
        (root / CONFIG_NAME).write_text(config.dumps(), encoding="utf-8")
    return config


def count_loc(text: str) -> int:
    return sum(1 for line in text.split("\n") if line.strip())


@dataclass(frozen=True)
class FileRecord:
    path: str
    baseline_content: bytes
    baseline_fingerprint: Fingerprint
    loc: int

    def __post_init__(self):
        if self.loc < 0:
            raise ValueError("loc must be non-negative")
        if fingerprint(self.baseline_content.decode("utf-8")) != self.baseline_fingerprint:
            raise ValueError(f"{self.path}: baseline fingerprint does not match content")

    @classmethod
    def snapshot(cls, path: str, content: bytes) -> FileRecord:
        text = content.decode("utf-8")
        return cls(path, content, fingerprint(text), count_loc(text))


@lru_cache(maxsize=256)
def _glob_regex(pattern: str) -> re.Pattern:
    out = []
    i = 0
    while i < len(pattern):
        if pattern.startswith("**/", i):
            out.append("(?:[^/]*/)*")
            i += 3
        elif pattern.startswith("**", i):
            out.append(".*")
            i += 2
        elif pattern[i] == "*":
            out.append("[^/]*")
            i += 1
        elif pattern[i] == "?":
            out.append("[^/]")
            i += 1
        else:
            out.append(re.escape(pattern[i]))
            i += 1
    return re.compile("".join(out) + r"\Z")


def glob_match(path: str, pattern: str) -> bool:
    pattern = pattern[2:] if pattern.startswith("./") else pattern
    return _glob_regex(pattern).match(path) is not None


def _excluded(rel: str, patterns) -> bool:
    """A path is excluded if it or any of its parent directories matches."""
    parts = rel.split("/")
    for i in range(1, len(parts) + 1):
        prefix = "/".join(parts[:i])
        if any(glob_match(prefix, p) for p in patterns):
            return True
    return False


def discover_sources(root: Path, config: CheckerConfig, skipped: list | None = None) -> list[FileRecord]:
    """Snapshot every source file selected by the config, sorted by path.

    Files that cannot be read, decoded or lexed are left out and appended to
    ``skipped`` as ``(path, reason)`` pairs.
    """
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise ConfigError(f"cannot read repository root {root}")
    records = []
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = os.path.relpath(dirpath, root).replace(os.sep, "/")
        rel_dir = "" if rel_dir == "." else rel_dir + "/"
        dirnames[:] = sorted(d for d in dirnames if not _excluded(rel_dir + d, config.exclude_globs))
        for name in filenames:
            rel = rel_dir + name
            if _excluded(rel, config.exclude_globs):
                continue
            if not any(glob_match(rel, p) for p in config.include_globs):
                continue
            try:
                records.append(FileRecord.snapshot(rel, (root / rel).read_bytes()))
            except (OSError, UnicodeDecodeError, LexError) as exc:
                log.warning("skipping %s: %s", rel, exc)
                if skipped is not None:
                    skipped.append((rel, str(exc)))
    records.sort(key=lambda r: r.path)
    return records


_MODULE_RE = re.compile(r"module '(?P<name>[^']+)'")
_HINT_RE = re.compile(r"npm i --save-dev (?P<pkg>@types/[\w.\-]+)")
_PACKAGE_RE = re.compile(r"^(?:@[a-z0-9][\w.\-~]*/)?[a-z0-9][\w.\-~]*$", re.IGNORECASE)

NODE_BUILTINS = frozenset(
    """assert async_hooks buffer child_process cluster console constants crypto dgram
    diagnostics_channel dns domain events fs http http2 https inspector module net os
    path perf_hooks process punycode querystring readline repl stream string_decoder
    sys timers tls trace_events tty url util v8 vm wasi worker_threads zlib""".split()
)


def types_package_for(module: str) -> str | None:
    """Conventional declaration package for an imported module name.

    ``express`` -> ``@types/express``; ``@org/pkg`` -> ``@types/org__pkg``;
    ``lodash/fp`` -> ``@types/lodash``; Node built-ins -> ``@types/node``.
    Relative and absolute imports have no package and yield ``None``.
    """
    if module.startswith("node:"):
        return "@types/node"
    if module.startswith((".", "/")):
        return None
    parts = module.split("/")
    if module.startswith("@"):
        if len(parts) < 2:
            return None
        base = "/".join(parts[:2])
    else:
        base = parts[0]
    if not _PACKAGE_RE.match(base):
        return None
    if base in NODE_BUILTINS:
        return "@types/node"
    if base.startswith("@types/"):
        return base
    if base.startswith("@"):
        scope, name = base[1:].split("/", 1)
        return f"@types/{scope}__{name}"
    return f"@types/{base}"


def resolve_missing_types(diags, codes=MISSING_DECLARATION_CODES,
                          warnings: list | None = None) -> list[tuple[str, str]]:
    """Map missing-declaration diagnostics to (module, types package) pairs.

    Pure: looks only at the diagnostics. Diagnostics whose message names no
    package are skipped and reported through ``warnings``.
    """
    found = set()
    for d in diags:
        if d.code not in codes:
            continue
        hint = _HINT_RE.search(d.message)
        if hint:
            pkg = hint["pkg"]
            found.add((pkg.removeprefix("@types/"), pkg))
            continue
        m = _MODULE_RE.search(d.message)
        pkg = types_package_for(m["name"]) if m else None
        if pkg is None:
            if warnings is not None:
                warnings.append(f"{d.path}:{d.line}: no types package for: {d.message.splitlines()[0]}")
            continue
        found.add((m["name"], pkg))
    return sorted(found)


def record_types_packages(root: Path, packages, version: str = "*", dry_run: bool = False) -> list[str]:
    """Add packages to the manifest's devDependencies; returns the ones added."""
    path = Path(root) / MANIFEST_NAME
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    dev = manifest.setdefault("devDependencies", {})
    added = [p for p in sorted(set(packages)) if p not in dev and p not in manifest.get("dependencies", {})]
    for p in added:
        dev[p] = version
    if added and not dry_run:
        path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return added
