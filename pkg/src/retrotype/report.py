"""Run metrics: the per-repository row, the review listing, text and JSON output."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path

from .events import EventLogError

SCHEMA_VERSION = 1
CENT = Decimal("0.01")
TENTH = Decimal("0.1")


def round_half_up(value: Decimal, step: Decimal) -> Decimal:
    return value.quantize(step, rounding=ROUND_HALF_UP)


def additional_percent(necessary: int, additional: int) -> Decimal | None:
    if necessary <= 0:
        return None
    return round_half_up(Decimal(additional) * 100 / Decimal(necessary), TENTH)


def format_mmss(seconds: int) -> str:
    minutes, secs = divmod(int(seconds), 60)
    return f"{minutes}:{secs:02d}"


def parse_mmss(text: str) -> int:
    minutes, secs = text.strip().removesuffix(" min").split(":")
    return int(minutes) * 60 + int(secs)


def format_loc(loc: int) -> str:
    if loc < 1000:
        return str(loc)
    return f"{round_half_up(Decimal(loc) / 1000, Decimal(1))}K"


def cost_usd(tokens_in: int, tokens_out: int, price_in: Decimal | float | str,
             price_out: Decimal | float | str) -> Decimal:
    """Dollar cost from token counts and per-million-token prices."""
    total = Decimal(tokens_in) * Decimal(str(price_in)) + Decimal(tokens_out) * Decimal(str(price_out))
    return round_half_up(total / Decimal(1_000_000), CENT)


@dataclass
class FileRow:
    path: str
    initial_errors: int = 0
    suppressions: int = 0
    final_errors: int = 0
    status: str = "untouched"


@dataclass
class ReportedSuppression:
    path: str
    line: int  # anchor line, in the final file
    category: str
    explanation: str
    anchor_hash: str
    codes: list[str] = field(default_factory=list)

    def manifest_entry(self) -> dict:
        return {"path": self.path, "anchor_content_hash": self.anchor_hash, "codes": sorted(self.codes)}


@dataclass
class RunReport:
    repo: str = ""
    loc: int = 0
    initial_errors: int = 0
    resolved_by_fix: int = 0
    suppressed_errors: int = 0
    unresolved_initial: int = 0
    suppressions_total: int = 0
    suppressions_bug: int = 0
    suppressions_valid: int = 0
    necessary_suppressions: int | None = None
    additional_suppressions: int | None = None
    wall_seconds: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    cost_usd: Decimal = Decimal("0.00")
    unresolved: int = 0
    unused_directives: int = 0
    removed_directives: int = 0
    foreign_suppressions: int = 0
    missing_types: list[list[str]] = field(default_factory=list)
    exit_code: int = 0
    incomplete: bool = False
    per_file: list[FileRow] = field(default_factory=list)
    suppressions: list[ReportedSuppression] = field(default_factory=list)

    def __post_init__(self):
        self.cost_usd = round_half_up(Decimal(str(self.cost_usd)), CENT)
        if (self.necessary_suppressions is None) != (self.additional_suppressions is None):
            raise ValueError("necessary and additional suppressions go together")

    @property
    def has_baseline(self) -> bool:
        return self.necessary_suppressions is not None

    @property
    def additional_pct(self) -> Decimal | None:
        if not self.has_baseline:
            return None
        return additional_percent(self.necessary_suppressions, self.additional_suppressions)

    @property
    def wall_time(self) -> str:
        return format_mmss(self.wall_seconds)

    @property
    def review(self) -> list[ReportedSuppression]:
        return [s for s in self.suppressions if s.category == "bug"]

    def manifest(self) -> list[dict]:
        entries = [s.manifest_entry() for s in self.suppressions]
        return sorted(entries, key=lambda e: (e["path"], e["anchor_content_hash"], e["codes"]))


def _match_events(final_dirs: list[dict], initial_dirs: list[dict], added: list[dict]):
    """Directives new in this run, each paired with its insertion record."""
    pre = Counter((d["path"], d["anchor_hash"], d["category"], d["explanation"]) for d in initial_dirs)
    pool: dict[tuple, list[dict]] = {}
    for e in added:
        pool.setdefault((e["path"], e["anchor_hash"], e["category"], e["explanation"]), []).append(e)
    out = []
    for d in final_dirs:
        key = (d["path"], d["anchor_hash"], d["category"], d["explanation"])
        if pre[key] > 0:
            pre[key] -= 1
            continue
        records = pool.get(key)
        out.append((d, records.pop() if records else None))
    return out


def _keys(snapshot_event: dict | None) -> Counter:
    if snapshot_event is None:
        return Counter()
    from .checker import normalize_message

    return Counter((d["path"], d["code"], normalize_message(d["message"]))
                   for d in snapshot_event["diagnostics"])


def load_baseline(path: Path) -> list[dict]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError("baseline manifest must be a JSON list")
    for entry in raw:
        if not {"path", "anchor_content_hash", "codes"} <= set(entry):
            raise ValueError(f"baseline entry lacks fields: {entry!r}")
    return raw


def build_report(events: list[dict], baseline: list[dict] | None = None,
                 price_in: Decimal | float | str = 0, price_out: Decimal | float | str = 0,
                 label: str | None = None) -> RunReport:
    """Aggregate a run's event log into its report row.

    Pure in its inputs: the same log, baseline and prices give the same report.
    """
    def one(type_, **match):
        found = [e for e in events if e.get("type") == type_
                 and all(e.get(k) == v for k, v in match.items())]
        return found[-1] if found else None

    started = one("run_started")
    if started is None:
        raise EventLogError("event log has no run_started record")
    finished = one("run_finished")
    initial = one("snapshot", label="initial")
    final = one("snapshot", label="final")
    initial_dirs = (one("initial_suppressions") or {}).get("directives", [])
    final_event = one("final_suppressions") or {}
    added = [e for e in events if e.get("type") == "suppression_added"]

    report = RunReport(repo=label if label is not None else started.get("label", ""),
                       loc=started.get("loc", 0))
    report.initial_errors = initial["total"] if initial else 0
    report.unresolved = final["total"] if final else report.initial_errors
    report.unused_directives = sum(1 for d in (final or {}).get("diagnostics", []) if d["code"] == "TS2578")
    report.foreign_suppressions = final_event.get("foreign", 0)
    report.removed_directives = len((one("cleanup") or {}).get("removed", []))
    report.missing_types = (one("missing_types") or {}).get("pairs", [])
    if finished is not None:
        report.exit_code = finished["exit_code"]
        report.incomplete = finished.get("incomplete", False)
        report.wall_seconds = int(round_half_up(Decimal(str(finished["ts"])) - Decimal(str(started["ts"])), Decimal(1)))
    else:
        report.incomplete = True
        report.exit_code = 2

    covered = Counter()
    for d, record in _match_events(final_event.get("directives", []), initial_dirs, added):
        codes = record["codes"] if record else []
        if record:
            covered.update(tuple(k) for k in record["covered"])
        report.suppressions.append(ReportedSuppression(
            d["path"], d["line"] + 1, d["category"], d["explanation"], d["anchor_hash"], list(codes)))
    report.suppressions.sort(key=lambda s: (s.path, s.line))
    report.suppressions_total = len(report.suppressions)
    report.suppressions_bug = sum(1 for s in report.suppressions if s.category == "bug")
    report.suppressions_valid = report.suppressions_total - report.suppressions_bug

    before, after = _keys(initial), _keys(final)
    eliminated = before - after
    report.unresolved_initial = sum((before & after).values())
    report.suppressed_errors = sum((eliminated & covered).values())
    report.resolved_by_fix = sum(eliminated.values()) - report.suppressed_errors

    if baseline is not None:
        expected = Counter((b["path"], b["anchor_content_hash"], tuple(sorted(b["codes"]))) for b in baseline)
        necessary = 0
        for s in report.suppressions:
            key = (s.path, s.anchor_hash, tuple(sorted(s.codes)))
            if expected[key] > 0:
                expected[key] -= 1
                necessary += 1
        report.necessary_suppressions = necessary
        report.additional_suppressions = report.suppressions_total - necessary

    for e in events:
        if e.get("type") == "session_finished":
            report.tokens_in += e.get("tokens_in", 0)
            report.tokens_out += e.get("tokens_out", 0)
    report.cost_usd = cost_usd(report.tokens_in, report.tokens_out, price_in, price_out)

    rows: dict[str, FileRow] = {}
    for d in (initial or {}).get("diagnostics", []):
        rows.setdefault(d["path"], FileRow(d["path"])).initial_errors += 1
    for d in (final or {}).get("diagnostics", []):
        rows.setdefault(d["path"], FileRow(d["path"])).final_errors += 1
    for s in report.suppressions:
        rows.setdefault(s.path, FileRow(s.path)).suppressions += 1
    for e in events:
        if e.get("type") == "session_finished":
            rows.setdefault(e["path"], FileRow(e["path"])).status = e["status"]
    report.per_file = [rows[p] for p in sorted(rows)]
    return report


def _additional_cell(r: RunReport) -> str:
    if not r.has_baseline:
        return "-"
    pct = r.additional_pct
    return f"+{r.additional_suppressions} ({'n/a' if pct is None else f'+{pct}%'})"


def total_row(reports: list[RunReport], label: str = "Total") -> RunReport:
    with_baseline = all(r.has_baseline for r in reports) and reports
    return RunReport(
        repo=label,
        loc=sum(r.loc for r in reports),
        initial_errors=sum(r.initial_errors for r in reports),
        resolved_by_fix=sum(r.resolved_by_fix for r in reports),
        suppressed_errors=sum(r.suppressed_errors for r in reports),
        unresolved_initial=sum(r.unresolved_initial for r in reports),
        suppressions_total=sum(r.suppressions_total for r in reports),
        suppressions_bug=sum(r.suppressions_bug for r in reports),
        suppressions_valid=sum(r.suppressions_valid for r in reports),
        necessary_suppressions=sum(r.necessary_suppressions for r in reports) if with_baseline else None,
        additional_suppressions=sum(r.additional_suppressions for r in reports) if with_baseline else None,
        wall_seconds=sum(r.wall_seconds for r in reports),
        tokens_in=sum(r.tokens_in for r in reports),
        tokens_out=sum(r.tokens_out for r in reports),
        cost_usd=sum((r.cost_usd for r in reports), Decimal("0.00")),
        unresolved=sum(r.unresolved for r in reports),
    )


COLUMNS = ("Repo", "LOC", "Type Errors", "Necessary Suppressions", "Additional Suppressions",
           "Time", "Cost", "Unresolved")


def table_cells(r: RunReport) -> list[str]:
    suppressions = r.necessary_suppressions if r.has_baseline else r.suppressions_total
    return [r.repo, format_loc(r.loc), str(r.initial_errors), str(suppressions), _additional_cell(r),
            r.wall_time, f"${r.cost_usd}", str(r.unresolved)]


def render_table(reports: list[RunReport] | RunReport) -> str:
    """Fixed-width table with one row per report and a totals row."""
    if isinstance(reports, RunReport):
        reports = [reports]
    rows = [list(COLUMNS)] + [table_cells(r) for r in reports] + [table_cells(total_row(reports))]
    widths = [max(len(row[i]) for row in rows) for i in range(len(COLUMNS))]

    def fmt(row):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        return "  ".join(cells).rstrip()

    rule = "-" * len(fmt(rows[0]))
    lines = [fmt(rows[0]), rule, *(fmt(r) for r in rows[1:-1]), rule, fmt(rows[-1])]
    if not all(r.has_baseline for r in reports):
        lines.append("(no baseline manifest: the suppression column counts all suppressions)")
    return "\n".join(lines) + "\n"


def render_review(report: RunReport) -> str:
    if not report.review:
        return "No bug-category suppressions.\n"
    lines = ["Suppressions marked for human review:"]
    for s in report.review:
        lines.append(f"  {s.path}:{s.line}  [{', '.join(s.codes) or '?'}]  {s.explanation}")
    return "\n".join(lines) + "\n"


def emit_json(report: RunReport) -> dict:
    pct = report.additional_pct
    return {
        "schema_version": SCHEMA_VERSION,
        "repo": report.repo,
        "loc": report.loc,
        "initial_errors": report.initial_errors,
        "resolved_by_fix": report.resolved_by_fix,
        "suppressed_errors": report.suppressed_errors,
        "unresolved_initial": report.unresolved_initial,
        "suppressions_total": report.suppressions_total,
        "suppressions_bug": report.suppressions_bug,
        "suppressions_valid": report.suppressions_valid,
        "necessary_suppressions": report.necessary_suppressions,
        "additional_suppressions": report.additional_suppressions,
        "additional_pct": None if pct is None else f"{pct}",
        "wall_seconds": report.wall_seconds,
        "wall_time": report.wall_time,
        "tokens_in": report.tokens_in,
        "tokens_out": report.tokens_out,
        "cost_usd": f"{report.cost_usd}",
        "unresolved": report.unresolved,
        "unused_directives": report.unused_directives,
        "removed_directives": report.removed_directives,
        "foreign_suppressions": report.foreign_suppressions,
        "missing_types": [list(p) for p in report.missing_types],
        "exit_code": report.exit_code,
        "incomplete": report.incomplete,
        "per_file": [asdict(r) for r in report.per_file],
        "suppressions": [asdict(s) for s in report.suppressions],
        "review": [{"path": s.path, "line": s.line, "explanation": s.explanation} for s in report.review],
    }


def dumps_json(report: RunReport) -> str:
    return json.dumps(emit_json(report), indent=2) + "\n"


def load_json(doc: dict) -> RunReport:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema version {doc.get('schema_version')!r}")
    fields = {k: doc[k] for k in (
        "repo", "loc", "initial_errors", "resolved_by_fix", "suppressed_errors", "unresolved_initial",
        "suppressions_total", "suppressions_bug", "suppressions_valid", "necessary_suppressions",
        "additional_suppressions", "wall_seconds", "tokens_in", "tokens_out", "unresolved",
        "unused_directives", "removed_directives", "foreign_suppressions", "missing_types",
        "exit_code", "incomplete")}
    return RunReport(
        **fields,
        cost_usd=Decimal(doc["cost_usd"]),
        per_file=[FileRow(**r) for r in doc["per_file"]],
        suppressions=[ReportedSuppression(**s) for s in doc["suppressions"]],
    )


def report_schema() -> dict:
    text = resources.files("retrotype").joinpath("schemas/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
