from __future__ import annotations

import threading
import time
from pathlib import Path

import pytest

from helpers import CORPORA, CORPUS_NAMES, copy_repo
from retrotype.checker import (
    CheckerError,
    CheckerNotFound,
    CoalescingChecker,
    Diagnostic,
    ErrorSnapshot,
    diff_snapshots,
    normalize_message,
    parse_diagnostic_line,
    parse_output,
    parse_summary_line,
    parse_summary_row,
    resolve_checker,
    run_check,
    strip_ansi,
)

GOLDEN = Path(__file__).parent / "golden"


def golden_transcripts() -> list[Path]:
    return sorted(GOLDEN.glob("*.plain.txt")) + [CORPORA / f"{n}.expected.txt" for n in CORPUS_NAMES]


def summary_lines() -> list[str]:
    """Lines following the summary in pretty transcripts: the summary and the per-file table."""
    out = []
    for p in sorted(GOLDEN.glob("*.pretty.txt")):
        lines = p.read_text(encoding="utf-8").splitlines()
        start = next(i for i, line in enumerate(lines) if line.startswith("Found "))
        out += [line for line in lines[start:] if line.strip() and not line.startswith("Errors  Files")]
    return out


def round_trip(text: str) -> list[tuple[str, str]]:
    """(original block, re-rendered block) for every diagnostic in a transcript."""
    lines = text.splitlines()
    starts = [i for i, line in enumerate(lines) if parse_diagnostic_line(line)]
    diags, _ = parse_output(text)
    assert len(diags) == len(starts)
    pairs = []
    for d, i in zip(diags, starts):
        block = [lines[i]]
        for line in lines[i + 1:]:
            if not line.startswith(" ") or not line.strip():
                break
            block.append(line)
        pairs.append(("\n".join(block), d.render()))
    return pairs


class TestGolden:
    def test_corpus_is_large_enough(self):
        diag_lines = sum(len(round_trip(p.read_text(encoding="utf-8"))) for p in golden_transcripts())
        continuation = sum(1 for p in golden_transcripts()
                           for line in p.read_text(encoding="utf-8").splitlines() if line.startswith("  "))
        assert diag_lines >= 50
        assert continuation >= 2
        assert len(summary_lines()) >= 3

    @pytest.mark.parametrize("path", golden_transcripts(), ids=lambda p: p.name)
    def test_diagnostics_round_trip(self, path):
        for original, rendered in round_trip(path.read_text(encoding="utf-8")):
            assert rendered == original

    def test_summary_lines_round_trip(self):
        for line in summary_lines():
            parsed = parse_summary_line(line) or parse_summary_row(line)
            assert parsed is not None, line
            assert parsed.render() == line

    def test_summary_lines_are_not_diagnostics(self):
        for line in summary_lines():
            assert parse_diagnostic_line(line) is None
        assert parse_output("\n".join(summary_lines())) == ([], [])

    def test_global_error_is_separated(self):
        text = (GOLDEN / "global.plain.txt").read_text(encoding="utf-8")
        diags, global_errors = parse_output(text)
        assert diags == []
        assert global_errors == ["error TS2688: Cannot find type definition file for 'node'."]

    def test_path_with_parentheses(self):
        text = (GOLDEN / "modules.plain.txt").read_text(encoding="utf-8")
        paths = {d.path for d in parse_output(text)[0]}
        assert "old (copy)/legacy.js" in paths


class TestParsing:
    def test_fields(self):
        d = parse_diagnostic_line("src/a.js(12,5): error TS2322: Type 'string' is not assignable to type 'number'.")
        assert (d.path, d.line, d.column, d.code, d.severity) == ("src/a.js", 12, 5, "TS2322", "error")

    def test_multiline_message_is_folded(self):
        text = "a.js(1,1): error TS2349: This expression is not callable.\n  Type 'Number' has no call signatures.\n"
        (d,), _ = parse_output(text)
        assert d.message == "This expression is not callable.\n  Type 'Number' has no call signatures."
        assert normalize_message(d.message) == "This expression is not callable. Type 'Number' has no call signatures."

    def test_crlf(self):
        (d,), _ = parse_output("a.js(1,2): error TS1: x\r\n")
        assert d.message == "x"

    @pytest.mark.parametrize("line", ["", "Found 3 errors.", "a.js: error TS1: x", "a.js(1,x): error TS1: y",
                                      "  continuation", "a.js(0,1): info TS1: x"])
    def test_non_diagnostics(self, line):
        assert parse_diagnostic_line(line) is None

    def test_invalid_positions_rejected(self):
        with pytest.raises(ValueError):
            Diagnostic("a.js", 0, 1, "TS1", "m")
        with pytest.raises(ValueError):
            Diagnostic("a.js", 1, 1, "bad", "m")

    def test_json_round_trip(self):
        d = Diagnostic("a.js", 3, 4, "TS2339", "m\n  n")
        assert Diagnostic.from_json(d.to_json()) == d

    def test_strip_ansi(self):
        assert strip_ansi("Found 1 error in a.js\x1b[90m:9\x1b[0m") == "Found 1 error in a.js:9"


class TestSnapshots:
    def snap(self, *items):
        return ErrorSnapshot.from_diagnostics([Diagnostic(p, ln, 1, c, m) for p, ln, c, m in items])

    def test_grouping_and_counts(self):
        s = self.snap(("b.js", 2, "TS1", "x"), ("a.js", 9, "TS2", "y"), ("a.js", 1, "TS2", "z"))
        assert list(s.by_file) == ["a.js", "b.js"]
        assert [d.line for d in s.for_file("a.js")] == [1, 9]
        assert s.total == 3 and s.count("TS2") == 2
        assert s.restrict("b.js").total == 1

    def test_diff_ignores_moves(self):
        before = self.snap(("a.js", 1, "TS1", "x"), ("a.js", 5, "TS2", "y"))
        after = self.snap(("a.js", 3, "TS1", "x"), ("b.js", 1, "TS3", "z"))
        d = diff_snapshots(before, after)
        assert sum(d.resolved.values()) == 1 and sum(d.introduced.values()) == 1
        assert not diff_snapshots(before, before)


class TestRunner:
    def test_missing_checker(self, tmp_path):
        with pytest.raises(CheckerNotFound, match="not found"):
            resolve_checker(str(tmp_path / "nope"), tmp_path)

    def test_crash_without_diagnostics(self, tmp_path):
        fake = tmp_path / "fake-tsc"
        fake.write_text("#!/bin/sh\necho 'something broke' >&2\nexit 3\n")
        fake.chmod(0o755)
        with pytest.raises(CheckerError) as info:
            run_check(tmp_path, checker=str(fake))
        assert "exited 3" in str(info.value)

    @pytest.mark.checker
    def test_project_level_error_aborts(self, tmp_path):
        (tmp_path / "a.js").write_text("module.exports = 1;\n")
        (tmp_path / "tsconfig.json").write_text(
            '{"compilerOptions":{"allowJs":true,"checkJs":true,"noEmit":true,"types":["node"]}}')
        with pytest.raises(CheckerError, match="TS2688"):
            run_check(tmp_path)

    @pytest.mark.checker
    @pytest.mark.parametrize("corpus", CORPUS_NAMES)
    def test_real_run_matches_oracle(self, tmp_path, corpus):
        repo = copy_repo(CORPORA / corpus, tmp_path / corpus)
        expected, _ = parse_output((CORPORA / f"{corpus}.expected.txt").read_text(encoding="utf-8"))
        snap = run_check(repo)
        assert snap.errors() == sorted(expected, key=lambda d: (d.path, d.line, d.column, d.code, d.message))

    @pytest.mark.checker
    def test_scope_filters(self, tmp_path):
        repo = copy_repo(CORPORA / "ledger", tmp_path / "r")
        snap = run_check(repo, "src/ledger_00.js")
        assert set(snap.by_file) <= {"src/ledger_00.js"}


class TestCoalescing:
    def test_concurrent_requests_share_runs(self, tmp_path, monkeypatch):
        calls = []

        def fake_run(root, scope=None, **kw):
            calls.append(time.monotonic())
            time.sleep(0.05)
            return ErrorSnapshot.from_diagnostics([Diagnostic("a.js", 1, 1, "TS1", "x")])

        monkeypatch.setattr("retrotype.checker.run_check", fake_run)
        checker = CoalescingChecker(tmp_path)
        results = []
        threads = [threading.Thread(target=lambda: results.append(checker.check("a.js"))) for _ in range(10)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(results) == 10 and all(r.total == 1 for r in results)
        assert checker.runs == len(calls) <= 3

    def test_result_postdates_request(self, tmp_path, monkeypatch):
        state = {"n": 0}

        def fake_run(root, scope=None, **kw):
            state["n"] += 1
            return ErrorSnapshot.from_diagnostics([Diagnostic("a.js", state["n"], 1, "TS1", "x")])

        monkeypatch.setattr("retrotype.checker.run_check", fake_run)
        checker = CoalescingChecker(tmp_path)
        assert checker.check().errors()[0].line == 1
        assert checker.check().errors()[0].line == 2

    def test_errors_propagate(self, tmp_path, monkeypatch):
        def boom(root, scope=None, **kw):
            raise CheckerError("broken")

        monkeypatch.setattr("retrotype.checker.run_check", boom)
        with pytest.raises(CheckerError):
            CoalescingChecker(tmp_path).check()
