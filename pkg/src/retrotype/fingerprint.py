"""Canonical token streams for JavaScript sources.

Two sources with equal fingerprints differ only in comments and in the
whitespace between tokens. Since type annotations in checked JavaScript live
entirely in comments, an annotation-only edit never changes the fingerprint,
while any edit to executable code does.

The lexer is deliberately parser-free. Regex literals are told apart from
division by looking at the previous significant token, which is the classic
heuristic and is known to guess wrong in a few places (a regex right after the
``)`` of an ``if`` condition lexes as division). Both sides of a comparison
are lexed with the same rule, so a wrong guess is consistent and never hides a
real change.
"""

from __future__ import annotations

import difflib
import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum


class LexError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TokenKind(str, Enum):
    IDENTIFIER = "identifier"
    PUNCTUATOR = "punctuator"
    NUMERIC = "numeric_literal"
    STRING = "string_literal"
    TEMPLATE = "template_chunk"
    REGEX = "regex_literal"


# One byte per kind in the hash framing. Part of the published hash format.
KIND_TAGS: dict[TokenKind, bytes] = {
    TokenKind.IDENTIFIER: b"i",
    TokenKind.PUNCTUATOR: b"p",
    TokenKind.NUMERIC: b"n",
    TokenKind.STRING: b"s",
    TokenKind.TEMPLATE: b"t",
    TokenKind.REGEX: b"r",
}


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    line: int = field(default=0, compare=False)
    offset: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.lexeme:
            raise ValueError("token lexeme must be non-empty")


_PUNCTUATORS = sorted(
    """
    >>>= ... === !== **= <<= >>= >>> &&= ||= ??=
    => == != <= >= && || ?? ?. ++ -- += -= *= /= %= &= |= ^= ** << >>
    { } ( ) [ ] ; , < > + - * / % & | ^ ! ~ ? : = . @
    """.split(),
    key=len,
    reverse=True,
)

_REGEX_AFTER_CHARS = frozenset("(,=:[!&|?{};")
_REGEX_AFTER_KEYWORDS = frozenset(
    "return typeof instanceof in of new delete void throw case do else".split()
)

_NUMBER_RE = re.compile(
    r"""
    0[xX][0-9a-fA-F_]+n?
  | 0[oO][0-7_]+n?
  | 0[bB][01_]+n?
  | (?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?n?
    """,
    re.VERBOSE,
)
_IDENT_PART_RE = re.compile(r"(?:[\w$\u200c\u200d]|\\u[0-9a-fA-F]{4}|\\u\{[0-9a-fA-F]+\})+")
_REGEX_FLAGS_RE = re.compile(r"[\w$]*")
_LINE_BREAKS = "\n\r\u2028\u2029"


def _is_ident_start(ch: str) -> bool:
    return ch in "$_\\" or ch.isalpha() or (ord(ch) > 127 and ch.isidentifier())


def _regex_allowed(prev: Token | None) -> bool:
    if prev is None:
        return True
    if prev.kind is TokenKind.PUNCTUATOR:
        return prev.lexeme[-1] in _REGEX_AFTER_CHARS
    if prev.kind is TokenKind.IDENTIFIER:
        return prev.lexeme in _REGEX_AFTER_KEYWORDS
    if prev.kind is TokenKind.TEMPLATE:
        return prev.lexeme.endswith("${")
    return False


class _Lexer:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.line = 1
        self.tokens: list[Token] = []
        self.comments: list[tuple[int, int]] = []
        # "t" marks a brace opened by a template substitution, "b" any other.
        self.braces: list[str] = []

    def advance_to(self, end: int):
        self.line += self.src.count("\n", self.pos, end)
        self.pos = end

    def emit(self, kind: TokenKind, end: int):
        self.tokens.append(Token(kind, self.src[self.pos:end], self.line, self.pos))
        self.advance_to(end)

    def run(self) -> list[Token]:
        src = self.src
        if src.startswith("#!"):
            nl = src.find("\n")
            self.advance_to(len(src) if nl < 0 else nl)
        while self.pos < len(src):
            ch = src[self.pos]
            if ch.isspace() or ch == "\ufeff":
                self.advance_to(self.pos + 1)
            elif src.startswith("//", self.pos):
                self.skip_line_comment()
            elif src.startswith("/*", self.pos):
                end = src.find("*/", self.pos + 2)
                if end < 0:
                    raise LexError("unterminated block comment", self.line)
                self.comments.append((self.pos, end + 2))
                self.advance_to(end + 2)
            elif src.startswith("<!--", self.pos):
                self.skip_line_comment()
            elif ch in "'\"":
                self.emit(TokenKind.STRING, self.scan_string(ch))
            elif ch == "`":
                self.emit(TokenKind.TEMPLATE, self.scan_template(self.pos + 1))
            elif ch.isdigit() or (ch == "." and src[self.pos + 1:self.pos + 2].isdigit()):
                m = _NUMBER_RE.match(src, self.pos)
                self.emit(TokenKind.NUMERIC, m.end())
            elif ch == "#" and self.pos + 1 < len(src) and _is_ident_start(src[self.pos + 1]):
                m = _IDENT_PART_RE.match(src, self.pos + 1)
                self.emit(TokenKind.IDENTIFIER, m.end() if m else self.pos + 1)
            elif _is_ident_start(ch):
                m = _IDENT_PART_RE.match(src, self.pos)
                if m is None:
                    raise LexError(f"stray {ch!r}", self.line)
                self.emit(TokenKind.IDENTIFIER, m.end())
            elif ch == "/" and _regex_allowed(self.tokens[-1] if self.tokens else None):
                self.emit(TokenKind.REGEX, self.scan_regex())
            elif ch == "}" and self.braces and self.braces[-1] == "t":
                self.braces.pop()
                self.emit(TokenKind.TEMPLATE, self.scan_template(self.pos + 1))
            else:
                self.scan_punctuator()
        return self.tokens

    def skip_line_comment(self):
        end = self.pos
        while end < len(self.src) and self.src[end] not in _LINE_BREAKS:
            end += 1
        self.advance_to(end)

    def scan_string(self, quote: str) -> int:
        src, i = self.src, self.pos + 1
        while i < len(src):
            c = src[i]
            if c == "\\":
                if src.startswith("\r\n", i + 1):
                    i += 3
                else:
                    i += 2
                continue
            if c == quote:
                return i + 1
            if c in "\n\r":
                break
            i += 1
        raise LexError("unterminated string literal", self.line)

    def scan_template(self, i: int) -> int:
        src = self.src
        while i < len(src):
            c = src[i]
            if c == "\\":
                i += 2
            elif c == "`":
                return i + 1
            elif c == "$" and src.startswith("${", i):
                self.braces.append("t")
                return i + 2
            else:
                i += 1
        raise LexError("unterminated template literal", self.line)

    def scan_regex(self) -> int:
        src, i = self.src, self.pos + 1
        in_class = False
        while i < len(src):
            c = src[i]
            if c in _LINE_BREAKS:
                break
            if c == "\\":
                i += 2
                continue
            if c == "[":
                in_class = True
            elif c == "]":
                in_class = False
            elif c == "/" and not in_class:
                return _REGEX_FLAGS_RE.match(src, i + 1).end()
            i += 1
        raise LexError("unterminated regular expression", self.line)

    def scan_punctuator(self):
        src = self.src
        for p in _PUNCTUATORS:
            if src.startswith(p, self.pos):
                # `a?.5:b` is a conditional, not optional chaining.
                if p == "?." and src[self.pos + 2:self.pos + 3].isdigit():
                    continue
                break
        else:
            raise LexError(f"unexpected character {src[self.pos]!r}", self.line)
        if p == "{":
            self.braces.append("b")
        elif p == "}" and self.braces:
            self.braces.pop()
        self.emit(TokenKind.PUNCTUATOR, self.pos + len(p))


def lex_canonical(source: str) -> list[Token]:
    """Tokenize ``source``, dropping comments and whitespace.

    Raises LexError on unterminated strings, templates, regexes or block
    comments.
    """
    return _Lexer(source).run()


def opaque_lines(source: str) -> set[int]:
    """1-based lines whose first character lies inside a comment or token.

    A line comment inserted at the start of such a line would not be a
    comment at all, or would land inside a string or template.
    """
    lexer = _Lexer(source)
    lexer.run()
    spans = lexer.comments + [(t.offset, t.offset + len(t.lexeme)) for t in lexer.tokens if "\n" in t.lexeme]
    out = set()
    if not spans:
        return out
    line_starts = [0] + [i + 1 for i, c in enumerate(source) if c == "\n"]
    for n, off in enumerate(line_starts, start=1):
        if any(start < off < end for start, end in spans):
            out.add(n)
    return out


def token_digest(tokens: list[Token]) -> str:
    h = hashlib.sha256()
    for tok in tokens:
        h.update(KIND_TAGS[tok.kind])
        h.update(b"\x1f")
        h.update(tok.lexeme.encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class Fingerprint:
    tokens: tuple[Token, ...]
    hash: str

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        if self.hash != other.hash:
            return False
        return self.tokens == other.tokens

    def __hash__(self):
        return hash(self.hash)


def fingerprint(source: str) -> Fingerprint:
    tokens = lex_canonical(source)
    return Fingerprint(tuple(tokens), token_digest(tokens))


# Spots where a line break changes how automatic semicolon insertion reads the code.
_BREAK_AFTER = frozenset("return throw break continue yield async".split())
_BREAK_BEFORE = frozenset(("++", "--", "=>"))


def restricted_breaks(fp: Fingerprint) -> frozenset[int]:
    """Indices of tokens that follow a line break at a semicolon-sensitive spot.

    Equal fingerprints with different sets here are not equivalent:
    ``return x`` and ``return // why\n x`` lex alike but return different
    values. Lines are counted by ``\n`` only.
    """
    toks = fp.tokens
    out = set()
    for i in range(1, len(toks)):
        prev, tok = toks[i - 1], toks[i]
        if tok.line <= prev.line + prev.lexeme.count("\n"):
            continue
        if (prev.kind is TokenKind.IDENTIFIER and prev.lexeme in _BREAK_AFTER) or \
                (tok.kind is TokenKind.PUNCTUATOR and tok.lexeme in _BREAK_BEFORE):
            out.add(i)
    return frozenset(out)


@dataclass(frozen=True)
class TokenEdit:
    op: str  # "insert" | "delete" | "replace"
    start: int  # position in the before-stream
    end: int
    removed: tuple[Token, ...]
    added: tuple[Token, ...]
    line: int

    def render(self) -> str:
        old = " ".join(t.lexeme for t in self.removed)
        new = " ".join(t.lexeme for t in self.added)
        if self.op == "insert":
            return f"line {self.line}: insert {new!r}"
        if self.op == "delete":
            return f"line {self.line}: delete {old!r}"
        return f"line {self.line}: replace {old!r} -> {new!r}"


@dataclass(frozen=True)
class TokenDiff:
    edits: tuple[TokenEdit, ...]

    def __bool__(self):
        return bool(self.edits)

    def __len__(self):
        return len(self.edits)

    def render(self) -> str:
        return "\n".join(e.render() for e in self.edits)


def _nearest_line(tokens: tuple[Token, ...], i: int) -> int:
    if i < len(tokens):
        return tokens[i].line
    return tokens[-1].line if tokens else 1


def token_diff(before: Fingerprint, after: Fingerprint) -> TokenDiff:
    """Edit script turning ``before``'s token stream into ``after``'s."""
    if before == after:
        return TokenDiff(())
    a, b = before.tokens, after.tokens
    # trim the shared ends first so a local change stays one local edit
    lo = 0
    while lo < len(a) and lo < len(b) and a[lo] == b[lo]:
        lo += 1
    hi = 0
    while hi < len(a) - lo and hi < len(b) - lo and a[-1 - hi] == b[-1 - hi]:
        hi += 1
    matcher = difflib.SequenceMatcher(None, a[lo:len(a) - hi], b[lo:len(b) - hi], autojunk=False)
    edits = []
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op == "equal":
            continue
        i1, i2, j1, j2 = i1 + lo, i2 + lo, j1 + lo, j2 + lo
        edits.append(TokenEdit(op, i1, i2, a[i1:i2], b[j1:j2], _nearest_line(a, i1)))
    return TokenDiff(tuple(edits))


def apply_diff(tokens: list[Token] | tuple[Token, ...], diff: TokenDiff) -> list[Token]:
    out = list(tokens)
    for edit in sorted(diff.edits, key=lambda e: e.start, reverse=True):
        if tuple(out[edit.start:edit.end]) != edit.removed:
            raise ValueError(f"edit at token {edit.start} does not match the stream")
        out[edit.start:edit.end] = edit.added
    return out
