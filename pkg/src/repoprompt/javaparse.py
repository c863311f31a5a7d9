"""Best-effort Java syntax extraction.

A small lexer plus a structural walk pull out exactly what prompt
construction needs: package and import declarations, class declarations
with their extends clause, method signatures and bodies, field
declarations, string literals, and identifier occurrences split into
plain identifiers and type-position identifiers.

This is not a compiler front end. It covers the Java subset found in
ordinary application code (classes, nested classes, fields with
initializers, methods, generics in declarations) and degrades to empty
element lists instead of raising when a file defeats it.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const
    continue default do double else enum extends final finally float for
    goto if implements import instanceof int interface long native new
    package private protected public return short static strictfp super
    switch synchronized this throw throws transient try void volatile
    while true false null""".split()
)

_TYPE_INTRODUCERS = frozenset(
    {"class", "interface", "enum", "extends", "implements", "new",
     "instanceof", "throws"}
)

_TOKEN_RE = re.compile(
    r"""(?P<comment>//[^\n]*|/\*.*?\*/)
      |(?P<string>"(?:\\.|[^"\\\n])*")
      |(?P<char>'(?:\\.|[^'\\\n])*')
      |(?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
      |(?P<number>\d[0-9A-Za-z_.]*)
      |(?P<ws>\s+)
      |(?P<punct>.)""",
    re.DOTALL | re.VERBOSE,
)


@dataclass(frozen=True)
class Span:
    """Zero-based source region; end_col is exclusive."""

    start_line: int
    start_col: int
    end_line: int
    end_col: int

    @property
    def start(self) -> tuple[int, int]:
        return (self.start_line, self.start_col)


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    line_table: tuple[int, ...]

    @classmethod
    def from_text(cls, path: str, text: str) -> "SourceFile":
        table = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                table.append(i + 1)
        return cls(path=path, text=text, line_table=tuple(table))

    @property
    def lines(self) -> list[str]:
        return self.text.split("\n")

    def position(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self.line_table, offset) - 1
        return line, offset - self.line_table[line]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int
    line: int
    col: int

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


@dataclass(frozen=True)
class ImportDecl:
    path: str
    line: int

    @property
    def simple_name(self) -> str:
        return self.path.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class ClassDecl:
    name: str
    extends_name: str | None
    span: Span


@dataclass(frozen=True)
class MethodDecl:
    signature: str
    name: str
    body_text: str
    enclosing_class: str
    span: Span
    body_span: Span | None


@dataclass(frozen=True)
class FieldDecl:
    text: str
    span: Span


@dataclass(frozen=True)
class Occurrence:
    text: str
    span: Span


@dataclass
class FileSyntaxIndex:
    path: str
    package_name: str | None = None
    imports: list[ImportDecl] = field(default_factory=list)
    classes: list[ClassDecl] = field(default_factory=list)
    methods: list[MethodDecl] = field(default_factory=list)
    field_declarations: list[FieldDecl] = field(default_factory=list)
    string_literals: list[Occurrence] = field(default_factory=list)
    identifiers: list[Occurrence] = field(default_factory=list)
    type_identifiers: list[Occurrence] = field(default_factory=list)
    parse_error: bool = False

    @property
    def primary_class_name(self) -> str:
        if self.classes:
            return self.classes[0].name
        stem = self.path.rsplit("/", 1)[-1]
        return stem[:-5] if stem.endswith(".java") else stem


def _lex(src: SourceFile) -> list[Token]:
    tokens: list[Token] = []
    for match in _TOKEN_RE.finditer(src.text):
        kind = match.lastgroup or "punct"
        if kind in ("comment", "ws"):
            continue
        line, col = src.position(match.start())
        tokens.append(Token(kind, match.group(), match.start(), line, col))
    return tokens


def _token_span(src: SourceFile, first: Token, last: Token) -> Span:
    end_line, end_col = src.position(last.end - 1)
    return Span(first.line, first.col, end_line, end_col + 1)


def _match_forward(tokens: list[Token], i: int, open_text: str, close_text: str) -> int:
    """Index of the token closing the bracket opened at ``i``."""
    depth = 0
    for j in range(i, len(tokens)):
        t = tokens[j].text
        if t == open_text:
            depth += 1
        elif t == close_text:
            depth -= 1
            if depth == 0:
                return j
    raise ValueError(f"unbalanced {open_text} at token {i}")


def _generic_close(tokens: list[Token], i: int) -> int | None:
    """Match a generic argument list starting at tokens[i] == '<'.

    Returns the index of the closing '>' or None when the run cannot be
    a type argument list (used to tell ``List<String>`` from ``i < n``).
    """
    depth = 0
    j = i
    while j < len(tokens):
        t = tokens[j]
        if t.text == "<":
            depth += 1
        elif t.text == ">":
            depth -= 1
            if depth == 0:
                return j
        elif t.kind == "ident" and (t.text not in JAVA_KEYWORDS or t.text in ("extends", "super")):
            pass
        elif t.text in (",", "?", "[", "]", "."):
            pass
        else:
            return None
        j += 1
    return None


class _Walker:
    """Single forward pass that records structure and occurrences."""

    def __init__(self, src: SourceFile, tokens: list[Token]):
        self.src = src
        self.tokens = tokens
        self.index = FileSyntaxIndex(path=src.path)
        self.statement_indices: set[int] = set()
        self.ti_indices: set[int] = set()

    def run(self) -> FileSyntaxIndex:
        i = 0
        while i < len(self.tokens):
            i = self._top_level(i)
        self._mark_type_positions()
        self._collect_occurrences()
        return self.index

    # structure ------------------------------------------------------

    def _skip_statement(self, i: int) -> int:
        """Advance past tokens up to and including the next ';'."""
        j = i
        while j < len(self.tokens) and self.tokens[j].text != ";":
            self.statement_indices.add(j)
            j += 1
        if j < len(self.tokens):
            self.statement_indices.add(j)
        return min(j + 1, len(self.tokens))

    def _top_level(self, i: int) -> int:
        t = self.tokens[i]
        if t.kind == "ident" and t.text == "package":
            j = self._skip_statement(i)
            parts = [p.text for p in self.tokens[i + 1:j - 1]]
            self.index.package_name = "".join(parts)
            return j
        if t.kind == "ident" and t.text == "import":
            j = self._skip_statement(i)
            parts = [
                p.text for p in self.tokens[i + 1:j - 1] if p.text != "static"
            ]
            self.index.imports.append(ImportDecl("".join(parts), t.line))
            return j
        if t.kind == "ident" and t.text in ("class", "interface", "enum"):
            return self._class_decl(i, start=i)
        return i + 1

    def _class_decl(self, kw: int, start: int) -> int:
        tokens = self.tokens
        name_i = kw + 1
        if name_i >= len(tokens) or tokens[name_i].kind != "ident":
            return kw + 1
        name = tokens[name_i].text
        extends_name: str | None = None
        j = name_i + 1
        if j < len(tokens) and tokens[j].text == "<":
            close = _generic_close(tokens, j)
            if close is not None:
                j = close + 1
        while j < len(tokens) and tokens[j].text != "{":
            if tokens[j].text == "extends" and extends_name is None:
                k = j + 1
                if k < len(tokens) and tokens[k].kind == "ident":
                    extends_name = tokens[k].text
            j += 1
        if j >= len(tokens):
            return len(tokens)
        close = _match_forward(tokens, j, "{", "}")
        span = _token_span(self.src, tokens[start], tokens[close])
        self.index.classes.append(ClassDecl(name, extends_name, span))
        m = j + 1
        while m < close:
            m = self._member(m, close, name)
        return close + 1

    def _member(self, i: int, class_close: int, class_name: str) -> int:
        tokens = self.tokens
        k = i
        seen_assign = False
        while k < class_close:
            t = tokens[k]
            if t.kind == "ident" and t.text in ("class", "interface", "enum"):
                return self._class_decl(k, start=i)
            if t.text == ";":
                if k > i:
                    self._record_field(i, k)
                return k + 1
            if t.text == "=":
                seen_assign = True
                k = self._initializer_end(k + 1, class_close)
                if k < class_close and tokens[k].text == ";":
                    self._record_field(i, k)
                return min(k + 1, class_close)
            if t.text == "{":
                # Initializer block (or stray brace): skip wholesale.
                return _match_forward(tokens, k, "{", "}") + 1
            if t.text == "(" and not seen_assign:
                return self._method(i, k, class_close, class_name)
            if t.text == "<":
                close = _generic_close(tokens, k)
                if close is not None and close < class_close:
                    k = close + 1
                    continue
            k += 1
        return class_close

    def _initializer_end(self, i: int, limit: int) -> int:
        depth = 0
        j = i
        while j < limit:
            t = self.tokens[j].text
            if t in ("(", "{", "["):
                depth += 1
            elif t in (")", "}", "]"):
                depth -= 1
            elif t == ";" and depth == 0:
                return j
            j += 1
        return limit

    def _record_field(self, start: int, semi: int) -> None:
        span = _token_span(self.src, self.tokens[start], self.tokens[semi])
        text = self.src.text[self.tokens[start].offset:self.tokens[semi].end]
        self.index.field_declarations.append(FieldDecl(text, span))

    def _method(self, start: int, paren: int, class_close: int, class_name: str) -> int:
        tokens = self.tokens
        if paren == start or tokens[paren - 1].kind != "ident":
            try:
                return _match_forward(tokens, paren, "(", ")") + 1
            except ValueError:
                return paren + 1
        name = tokens[paren - 1].text
        close_paren = _match_forward(tokens, paren, "(", ")")
        signature = self.src.text[tokens[start].offset:tokens[close_paren].end]
        j = close_paren + 1
        while j < class_close and tokens[j].text not in ("{", ";"):
            j += 1
        if j >= class_close:
            return class_close
        if tokens[j].text == ";":
            span = _token_span(self.src, tokens[start], tokens[j])
            self.index.methods.append(
                MethodDecl(signature, name, "", class_name, span, None)
            )
            return j + 1
        body_close = _match_forward(tokens, j, "{", "}")
        body_text = self.src.text[tokens[j].offset:tokens[body_close].end]
        span = _token_span(self.src, tokens[start], tokens[body_close])
        body_span = _token_span(self.src, tokens[j], tokens[body_close])
        self.index.methods.append(
            MethodDecl(signature, name, body_text, class_name, span, body_span)
        )
        return body_close + 1

    # occurrences ----------------------------------------------------

    def _mark_type_positions(self) -> None:
        tokens = self.tokens
        for i, t in enumerate(tokens):
            if t.kind != "ident" or t.text in JAVA_KEYWORDS:
                continue
            if i in self.statement_indices:
                continue
            prev = tokens[i - 1] if i > 0 else None
            if prev is not None and prev.kind == "ident" and prev.text in _TYPE_INTRODUCERS:
                self.ti_indices.add(i)
                continue
            j = i + 1
            if j < len(tokens) and tokens[j].text == "<":
                close = _generic_close(tokens, j)
                if close is not None:
                    after = close + 1
                    if after < len(tokens) and tokens[after].kind == "ident" \
                            and tokens[after].text not in JAVA_KEYWORDS:
                        self.ti_indices.add(i)
                        for k in range(j + 1, close):
                            inner = tokens[k]
                            if inner.kind == "ident" and inner.text not in JAVA_KEYWORDS:
                                self.ti_indices.add(k)
                    continue
            while j + 1 < len(tokens) and tokens[j].text == "[" and tokens[j + 1].text == "]":
                j += 2
            if j < len(tokens) and tokens[j].kind == "ident" \
                    and tokens[j].text not in JAVA_KEYWORDS:
                self.ti_indices.add(i)

    def _collect_occurrences(self) -> None:
        for i, t in enumerate(self.tokens):
            if i in self.statement_indices:
                continue
            span = _token_span(self.src, t, t)
            if t.kind == "string":
                self.index.string_literals.append(Occurrence(t.text, span))
            elif t.kind == "ident" and t.text not in JAVA_KEYWORDS:
                occ = Occurrence(t.text, span)
                if i in self.ti_indices:
                    self.index.type_identifiers.append(occ)
                else:
                    self.index.identifiers.append(occ)


def parse_file(src: SourceFile) -> FileSyntaxIndex:
    """Extract syntax elements; never raises on malformed code."""
    try:
        return _Walker(src, _lex(src)).run()
    except Exception:
        return FileSyntaxIndex(path=src.path, parse_error=True)


# region selection ---------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Element filter: whole file, or by element start position."""

    kind: str
    line: int = 0
    col: int = 0


WHOLE_FILE = Region("whole")


def after_position(line: int, col: int) -> Region:
    return Region("after", line, col)


def before_position(line: int, col: int) -> Region:
    return Region("before", line, col)


def _in_region(span: Span, region: Region) -> bool:
    if region.kind == "whole":
        return True
    if region.kind == "after":
        return span.start > (region.line, region.col)
    return span.start <= (region.line, region.col)


def extract_strings(index: FileSyntaxIndex, context_type: str, region: Region = WHOLE_FILE) -> list[str]:
    """Elements of one kind inside a region, deduped in source order.

    ``context_type`` is one of MN, MNB, I, TI, SL, FD. Post lines are
    not handled here because they are plain line slicing.
    """
    if context_type == "MN":
        items = [(m.span, m.signature) for m in index.methods]
    elif context_type == "MNB":
        items = [
            (m.span, m.signature + " " + m.body_text if m.body_text else m.signature)
            for m in index.methods
        ]
    elif context_type == "I":
        items = [(o.span, o.text) for o in index.identifiers]
    elif context_type == "TI":
        items = [(o.span, o.text) for o in index.type_identifiers]
    elif context_type == "SL":
        items = [(o.span, o.text) for o in index.string_literals]
    elif context_type == "FD":
        items = [(f.span, f.text) for f in index.field_declarations]
    else:
        raise ValueError(f"unsupported context type {context_type!r}")
    seen: set[str] = set()
    out: list[str] = []
    for span, text in items:
        if _in_region(span, region) and text not in seen:
            seen.add(text)
            out.append(text)
    return out
