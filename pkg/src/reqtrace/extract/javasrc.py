"""Declaration-level parsing of Java sources.

A deliberately small scanner: comments and literals are blanked, the
token stream is walked with a brace-context stack, and declarations of
classes, interfaces, enums, and bodied methods are recorded together
with call/constructor references and extends/implements names. There is
no type inference and no annotation processing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..model import KIND_CLASS, KIND_ENUM, KIND_INTERFACE, KIND_METHOD
from .pysrc import Declaration, ParsedFile

_TYPE_KEYWORDS = {"class": KIND_CLASS, "interface": KIND_INTERFACE, "enum": KIND_ENUM}

# identifiers that precede '(' without being calls or declarations
_NON_CALL_KEYWORDS = {
    "if", "for", "while", "switch", "catch", "synchronized", "return",
    "assert", "throw", "do", "else", "try", "finally", "this", "super", "new",
}

_KEYWORDS = _NON_CALL_KEYWORDS | set(_TYPE_KEYWORDS) | {
    "package", "import", "extends", "implements", "throws", "static",
    "public", "private", "protected", "final", "abstract", "native",
    "transient", "volatile", "strictfp", "default", "void",
}

_TOKEN_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*|\S")


@dataclass
class _Tok:
    value: str
    line: int

    @property
    def is_ident(self) -> bool:
        return bool(re.match(r"[A-Za-z_$]", self.value)) and self.value not in _KEYWORDS


def _blank_comments_and_literals(text: str) -> str:
    """Replace comments and string/char literals with spaces, keeping newlines."""
    out = list(text)
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                out[i] = " "
                i += 1
        elif ch == "/" and i + 1 < n and text[i + 1] == "*":
            out[i] = out[i + 1] = " "
            i += 2
            while i < n and not (text[i] == "*" and i + 1 < n and text[i + 1] == "/"):
                if text[i] != "\n":
                    out[i] = " "
                i += 1
            if i + 1 < n:
                out[i] = out[i + 1] = " "
                i += 2
        elif ch in "\"'":
            quote = ch
            out[i] = " "
            i += 1
            while i < n and text[i] != quote:
                if text[i] == "\\" and i + 1 < n:
                    out[i] = " "
                    i += 1
                if text[i] != "\n":
                    out[i] = " "
                i += 1
            if i < n:
                out[i] = " "
                i += 1
        else:
            i += 1
    return "".join(out)


def _tokenize(clean: str) -> list[_Tok]:
    toks = []
    for lineno, line in enumerate(clean.split("\n"), start=1):
        for m in _TOKEN_RE.finditer(line):
            toks.append(_Tok(m.group(0), lineno))
    return toks


@dataclass
class _Ctx:
    kind: str  # "type" | "method" | "block"
    decl: Declaration | None
    type_kind: str | None = None
    enum_header: bool = False  # inside enum constant list, before the first ';'
    in_field_init: bool = False
    refs: set[str] = field(default_factory=set)


def _read_dotted(toks: list[_Tok], i: int) -> tuple[str, int]:
    parts = []
    while i < len(toks) and (toks[i].is_ident or toks[i].value in (".", "*")):
        parts.append(toks[i].value)
        i += 1
    return "".join(parts), i


def _match_paren(toks: list[_Tok], i: int) -> int:
    """Index just past the ')' matching the '(' at index i, or len(toks)."""
    depth = 0
    while i < len(toks):
        if toks[i].value == "(":
            depth += 1
        elif toks[i].value == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return i


def parse_java(path: str, text: str) -> ParsedFile:
    clean = _blank_comments_and_literals(text)
    toks = _tokenize(clean)
    declarations: list[Declaration] = []
    imports: dict[str, str] = {}
    wildcards: list[str] = []
    stack: list[_Ctx] = []
    i = 0
    n = len(toks)

    def enclosing_qualifier() -> str | None:
        # innermost type context already carries its fully qualified name
        for ctx in reversed(stack):
            if ctx.kind == "type" and ctx.decl:
                return ctx.decl.qualified_name
        return None

    def qualify(name: str) -> str:
        outer = enclosing_qualifier()
        return f"{outer}.{name}" if outer else name

    def innermost_refs() -> set[str] | None:
        for ctx in reversed(stack):
            if ctx.kind in ("type", "method") and ctx.decl is not None:
                return ctx.decl.calls
        return None

    while i < n:
        tok = toks[i]
        val = tok.value
        prev = toks[i - 1].value if i > 0 else ""

        if val == "package" and not stack:
            _, i = _read_dotted(toks, i + 1)
            continue

        if val == "import" and not stack:
            j = i + 1
            if j < n and toks[j].value == "static":
                j += 1
            dotted, j = _read_dotted(toks, j)
            if dotted.endswith(".*"):
                wildcards.append(dotted[:-2])
            elif dotted:
                imports[dotted.split(".")[-1]] = dotted
            i = j
            continue

        if val in _TYPE_KEYWORDS and i + 1 < n and toks[i + 1].is_ident and prev != ".":
            name = toks[i + 1].value
            decl = Declaration(
                qualified_name=qualify(name),
                kind=_TYPE_KEYWORDS[val],
                line_span=(tok.line, tok.line),
                source_code="",
                parent=enclosing_qualifier(),
            )
            # header: collect extends/implements names up to the opening brace
            j = i + 2
            angle = 0
            collecting = False
            while j < n and toks[j].value != "{":
                v = toks[j].value
                if v == "<":
                    angle += 1
                elif v == ">":
                    angle = max(0, angle - 1)
                elif v in ("extends", "implements"):
                    collecting = True
                elif collecting and angle == 0 and toks[j].is_ident and toks[j - 1].value != ".":
                    decl.bases.add(v)
                j += 1
            declarations.append(decl)
            if j < n:  # the '{'
                stack.append(
                    _Ctx("type", decl, type_kind=_TYPE_KEYWORDS[val], enum_header=(val == "enum"))
                )
            i = j + 1
            continue

        if val == "{":
            stack.append(_Ctx("block", None))
            i += 1
            continue

        if val == "}":
            if stack:
                ctx = stack.pop()
                if ctx.decl is not None:
                    ctx.decl.line_span = (ctx.decl.line_span[0], tok.line)
            i += 1
            continue

        top = stack[-1] if stack else None

        if top is not None and top.kind == "type":
            if val == ";":
                top.enum_header = False
                top.in_field_init = False
                i += 1
                continue
            if val == "=":
                top.in_field_init = True
                i += 1
                continue
            if tok.is_ident and i + 1 < n and toks[i + 1].value == "(" and prev != "@":
                if top.in_field_init or top.enum_header or prev == "new" or prev == ".":
                    # a call inside a field initializer or enum constant arguments
                    top.decl.calls.add(val)
                    i = _match_paren(toks, i + 1)
                    continue
                close = _match_paren(toks, i + 1)
                j = close
                while j < n and toks[j].value not in ("{", ";", "="):
                    j += 1  # skip throws clause / whitespace tokens
                if j < n and toks[j].value == "{":
                    decl = Declaration(
                        qualified_name=qualify(val),
                        kind=KIND_METHOD,
                        line_span=(tok.line, tok.line),
                        source_code="",
                        parent=enclosing_qualifier(),
                    )
                    declarations.append(decl)
                    stack.append(_Ctx("method", decl))
                    i = j + 1
                    continue
                if j < n and toks[j].value == "=":
                    i = j  # field declaration like `Foo x = ...`
                    continue
                i = j + 1  # abstract/native signature: not a component
                continue
            i += 1
            continue

        # inside a method body or plain block: record call references
        if tok.is_ident and i + 1 < n and toks[i + 1].value == "(" and prev != "@":
            sink = innermost_refs()
            if sink is not None:
                ref = val
                if prev == "." and i >= 2 and toks[i - 2].is_ident:
                    ref = f"{toks[i - 2].value}.{val}"
                sink.add(ref)
            i += 1
            continue
        if val == "new" and i + 1 < n and toks[i + 1].is_ident:
            sink = innermost_refs()
            if sink is not None:
                sink.add(toks[i + 1].value)
            i += 2
            continue
        i += 1

    if stack:
        return ParsedFile(path, [], {}, [], error=f"{path}: unbalanced braces at end of file")

    lines = text.split("\n")
    for decl in declarations:
        start, end = decl.line_span
        end = max(start, min(end, len(lines)))
        decl.line_span = (start, end)
        decl.source_code = "\n".join(lines[start - 1 : end])
    return ParsedFile(path, declarations, imports, wildcards)
