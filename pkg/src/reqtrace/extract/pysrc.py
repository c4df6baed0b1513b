"""Declaration-level parsing of Python sources via the stdlib ast module."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

from ..model import KIND_CLASS, KIND_FUNCTION, KIND_METHOD


@dataclass
class Declaration:
    qualified_name: str
    kind: str
    line_span: tuple[int, int]
    source_code: str
    calls: set[str] = field(default_factory=set)
    bases: set[str] = field(default_factory=set)
    parent: str | None = None


@dataclass
class ParsedFile:
    path: str
    declarations: list[Declaration]
    imports: dict[str, str]
    wildcard_imports: list[str]
    error: str | None = None


_DEF_NODES = (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)


def _name_of(node: ast.expr) -> str | None:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    return None


def _call_ref(func: ast.expr) -> str | None:
    """Reference name for a call target: ``name`` or one-level ``Head.name``."""
    if isinstance(func, ast.Name):
        return func.id
    if isinstance(func, ast.Attribute):
        head = func.value
        if isinstance(head, ast.Name) and head.id not in ("self", "cls"):
            return f"{head.id}.{func.attr}"
        return func.attr
    return None


def _collect_calls(nodes: list[ast.stmt] | list[ast.expr], sink: set[str]) -> None:
    """Collect call-target reference names, skipping nested declaration bodies."""
    for top in nodes:
        for node in ast.walk(top):
            if isinstance(node, _DEF_NODES) and node is not top:
                # nested declarations own their references
                continue
            if isinstance(node, ast.Call):
                name = _call_ref(node.func)
                if name:
                    sink.add(name)


def _statements_without_defs(body: list[ast.stmt]) -> list[ast.stmt]:
    return [s for s in body if not isinstance(s, _DEF_NODES)]


def _segment(lines: list[str], start: int, end: int) -> str:
    return "\n".join(lines[start - 1 : end])


def _module_dotted(path: str) -> str:
    base = path[:-3] if path.endswith(".py") else path
    if base.endswith("/__init__"):
        base = base[: -len("/__init__")]
    return base.replace("/", ".")


def _resolve_relative(path: str, level: int, module: str | None) -> str:
    """Turn ``from ..x import y`` into a repo-rooted dotted path."""
    parts = _module_dotted(path).split(".")
    # level 1 = current package; each extra level climbs one package
    keep = len(parts) - level
    if keep < 0:
        keep = 0
    prefix = parts[:keep]
    if module:
        prefix += module.split(".")
    return ".".join(prefix)


def parse_python(path: str, text: str) -> ParsedFile:
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        return ParsedFile(path, [], {}, [], error=f"{path}: {exc}")

    lines = text.split("\n")
    declarations: list[Declaration] = []
    imports: dict[str, str] = {}
    wildcards: list[str] = []

    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                local = alias.asname or alias.name.split(".")[0]
                imports[local] = alias.name
        elif isinstance(node, ast.ImportFrom):
            base = node.module or ""
            if node.level:
                base = _resolve_relative(path, node.level, node.module)
            for alias in node.names:
                if alias.name == "*":
                    wildcards.append(base)
                    continue
                local = alias.asname or alias.name
                target = f"{base}.{alias.name}" if base else alias.name
                imports[local] = target

    def visit(body: list[ast.stmt], parents: list[str], in_class: bool) -> None:
        for node in body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                kind = KIND_METHOD if in_class else KIND_FUNCTION
                qname = ".".join(parents + [node.name])
                decl = Declaration(
                    qualified_name=qname,
                    kind=kind,
                    line_span=(node.lineno, node.end_lineno or node.lineno),
                    source_code=_segment(lines, node.lineno, node.end_lineno or node.lineno),
                    parent=".".join(parents) or None,
                )
                _collect_calls(_statements_without_defs(node.body), decl.calls)
                _collect_calls(node.decorator_list, decl.calls)
                declarations.append(decl)
                visit(node.body, parents + [node.name], in_class=False)
            elif isinstance(node, ast.ClassDef):
                qname = ".".join(parents + [node.name])
                decl = Declaration(
                    qualified_name=qname,
                    kind=KIND_CLASS,
                    line_span=(node.lineno, node.end_lineno or node.lineno),
                    source_code=_segment(lines, node.lineno, node.end_lineno or node.lineno),
                    parent=".".join(parents) or None,
                )
                for base in node.bases:
                    name = _name_of(base)
                    if name:
                        decl.bases.add(name)
                _collect_calls(_statements_without_defs(node.body), decl.calls)
                _collect_calls(node.decorator_list, decl.calls)
                declarations.append(decl)
                visit(node.body, parents + [node.name], in_class=True)

    visit(tree.body, [], False)
    return ParsedFile(path, declarations, imports, wildcards)
