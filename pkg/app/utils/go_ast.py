"""
Tree-sitter helpers for Go sources.

Provides the parser, generic traversal, function extraction with stable
names for anonymous functions, goroutine launch discovery and statement
lookup by line.
"""

import logging
import re
from pathlib import PurePosixPath
from typing import Dict, Iterable, Iterator, List, Optional

import tree_sitter_go
from tree_sitter import Language, Node, Parser, Tree

from app.errors import NoStatementAtLine, ParseError
from app.models import AsyncLaunchSite, FunctionKind, SubjectFunction

logger = logging.getLogger(__name__)

GO_LANGUAGE = Language(tree_sitter_go.language())

FUNCTION_NODE_TYPES = ("function_declaration", "method_declaration", "func_literal")
DECLARATION_NODE_TYPES = ("function_declaration", "method_declaration")

# Standalone function texts are parsed inside a synthetic file.
SNIPPET_PREFIX = b"package snippet\n\n"

DECLARATION_STATEMENT_TYPES = ("short_var_declaration", "var_declaration", "var_spec", "const_declaration", "const_spec", "import_spec")

GO_ESCAPE_RE = re.compile(r"\\(?:[abfnrtv\\'\"]|x[0-9A-Fa-f]{2}|[0-7]{3}|u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8})")
SIMPLE_ESCAPES = {
    "a": "\a", "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t", "v": "\v",
    "\\": "\\", "'": "'", '"': '"',
}


def parse_bytes(source: bytes) -> Tree:
    return Parser(GO_LANGUAGE).parse(source)


def node_text(source: bytes, node: Node) -> str:
    return source[node.start_byte:node.end_byte].decode("utf-8", errors="replace")


def walk(node: Node) -> Iterator[Node]:
    """Pre-order DFS over a node and its descendants, in source order."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def first_error(root: Node) -> Optional[Node]:
    if not root.has_error:
        return None
    for node in walk(root):
        if node.type == "ERROR" or node.is_missing:
            return node
    return root


def ensure_valid(tree: Tree, path: str) -> None:
    bad = first_error(tree.root_node)
    if bad is not None:
        row, column = bad.start_point
        detail = f"missing {bad.type}" if bad.is_missing else "syntax error"
        raise ParseError(path, row + 1, column + 1, detail)


def block_statements(block: Node) -> List[Node]:
    """Named statements of a '{...}' block, flattening the statement_list wrapper."""
    statements = []
    for child in block.named_children:
        if child.type == "statement_list":
            statements.extend(c for c in child.named_children if c.type != "comment")
        elif child.type != "comment":
            statements.append(child)
    return statements


def _receiver_type_name(source: bytes, receiver: Node) -> str:
    for param in receiver.named_children:
        if param.type != "parameter_declaration":
            continue
        type_node = param.child_by_field_name("type")
        while type_node is not None and type_node.type in ("pointer_type", "parenthesized_type"):
            type_node = type_node.named_children[-1] if type_node.named_children else None
        if type_node is None:
            break
        if type_node.type == "generic_type":
            type_node = type_node.child_by_field_name("type") or type_node.named_children[0]
        return node_text(source, type_node)
    return "_"


def _declaration_name(source: bytes, node: Node) -> str:
    name = node_text(source, node.child_by_field_name("name"))
    if node.type == "method_declaration":
        return f"{_receiver_type_name(source, node.child_by_field_name('receiver'))}.{name}"
    return name


def iter_functions(root: Node, source: bytes, path: str) -> Iterator[tuple]:
    """Yields (node, name, kind) for every function in lexical order."""
    stem = PurePosixPath(path).stem
    counters: Dict[str, int] = {}
    enclosing_stack: List[tuple] = []  # (end_byte, name)

    for node in walk(root):
        if node.type not in FUNCTION_NODE_TYPES:
            continue
        while enclosing_stack and node.start_byte >= enclosing_stack[-1][0]:
            enclosing_stack.pop()
        if node.type in DECLARATION_NODE_TYPES:
            name = _declaration_name(source, node)
            kind = FunctionKind.METHOD if node.type == "method_declaration" else FunctionKind.NAMED
            enclosing_stack = [(node.end_byte, name)]
        else:
            enclosing = enclosing_stack[0][1] if enclosing_stack else stem
            counters[enclosing] = counters.get(enclosing, 0) + 1
            name = f"{enclosing}$anon{counters[enclosing]}"
            kind = FunctionKind.ANONYMOUS
        yield node, name, kind


def parse_functions(file_text: str, path: str) -> List[SubjectFunction]:
    """
    Extract every named function, method and function literal of a Go file.

    Functions are returned in increasing start offset. Anonymous functions are
    named '<enclosing>$anon<N>', N counting literals inside the nearest named
    declaration (or the file stem at package level) in lexical order.

    Raises:
        ParseError: the file does not parse; carries the first error location.
    """
    source = file_text.encode("utf-8")
    tree = parse_bytes(source)
    ensure_valid(tree, path)

    functions = []
    for node, name, kind in iter_functions(tree.root_node, source, path):
        body = node.child_by_field_name("body")
        functions.append(SubjectFunction(
            name=name,
            file=path,
            decl_line=node.start_point[0] + 1,
            body_span=(node.start_byte, node.end_byte),
            block_span=(body.start_byte, body.end_byte) if body is not None else None,
            source=node_text(source, node),
            kind=kind,
        ))
    return functions


def find_node_at(root: Node, start_byte: int, types: Iterable[str]) -> Optional[Node]:
    types = tuple(types)
    for node in walk(root):
        if node.start_byte == start_byte and node.type in types:
            return node
        if node.start_byte > start_byte:
            break
    return None


def _unwrap_callee(node: Node) -> Node:
    while node is not None and node.type in ("parenthesized_expression", "index_expression", "generic_type"):
        inner = node.child_by_field_name("operand") or node.child_by_field_name("type")
        if inner is None:
            inner = node.named_children[0] if node.named_children else None
        node = inner
    return node


def find_async_launches(file_text: str, fn: SubjectFunction) -> List[AsyncLaunchSite]:
    """
    List the goroutine launches in fn's own body.

    Launches inside nested function literals belong to those literals. The
    callee of a method launch is its final selector segment; a launched
    function literal is named by its synthesized anonymous name.
    """
    source = file_text.encode("utf-8")
    tree = parse_bytes(source)
    fn_node = find_node_at(tree.root_node, fn.body_span[0], FUNCTION_NODE_TYPES)
    if fn_node is None or fn_node.child_by_field_name("body") is None:
        return []

    literal_names = {
        node.start_byte: name
        for node, name, kind in iter_functions(tree.root_node, source, fn.file)
        if kind == FunctionKind.ANONYMOUS
    }

    sites = []
    stack = list(reversed(fn_node.child_by_field_name("body").children))
    while stack:
        node = stack.pop()
        if node.type == "func_literal":
            continue
        if node.type == "go_statement":
            site = _launch_site(source, node, fn, literal_names)
            if site is not None:
                sites.append(site)
        stack.extend(reversed(node.children))
    return sites


def _launch_site(source: bytes, go_stmt: Node, fn: SubjectFunction, literal_names: Dict[int, str]) -> Optional[AsyncLaunchSite]:
    call = next((c for c in go_stmt.named_children if c.type == "call_expression"), None)
    if call is None:
        return None
    target = _unwrap_callee(call.child_by_field_name("function"))
    if target is None:
        return None
    if target.type == "selector_expression":
        callee = node_text(source, target.child_by_field_name("field"))
    elif target.type == "func_literal":
        callee = literal_names.get(target.start_byte, "")
    elif target.type == "identifier":
        callee = node_text(source, target)
    else:
        logger.debug(f"[AST] unsupported go target {target.type} in {fn.name}")
        return None
    if not callee:
        return None
    return AsyncLaunchSite(
        enclosing=fn.node_id,
        callee_name=callee,
        file=fn.file,
        line=go_stmt.start_point[0] + 1,
    )


def is_statement(node: Node) -> bool:
    return node.type.endswith("_statement") or node.type in (
        "short_var_declaration", "var_declaration", "const_declaration",
    )


def statement_at_line(file_text: str, line: int, path: str = "<memory>") -> str:
    """
    Return the smallest complete statement whose span covers the 1-based line.

    Raises:
        NoStatementAtLine: the line is blank, a comment, or outside any statement.
    """
    lines = file_text.splitlines()
    if line < 1 or line > len(lines):
        raise NoStatementAtLine(path, line)
    stripped = lines[line - 1].strip()
    if not stripped or stripped.startswith("//") or stripped.startswith("/*"):
        raise NoStatementAtLine(path, line)

    source = file_text.encode("utf-8")
    best = _smallest_covering(parse_bytes(source).root_node, line - 1, is_statement)
    if best is None:
        raise NoStatementAtLine(path, line)
    return node_text(source, best)


def _smallest_covering(root: Node, row: int, accept) -> Optional[Node]:
    best = None
    for node in walk(root):
        if node.start_point[0] > row:
            break
        if node.end_point[0] < row or not accept(node):
            continue
        if best is None or (node.end_byte - node.start_byte) < (best.end_byte - best.start_byte):
            best = node
    return best


def declaration_lines(file_text: str, line: int) -> Optional[tuple]:
    """
    1-based (first, last) lines of the smallest declaration or import spec
    covering the line, or None when the line is inside some other statement.
    """
    def accept(node: Node) -> bool:
        return is_statement(node) or node.type in ("import_spec", "var_spec", "const_spec")

    best = _smallest_covering(parse_bytes(file_text.encode("utf-8")).root_node, line - 1, accept)
    if best is None or best.type not in DECLARATION_STATEMENT_TYPES:
        return None
    # `if x := f(); ...` headers cannot be commented out on their own.
    if best.type == "short_var_declaration" and best.parent.type not in ("statement_list", "block"):
        return None
    return best.start_point[0] + 1, best.end_point[0] + 1


def go_string_value(text: str) -> str:
    """
    Value of a Go string literal as written in source.

    Interpreted strings decode every Go escape; \\x and octal escapes are
    bytes, so the value is rebuilt as UTF-8 and invalid sequences become
    U+FFFD. Raw strings drop carriage returns, as the compiler does.
    """
    if len(text) >= 2 and text[0] == "`" and text[-1] == "`":
        return text[1:-1].replace("\r", "")
    if not (len(text) >= 2 and text[0] == '"' and text[-1] == '"'):
        return text
    inner = text[1:-1]
    out = bytearray()
    pos = 0
    for match in GO_ESCAPE_RE.finditer(inner):
        out += inner[pos:match.start()].encode("utf-8")
        escape = match.group(0)[1:]
        kind = escape[0]
        if kind in SIMPLE_ESCAPES:
            out += SIMPLE_ESCAPES[kind].encode("utf-8")
        elif kind == "x":
            out.append(int(escape[1:], 16))
        elif kind in "uU":
            code = int(escape[1:], 16)
            valid = code <= 0x10FFFF and not 0xD800 <= code <= 0xDFFF
            out += (chr(code) if valid else "\ufffd").encode("utf-8")
        else:
            out.append(int(escape, 8) & 0xFF)
        pos = match.end()
    out += inner[pos:].encode("utf-8")
    return out.decode("utf-8", errors="replace")


def parse_function_snippet(func_text: str, path: str = "<snippet>") -> tuple:
    """
    Parse a standalone function declaration.

    Returns (tree, source, offset) where offset is the length of the synthetic
    prefix to subtract from node byte positions.
    """
    source = SNIPPET_PREFIX + func_text.encode("utf-8")
    tree = parse_bytes(source)
    ensure_valid(tree, path)
    return tree, source, len(SNIPPET_PREFIX)


def top_level_functions(tree: Tree) -> List[Node]:
    return [n for n in tree.root_node.named_children if n.type in DECLARATION_NODE_TYPES]
