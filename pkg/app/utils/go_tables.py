"""
Recognition of table-driven Go tests.

Two shapes are understood:

  slice/map   a composite literal of cases, ranged over by a loop that calls
              <t>.Run(<name>, ...) for each case
  inline      consecutive <t>.Run("name", func(...) {...}) statements

All spans are byte offsets into the function text handed in.
"""

import logging
import re
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel
from tree_sitter import Node

from app.errors import CaseNotFound, TableNotFound
from app.utils.go_ast import (
    block_statements,
    go_string_value,
    node_text,
    parse_function_snippet,
    top_level_functions,
    walk,
)

logger = logging.getLogger(__name__)

STRING_TYPES = ("interpreted_string_literal", "raw_string_literal")


class TableShape(str, Enum):
    SLICE = "slice"
    MAP = "map"
    INLINE = "inline"


class CaseEntry(BaseModel):
    name: str
    span: Tuple[int, int]
    removal_span: Tuple[int, int]


class CaseTable(BaseModel):
    shape: TableShape
    span: Tuple[int, int]
    entries: List[CaseEntry]

    @property
    def names(self) -> List[str]:
        return [e.name for e in self.entries]

    def entry(self, case: str) -> CaseEntry:
        return self.entries[match_case(self.names, case)]


def normalize_case(name: str) -> str:
    return re.sub(r"\s", "_", name)


def match_case(names: List[str], case: str) -> int:
    """
    Index of the entry named `case`: exact match, then runner-normalised
    match, then a unique substring match.

    Raises:
        CaseNotFound: no entry matches, or the match is ambiguous.
    """
    wanted = normalize_case(case)
    for matcher in (
        lambda n: n == case,
        lambda n: normalize_case(n) == wanted,
        lambda n: bool(wanted) and wanted in normalize_case(n),
    ):
        hits = [i for i, n in enumerate(names) if matcher(n)]
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise CaseNotFound(f"case {case!r} is ambiguous among {[names[i] for i in hits]}")
    raise CaseNotFound(f"case {case!r} not in table {names}")


def _removal_span(source: bytes, node: Node) -> Tuple[int, int]:
    """The element plus its comma; whole lines when the element sits on its own lines."""
    start, end = node.start_byte, node.end_byte
    following = node.next_sibling
    if following is not None and following.type == ",":
        end = following.end_byte
    while end < len(source) and source[end:end + 1] in (b" ", b"\t"):
        end += 1
    line_start = source.rfind(b"\n", 0, start) + 1
    if not source[line_start:start].strip():
        if source[end:end + 1] == b"\n":
            return line_start, end + 1
        if source[end:end + 2] == b"\r\n":
            return line_start, end + 2
    return start, end


def _is_run_call(node: Node, source: bytes) -> bool:
    if node.type != "call_expression":
        return False
    function = node.child_by_field_name("function")
    if function is None or function.type != "selector_expression":
        return False
    field = function.child_by_field_name("field")
    operand = function.child_by_field_name("operand")
    return field is not None and node_text(source, field) == "Run" and operand is not None and operand.type == "identifier"


def _run_call(node: Optional[Node], source: bytes) -> Optional[Node]:
    if node is None:
        return None
    return next((c for c in walk(node) if _is_run_call(c, source)), None)


def _first_argument(call: Node) -> Optional[Node]:
    args = call.child_by_field_name("arguments")
    named = [c for c in args.named_children if c.type != "comment"] if args is not None else []
    return named[0] if named else None


def _unwrap(node: Node) -> Node:
    while node.type == "literal_element" and node.named_children:
        node = node.named_children[0]
    return node


def _element_parts(element: Node) -> Tuple[Optional[Node], Node]:
    """(key, value) of a literal element; key is None for positional elements."""
    if element.type == "keyed_element":
        key = element.child_by_field_name("key") or element.named_children[0]
        value = element.child_by_field_name("value") or element.named_children[-1]
        return _unwrap(key), _unwrap(value)
    return None, _unwrap(element)


def _literal_body(node: Node) -> Optional[Node]:
    if node.type == "unary_expression":
        node = node.child_by_field_name("operand") or node
    if node.type == "composite_literal":
        return node.child_by_field_name("body")
    if node.type == "literal_value":
        return node
    return None


def _first_string(source: bytes, node: Node) -> Optional[str]:
    for candidate in walk(node):
        if candidate.type in STRING_TYPES:
            return go_string_value(node_text(source, candidate))
    return None


def _case_name(source: bytes, element: Node, shape: TableShape, field: Optional[str]) -> str:
    key, value = _element_parts(element)
    if shape == TableShape.MAP and key is not None:
        if key.type in STRING_TYPES:
            return go_string_value(node_text(source, key))
        return node_text(source, key)
    body = _literal_body(value)
    if body is not None and field:
        for child in body.named_children:
            if child.type != "keyed_element":
                continue
            child_key, child_value = _element_parts(child)
            if child_key is not None and node_text(source, child_key) == field and child_value.type in STRING_TYPES:
                return go_string_value(node_text(source, child_value))
    return _first_string(source, value) or ""


def _resolve_table(source: bytes, body: Node, expression: Node, before: int) -> Optional[Node]:
    """The composite literal ranged over: inline, or the last local declaration of the identifier."""
    if expression.type == "composite_literal":
        return expression
    if expression.type != "identifier":
        return None
    name = node_text(source, expression)
    found = None
    for node in walk(body):
        if node.start_byte >= before:
            break
        if node.type == "short_var_declaration":
            left, right = node.child_by_field_name("left"), node.child_by_field_name("right")
        elif node.type == "var_spec":
            left, right = node, node.child_by_field_name("value")
        else:
            continue
        if left is None or right is None:
            continue
        names = [node_text(source, c) for c in left.named_children if c.type == "identifier"]
        values = [c for c in right.named_children if c.type != "comment"]
        if name in names and len(values) == len(names):
            value = values[names.index(name)]
            if value.type == "composite_literal":
                found = value
    return found


def _range_table(source: bytes, fn: Node) -> Optional[CaseTable]:
    body = fn.child_by_field_name("body")
    if body is None:
        return None
    for loop in walk(body):
        if loop.type != "for_statement":
            continue
        clause = next((c for c in loop.named_children if c.type == "range_clause"), None)
        if clause is None:
            continue
        run = _run_call(loop.child_by_field_name("body"), source)
        right = clause.child_by_field_name("right")
        if run is None or right is None:
            continue
        literal = _resolve_table(source, body, right, loop.start_byte)
        if literal is None or literal.child_by_field_name("body") is None:
            continue
        type_node = literal.child_by_field_name("type")
        shape = TableShape.MAP if type_node is not None and type_node.type == "map_type" else TableShape.SLICE

        field = None
        name_arg = _first_argument(run)
        if name_arg is not None and name_arg.type == "selector_expression":
            field = node_text(source, name_arg.child_by_field_name("field"))

        values = literal.child_by_field_name("body")
        elements = [c for c in values.named_children if c.type != "comment"]
        entries = [
            CaseEntry(
                name=_case_name(source, element, shape, field),
                span=(element.start_byte, element.end_byte),
                removal_span=_removal_span(source, element),
            )
            for element in elements
        ]
        return CaseTable(shape=shape, span=(values.start_byte, values.end_byte), entries=entries)
    return None


def _inline_table(source: bytes, fn: Node, case: Optional[str]) -> Optional[CaseTable]:
    body = fn.child_by_field_name("body")
    if body is None:
        return None
    groups: List[List[Tuple[str, Node]]] = []
    current: List[Tuple[str, Node]] = []
    for statement in block_statements(body):
        call = statement.named_children[0] if statement.type == "expression_statement" and statement.named_children else None
        name_arg = _first_argument(call) if call is not None and _is_run_call(call, source) else None
        if name_arg is not None and name_arg.type in STRING_TYPES:
            current.append((go_string_value(node_text(source, name_arg)), statement))
            continue
        if current:
            groups.append(current)
            current = []
    if current:
        groups.append(current)
    if not groups:
        return None

    chosen = groups[0]
    if case:
        for group in groups:
            try:
                match_case([name for name, _ in group], case)
            except CaseNotFound:
                continue
            chosen = group
            break
    entries = [
        CaseEntry(name=name, span=(node.start_byte, node.end_byte), removal_span=_removal_span(source, node))
        for name, node in chosen
    ]
    return CaseTable(shape=TableShape.INLINE, span=(entries[0].span[0], entries[-1].span[1]), entries=entries)


def find_table(func_text: str, case: Optional[str] = None, path: str = "<snippet>") -> CaseTable:
    """
    Locate the case table of a test function given as standalone text.

    Raises:
        ParseError: the function text does not parse.
        TableNotFound: neither table shape is present.
    """
    tree, source, offset = parse_function_snippet(func_text, path)
    functions = top_level_functions(tree)
    if len(functions) != 1:
        raise TableNotFound(f"expected one function in {path}, found {len(functions)}")
    fn = functions[0]
    table = _range_table(source, fn) or _inline_table(source, fn, case)
    if table is None:
        raise TableNotFound(f"no case table in {path}")

    def shift(span: Tuple[int, int]) -> Tuple[int, int]:
        return span[0] - offset, span[1] - offset

    return CaseTable(
        shape=table.shape,
        span=shift(table.span),
        entries=[
            CaseEntry(name=e.name, span=shift(e.span), removal_span=shift(e.removal_span))
            for e in table.entries
        ],
    )
