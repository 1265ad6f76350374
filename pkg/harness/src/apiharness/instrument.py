"""Semantics-preserving AST instrumentation of test programs.

Rewrites a program so that runtime values are logged on a dedicated trace
channel (sentinel-prefixed stderr lines), never on stdout, where they would
pollute the exact bug-marker check. Logged sites:

* the first assignment of each variable, across ordinary, attribute, index,
  and unpacking forms (reassignments are untraced);
* exception aliases at handler entry (``except E as e``);
* context-manager aliases at block entry (``with ... as w``);
* every independently evaluable sub-expression of an ``if`` condition, plus
  the complete condition;
* each step of a multi-level call chain: ``a.b().c[0].d()`` logs ``a.b()``,
  ``a.b().c``, ``a.b().c[0]``, and ``a.b().c[0].d()``.

Hoisted sub-expressions and chain steps are cached into temporaries, so
every expression is evaluated exactly once. Conditions containing
short-circuit operators (or walrus, lambda, comprehension, await/yield
constructs) are evaluated whole into a single traced temporary rather than
decomposed, preserving evaluation order and short-circuiting. ``while``
conditions are never decomposed: hoisting would freeze a condition that
must be re-evaluated per iteration.
"""

from __future__ import annotations

import ast

TRACE_SENTINEL = "@@APIH@@"
DEFAULT_VALUE_CAP = 4096

_TEMP_PREFIX = "_apih_t"

_PRELUDE_TEMPLATE = '''\
import json as _apih_json
import sys as _apih_sys

_APIH_CAP = {cap}


def _apih_trace(kind, expr, value):
    try:
        rep = repr(value)
    except Exception:
        rep = "<unrepresentable>"
    raw = rep.encode("utf-8", "replace")
    if len(raw) > _APIH_CAP:
        rep = raw[:_APIH_CAP].decode("utf-8", "replace") + "...<truncated>"
    _apih_sys.stderr.write(
        "{sentinel}"
        + _apih_json.dumps(
            {{"site_kind": kind, "expression_text": expr, "value_repr": rep}}
        )
        + "\\n"
    )
    _apih_sys.stderr.flush()
    return value
'''


class InstrumentError(Exception):
    """The program cannot be instrumented (reported, never a crash)."""


# Condition shapes that are unsafe to decompose; the whole condition is
# hoisted into one traced temporary instead.
_OPAQUE_CONDITION_NODES = (
    ast.BoolOp,
    ast.IfExp,
    ast.NamedExpr,
    ast.Lambda,
    ast.Await,
    ast.Yield,
    ast.YieldFrom,
    ast.ListComp,
    ast.SetComp,
    ast.DictComp,
    ast.GeneratorExp,
)


def _trace_call(kind: str, expr_text: str, value: ast.expr) -> ast.expr:
    return ast.Call(
        func=ast.Name(id="_apih_trace", ctx=ast.Load()),
        args=[ast.Constant(kind), ast.Constant(expr_text), value],
        keywords=[],
    )


def _trace_stmt(kind: str, expr_text: str, value: ast.expr) -> ast.stmt:
    return ast.Expr(value=_trace_call(kind, expr_text, value))


def _load_copy(target: ast.expr) -> ast.expr:
    """Re-parse a store target as a load expression."""
    return ast.parse(ast.unparse(target), mode="eval").body


class _Rewriter:
    def __init__(self) -> None:
        self.seen_targets: set[str] = set()
        self.counter = 0

    def new_temp(self) -> str:
        name = f"{_TEMP_PREFIX}{self.counter}"
        self.counter += 1
        return name

    # -- statements -----------------------------------------------------------

    def process_body(self, stmts: list[ast.stmt]) -> list[ast.stmt]:
        out: list[ast.stmt] = []
        for stmt in stmts:
            out.extend(self.process_stmt(stmt))
        return out or [ast.Pass()]

    def process_stmt(self, stmt: ast.stmt) -> list[ast.stmt]:
        if isinstance(stmt, ast.Assign):
            pre: list[ast.stmt] = []
            stmt.value = self.expand_chain(stmt.value, pre)
            return pre + [stmt] + self.assignment_traces(stmt.targets)
        if isinstance(stmt, ast.AnnAssign) and stmt.value is not None:
            pre = []
            stmt.value = self.expand_chain(stmt.value, pre)
            return pre + [stmt] + self.assignment_traces([stmt.target])
        if isinstance(stmt, ast.Expr):
            pre = []
            new_value = self.expand_chain(stmt.value, pre)
            if pre:
                # The chain was fully evaluated by the hoisted steps; a bare
                # name expression statement would be dead code.
                if isinstance(new_value, ast.Name):
                    return pre
                stmt.value = new_value
                return pre + [stmt]
            return [stmt]
        if isinstance(stmt, ast.If):
            pre = []
            stmt.test = self.instrument_condition(stmt.test, pre)
            stmt.body = self.process_body(stmt.body)
            stmt.orelse = self.process_body(stmt.orelse) if stmt.orelse else []
            return pre + [stmt]
        if isinstance(stmt, ast.Try):
            stmt.body = self.process_body(stmt.body)
            for handler in stmt.handlers:
                body = self.process_body(handler.body)
                if handler.name:
                    body = [
                        _trace_stmt(
                            "exception", handler.name, ast.Name(handler.name, ast.Load())
                        )
                    ] + body
                handler.body = body
            stmt.orelse = self.process_body(stmt.orelse) if stmt.orelse else []
            stmt.finalbody = self.process_body(stmt.finalbody) if stmt.finalbody else []
            return [stmt]
        if isinstance(stmt, (ast.With, ast.AsyncWith)):
            traces: list[ast.stmt] = []
            for item in stmt.items:
                if item.optional_vars is not None:
                    for name_node in self._flatten_names(item.optional_vars):
                        traces.append(
                            _trace_stmt(
                                "context_manager",
                                name_node.id,
                                ast.Name(name_node.id, ast.Load()),
                            )
                        )
            stmt.body = traces + self.process_body(stmt.body)
            return [stmt]
        if isinstance(stmt, (ast.For, ast.AsyncFor, ast.While)):
            stmt.body = self.process_body(stmt.body)
            stmt.orelse = self.process_body(stmt.orelse) if stmt.orelse else []
            return [stmt]
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            stmt.body = self.process_body(stmt.body)
            return [stmt]
        return [stmt]

    @staticmethod
    def _flatten_names(node: ast.expr) -> list[ast.Name]:
        if isinstance(node, ast.Name):
            return [node]
        if isinstance(node, (ast.Tuple, ast.List)):
            names: list[ast.Name] = []
            for element in node.elts:
                names.extend(_Rewriter._flatten_names(element))
            return names
        if isinstance(node, ast.Starred):
            return _Rewriter._flatten_names(node.value)
        return []

    # -- assignment tracing ----------------------------------------------------

    def assignment_traces(self, targets: list[ast.expr]) -> list[ast.stmt]:
        out: list[ast.stmt] = []
        for target in targets:
            out.extend(self._trace_target(target, unpacking=False))
        return out

    def _trace_target(self, target: ast.expr, unpacking: bool) -> list[ast.stmt]:
        if isinstance(target, (ast.Tuple, ast.List)):
            out: list[ast.stmt] = []
            for element in target.elts:
                out.extend(self._trace_target(element, unpacking=True))
            return out
        if isinstance(target, ast.Starred):
            return self._trace_target(target.value, unpacking=unpacking)
        if isinstance(target, ast.Name):
            kind = "unpacking" if unpacking else "assignment"
            key = target.id
        elif isinstance(target, ast.Attribute):
            kind = "attribute_assignment"
            key = ast.unparse(target)
        elif isinstance(target, ast.Subscript):
            kind = "index_assignment"
            key = ast.unparse(target)
        else:
            return []
        if key in self.seen_targets:
            return []
        self.seen_targets.add(key)
        return [_trace_stmt(kind, key, _load_copy(target))]

    # -- call chains -----------------------------------------------------------

    def expand_chain(self, node: ast.expr, pre: list[ast.stmt]) -> ast.expr:
        """Hoist a multi-level call chain stepwise into traced temporaries;
        anything that is not a chain of at least two steps is left alone."""
        if self._chain_steps(node) < 2:
            return node
        new_node, _ = self._rebuild_chain(node, pre, func_pos=False)
        return new_node

    def _chain_steps(self, node: ast.expr) -> int:
        spine: list[ast.expr] = []
        cur = node
        while True:
            if isinstance(cur, ast.Call):
                spine.append(cur)
                cur = cur.func
            elif isinstance(cur, (ast.Attribute, ast.Subscript)):
                spine.append(cur)
                cur = cur.value
            elif isinstance(cur, ast.Name):
                break
            else:
                return 0  # unsupported chain base
        steps = 0
        passed_call = False
        outer_of: dict[int, ast.expr] = {}
        for outer, inner in zip(spine, spine[1:]):
            outer_of[id(inner)] = outer
        for cur in reversed(spine):  # base side first
            outer = outer_of.get(id(cur))
            in_func_pos = isinstance(outer, ast.Call) and outer.func is cur
            if isinstance(cur, ast.Call):
                passed_call = True
                steps += 1
            elif passed_call and not in_func_pos:
                steps += 1
        return steps

    def _rebuild_chain(
        self, node: ast.expr, pre: list[ast.stmt], func_pos: bool
    ) -> tuple[ast.expr, bool]:
        """Returns (replacement expression, spine-contains-call)."""
        text = ast.unparse(node)
        if isinstance(node, ast.Call):
            node.func, _ = self._rebuild_chain(node.func, pre, func_pos=True)
            return self._materialize("call_chain_step", text, node, pre), True
        if isinstance(node, ast.Attribute):
            node.value, has_call = self._rebuild_chain(node.value, pre, func_pos=False)
            if has_call and not func_pos:
                return self._materialize("call_chain_step", text, node, pre), True
            return node, has_call
        if isinstance(node, ast.Subscript):
            node.value, has_call = self._rebuild_chain(node.value, pre, func_pos=False)
            if has_call:
                return self._materialize("call_chain_step", text, node, pre), True
            return node, has_call
        return node, False

    def _materialize(
        self, kind: str, text: str, node: ast.expr, pre: list[ast.stmt]
    ) -> ast.expr:
        temp = self.new_temp()
        pre.append(ast.Assign(targets=[ast.Name(temp, ast.Store())], value=node))
        pre.append(_trace_stmt(kind, text, ast.Name(temp, ast.Load())))
        return ast.Name(temp, ast.Load())

    # -- conditions --------------------------------------------------------------

    def instrument_condition(self, test: ast.expr, pre: list[ast.stmt]) -> ast.expr:
        if isinstance(test, ast.Constant):
            return test
        opaque = any(
            isinstance(sub, _OPAQUE_CONDITION_NODES) for sub in ast.walk(test)
        )
        if opaque:
            return self._materialize("condition_subexpr", ast.unparse(test), test, pre)
        rewritten = self._hoist_condition(test, pre, func_pos=False)
        if isinstance(rewritten, ast.Name) and rewritten.id.startswith(_TEMP_PREFIX):
            return rewritten
        # The complete condition itself is always captured.
        return self._materialize("condition_subexpr", ast.unparse(test), rewritten, pre)

    def _hoist_condition(
        self, node: ast.expr, pre: list[ast.stmt], func_pos: bool
    ) -> ast.expr:
        text = ast.unparse(node)
        if isinstance(node, ast.Call):
            node.func = self._hoist_condition(node.func, pre, func_pos=True)
            node.args = [self._hoist_condition(a, pre, func_pos=False) for a in node.args]
            for keyword in node.keywords:
                keyword.value = self._hoist_condition(keyword.value, pre, func_pos=False)
            return self._materialize("condition_subexpr", text, node, pre)
        if isinstance(node, ast.Attribute):
            node.value = self._hoist_condition(node.value, pre, func_pos=False)
            if func_pos:
                return node
            return self._materialize("condition_subexpr", text, node, pre)
        if isinstance(node, ast.Subscript):
            node.value = self._hoist_condition(node.value, pre, func_pos=False)
            return self._materialize("condition_subexpr", text, node, pre)
        if isinstance(node, ast.Compare):
            node.left = self._hoist_condition(node.left, pre, func_pos=False)
            node.comparators = [
                self._hoist_condition(c, pre, func_pos=False) for c in node.comparators
            ]
            return self._materialize("condition_subexpr", text, node, pre)
        if isinstance(node, ast.BinOp):
            node.left = self._hoist_condition(node.left, pre, func_pos=False)
            node.right = self._hoist_condition(node.right, pre, func_pos=False)
            return self._materialize("condition_subexpr", text, node, pre)
        if isinstance(node, ast.UnaryOp):
            node.operand = self._hoist_condition(node.operand, pre, func_pos=False)
            return self._materialize("condition_subexpr", text, node, pre)
        return node  # Name, Constant, and anything already atomic


def _insertion_index(body: list[ast.stmt]) -> int:
    index = 0
    if (
        body
        and isinstance(body[0], ast.Expr)
        and isinstance(body[0].value, ast.Constant)
        and isinstance(body[0].value.value, str)
    ):
        index = 1
    while index < len(body) and (
        isinstance(body[index], ast.ImportFrom) and body[index].module == "__future__"
    ):
        index += 1
    return index


def instrument_program(source: str, value_cap: int = DEFAULT_VALUE_CAP) -> str:
    """Rewrite a program to emit trace lines; raises InstrumentError on
    programs that do not parse."""
    try:
        module = ast.parse(source)
    except SyntaxError as exc:
        raise InstrumentError(f"SyntaxError: {exc}") from exc
    rewriter = _Rewriter()
    body = rewriter.process_body(module.body)
    prelude = ast.parse(
        _PRELUDE_TEMPLATE.format(cap=value_cap, sentinel=TRACE_SENTINEL)
    ).body
    index = _insertion_index(body)
    module.body = body[:index] + prelude + body[index:]
    ast.fix_missing_locations(module)
    return ast.unparse(module) + "\n"
