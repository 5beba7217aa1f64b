"""Fixed-width bitvector expressions.

Expressions are hash-consed: building the same node twice returns the same
object, so identity is structural equality and shared subterms stay shared
after substitution.  All arithmetic is unsigned and wraps at the node width.

Variable references come in two flavours.  ``input`` nodes denote the value an
input variable had on entry to the program; ``local`` nodes denote the current
value of a program variable and must be eliminated (see
:func:`close_over_inputs`) before an expression can be bit-blasted.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np

from .errors import EvaluationError, StructureError

MAX_WIDTH = 64

UNARY_OPS = frozenset({"~", "not"})
BITWISE_OPS = frozenset({"&", "|", "^"})
ARITH_OPS = frozenset({"+", "-", "*", "%"})
SHIFT_OPS = frozenset({"<<", ">>"})
COMPARE_OPS = frozenset({"==", "!=", "<"})
BOOL_OPS = frozenset({"and", "or"})
BINARY_OPS = BITWISE_OPS | ARITH_OPS | SHIFT_OPS | COMPARE_OPS | BOOL_OPS
LEAF_OPS = frozenset({"input", "local", "const"})


class Bit(NamedTuple):
    """One bit of an input variable (index 0 is the least significant bit)."""

    var: str
    index: int

    def __str__(self) -> str:
        return f"{self.var}[{self.index}]"


class BVExpr:
    """Interned bitvector expression node.  Build nodes with the module helpers."""

    __slots__ = ("op", "args", "width", "name", "value", "_hash", "__weakref__")

    op: str
    args: tuple["BVExpr", ...]
    width: int
    name: str | None
    value: int | None

    def __setattr__(self, key, val):
        raise AttributeError("BVExpr is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"BVExpr({to_str(self)!r}, width={self.width})"

    def __str__(self) -> str:
        return to_str(self)

    def __reduce__(self):
        # interning must survive pickling (process pools)
        return (_make, (self.op, self.width, self.name, self.value, self.args))

    @property
    def is_const(self) -> bool:
        return self.op == "const"


_table: "weakref.WeakValueDictionary[tuple, BVExpr]" = weakref.WeakValueDictionary()
_table_lock = threading.Lock()


def _make(op: str, width: int, name: str | None, value: int | None, args: tuple) -> BVExpr:
    key = (op, width, name, value, args)
    with _table_lock:
        node = _table.get(key)
        if node is None:
            node = object.__new__(BVExpr)
            set_ = object.__setattr__
            set_(node, "op", op)
            set_(node, "args", args)
            set_(node, "width", width)
            set_(node, "name", name)
            set_(node, "value", value)
            set_(node, "_hash", hash(key))
            _table[key] = node
    return node


def _check_width(width: int) -> None:
    if not 1 <= width <= MAX_WIDTH:
        raise StructureError(f"width {width} outside 1..{MAX_WIDTH}")


def const(value: int, width: int) -> BVExpr:
    _check_width(width)
    return _make("const", width, None, value & ((1 << width) - 1), ())


def inp(name: str, width: int) -> BVExpr:
    _check_width(width)
    return _make("input", width, name, None, ())


def local(name: str, width: int) -> BVExpr:
    _check_width(width)
    return _make("local", width, name, None, ())


TRUE = const(1, 1)
FALSE = const(0, 1)


def unop(op: str, a: BVExpr) -> BVExpr:
    if op == "not":
        if a.width != 1:
            raise StructureError("'not' needs a width-1 operand")
    elif op != "~":
        raise StructureError(f"unknown unary operator {op!r}")
    if a.is_const:
        return const(_apply_scalar(op, a.width, (a.value,)), a.width)
    return _make(op, a.width, None, None, (a,))


def binop(op: str, a: BVExpr, b: BVExpr) -> BVExpr:
    if op not in BINARY_OPS:
        raise StructureError(f"unknown binary operator {op!r}")
    if a.width != b.width:
        raise StructureError(f"operand widths differ for {op!r}: {a.width} vs {b.width}")
    if op in BOOL_OPS and a.width != 1:
        raise StructureError(f"{op!r} needs width-1 operands")
    width = 1 if op in COMPARE_OPS else a.width
    if a.is_const and b.is_const:
        return const(_apply_scalar(op, a.width, (a.value, b.value)), width)
    return _make(op, width, None, None, (a, b))


def mk(op: str, *args: BVExpr) -> BVExpr:
    """Rebuild a non-leaf node from an operator and children."""
    if len(args) == 1:
        return unop(op, args[0])
    return binop(op, *args)


def to_bool(e: BVExpr) -> BVExpr:
    """Width-1 truth value of ``e`` (nonzero is true)."""
    return e if e.width == 1 else binop("!=", e, const(0, e.width))


# ---------------------------------------------------------------- traversal


def postorder(root: BVExpr) -> list[BVExpr]:
    """Distinct nodes reachable from ``root``, children before parents."""
    out: list[BVExpr] = []
    seen: set[int] = set()
    stack: list[tuple[BVExpr, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in reversed(node.args):
            if id(child) not in seen:
                stack.append((child, False))
    return out


def free_inputs(e: BVExpr) -> dict[str, int]:
    """Input variables referenced by ``e`` mapped to their widths."""
    return {n.name: n.width for n in postorder(e) if n.op == "input"}


def free_locals(e: BVExpr) -> dict[str, int]:
    return {n.name: n.width for n in postorder(e) if n.op == "local"}


def size(e: BVExpr) -> int:
    return len(postorder(e))


_PRINT_PREC = {
    "or": 1, "and": 2, "not": 3,
    "==": 4, "!=": 4, "<": 4,
    "|": 5, "^": 6, "&": 7, "<<": 8, ">>": 8,
    "+": 9, "-": 9, "*": 10, "%": 10, "~": 11,
}


def to_str(e: BVExpr) -> str:
    """Render in the concrete syntax accepted by the program parser."""
    text: dict[int, tuple[str, int]] = {}
    for node in postorder(e):
        if node.op == "const":
            text[id(node)] = (str(node.value), 99)
        elif node.op == "input":
            text[id(node)] = (f"{node.name}@in", 99)
        elif node.op == "local":
            text[id(node)] = (node.name, 99)
        elif len(node.args) == 1:
            s, p = text[id(node.args[0])]
            prec = _PRINT_PREC[node.op]
            s = f"({s})" if p < prec else s
            text[id(node)] = (f"not {s}" if node.op == "not" else f"~{s}", prec)
        else:
            prec = _PRINT_PREC[node.op]
            (ls, lp), (rs, rp) = text[id(node.args[0])], text[id(node.args[1])]
            ls = f"({ls})" if lp < prec else ls
            rs = f"({rs})" if rp <= prec else rs
            text[id(node)] = (f"{ls} {node.op} {rs}", prec)
    return text[id(e)][0]


# ---------------------------------------------------------------- semantics


def _apply_scalar(op: str, width: int, vals: tuple[int, ...]) -> int:
    mask = (1 << width) - 1
    if op == "~":
        return ~vals[0] & mask
    if op == "not":
        return 1 - vals[0]
    a, b = vals
    if op == "&" or op == "and":
        return a & b
    if op == "|" or op == "or":
        return a | b
    if op == "^":
        return a ^ b
    if op == "+":
        return (a + b) & mask
    if op == "-":
        return (a - b) & mask
    if op == "*":
        return (a * b) & mask
    if op == "%":
        return a if b == 0 else a % b
    if op == "<<":
        return 0 if b >= width else (a << b) & mask
    if op == ">>":
        return 0 if b >= width else a >> b
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    raise EvaluationError(f"unknown operator {op!r}")


def evaluate(
    e: BVExpr,
    inputs: Mapping[str, int],
    locals_: Mapping[str, int] | None = None,
) -> int:
    """Concrete value of ``e``.

    ``inputs`` maps input variable names to their entry values and
    ``locals_`` maps program variable names to current values.
    """
    locals_ = locals_ or {}
    vals: dict[int, int] = {}
    for node in postorder(e):
        op = node.op
        if op == "const":
            v = node.value
        elif op == "input":
            if node.name not in inputs:
                raise EvaluationError(f"unbound input variable {node.name!r}")
            v = inputs[node.name] & ((1 << node.width) - 1)
        elif op == "local":
            if node.name not in locals_:
                raise EvaluationError(f"unbound variable {node.name!r}")
            v = locals_[node.name] & ((1 << node.width) - 1)
        else:
            operand_width = node.args[0].width
            v = _apply_scalar(op, operand_width, tuple(vals[id(c)] for c in node.args))
        vals[id(node)] = v
    return vals[id(e)]


_U64 = np.uint64


def _vec_mask(width: int) -> np.uint64:
    return _U64((1 << width) - 1)


def _apply_vec(op: str, width: int, vals):
    mask = _vec_mask(width)
    if op == "~":
        return ~vals[0] & mask
    if op == "not":
        return _U64(1) - vals[0]
    a, b = vals
    if op in ("&", "and"):
        return a & b
    if op in ("|", "or"):
        return a | b
    if op == "^":
        return a ^ b
    if op == "+":
        return (a + b) & mask
    if op == "-":
        return (a - b) & mask
    if op == "*":
        return (a * b) & mask
    if op == "%":
        zero = b == 0
        return np.where(zero, a, a % np.where(zero, _U64(1), b)).astype(_U64)
    if op in ("<<", ">>"):
        big = b >= _U64(width)
        amount = np.minimum(b, _U64(63))
        shifted = (a << amount) & mask if op == "<<" else a >> amount
        return np.where(big, _U64(0), shifted).astype(_U64)
    if op == "==":
        return (a == b).astype(_U64)
    if op == "!=":
        return (a != b).astype(_U64)
    if op == "<":
        return (a < b).astype(_U64)
    raise EvaluationError(f"unknown operator {op!r}")


def evaluate_vec(
    e: BVExpr,
    inputs: Mapping[str, np.ndarray],
    locals_: Mapping[str, np.ndarray] | None = None,
    n: int | None = None,
) -> np.ndarray:
    """Evaluate ``e`` elementwise over arrays of uint64 values.

    Returns a uint64 array; ``n`` fixes the length when ``e`` has no variables.
    """
    locals_ = locals_ or {}
    vals: dict[int, object] = {}
    with np.errstate(over="ignore"):
        for node in postorder(e):
            op = node.op
            if op == "const":
                v = _U64(node.value)
            elif op == "input":
                if node.name not in inputs:
                    raise EvaluationError(f"unbound input variable {node.name!r}")
                v = np.asarray(inputs[node.name], dtype=_U64) & _vec_mask(node.width)
            elif op == "local":
                if node.name not in locals_:
                    raise EvaluationError(f"unbound variable {node.name!r}")
                v = np.asarray(locals_[node.name], dtype=_U64) & _vec_mask(node.width)
            else:
                v = _apply_vec(op, node.args[0].width, [vals[id(c)] for c in node.args])
            vals[id(node)] = v
    out = np.asarray(vals[id(e)], dtype=_U64)
    if out.ndim == 0:
        if n is None:
            lengths = [len(a) for a in (*inputs.values(), *locals_.values()) if np.ndim(a)]
            n = lengths[0] if lengths else 1
        out = np.full(n, out, dtype=_U64)
    return out


# ---------------------------------------------------------------- substitution


def substitute(e: BVExpr, mapping: Mapping[BVExpr, BVExpr]) -> BVExpr:
    """Replace leaf nodes according to ``mapping`` (keys compared by identity)."""
    if not mapping:
        return e
    done: dict[int, BVExpr] = {}
    for node in postorder(e):
        if node in mapping:
            done[id(node)] = mapping[node]
        elif node.args:
            new_args = tuple(done[id(c)] for c in node.args)
            if all(a is b for a, b in zip(new_args, node.args)):
                done[id(node)] = node
            else:
                done[id(node)] = mk(node.op, *new_args)
        else:
            done[id(node)] = node
    return done[id(e)]


def resolve_locals(e: BVExpr, bindings: Mapping[str, BVExpr]) -> BVExpr:
    """Eliminate local references by following ``bindings`` transitively."""
    resolved: dict[str, BVExpr] = {}
    active: list[str] = []

    def resolve(name: str, width: int) -> BVExpr:
        if name in resolved:
            return resolved[name]
        if name in active:
            cycle = " -> ".join([*active[active.index(name):], name])
            raise StructureError(f"cyclic binding: {cycle}")
        if name not in bindings:
            raise StructureError(f"no binding for local variable {name!r}")
        target = bindings[name]
        if target.width != width:
            raise StructureError(
                f"binding for {name!r} has width {target.width}, expected {width}"
            )
        active.append(name)
        out = _close(target)
        active.pop()
        resolved[name] = out
        return out

    def _close(expr: BVExpr) -> BVExpr:
        leaves = {n: resolve(n.name, n.width) for n in postorder(expr) if n.op == "local"}
        return substitute(expr, leaves)

    return _close(e)


def close_over_inputs(e: BVExpr, bindings: Mapping[str, BVExpr] | None = None) -> "BoolFunc":
    """Close the width-1 expression ``e`` over input bits."""
    if e.width != 1:
        raise StructureError(f"condition must have width 1, got {e.width}")
    return BoolFunc(resolve_locals(e, bindings or {}))


# ---------------------------------------------------------------- boolean functions


def input_bits(inputs: Iterable[tuple[str, int]]) -> tuple[Bit, ...]:
    """Bits of the given (name, width) declarations, in order, LSB first."""
    return tuple(Bit(name, i) for name, width in inputs for i in range(width))


@dataclass(frozen=True)
class BoolFunc:
    """A width-1 expression over input variables, possibly with some bits fixed.

    ``fixed`` holds cofactored bits as sorted ``(Bit, value)`` pairs; they are no
    longer free variables of the function.
    """

    expr: BVExpr
    fixed: tuple[tuple[Bit, int], ...] = field(default=())

    def __post_init__(self):
        if self.expr.width != 1:
            raise StructureError(f"BoolFunc needs a width-1 expression, got {self.expr.width}")
        stray = free_locals(self.expr)
        if stray:
            raise StructureError(f"BoolFunc has free local variables: {sorted(stray)}")

    @cached_property
    def inputs(self) -> dict[str, int]:
        return free_inputs(self.expr)

    @cached_property
    def variable_bits(self) -> frozenset[Bit]:
        """All bits of the input variables the expression mentions, minus fixed ones."""
        fixed = {b for b, _ in self.fixed}
        return frozenset(b for b in input_bits(sorted(self.inputs.items())) if b not in fixed)

    @cached_property
    def bits(self) -> frozenset[Bit]:
        """Input bits in the cone of influence of the bit-blasted circuit.

        A syntactic over-approximation of the semantic support: every bit the
        function depends on is here, but not every bit here need matter.
        """
        from .circuit import compile_func

        aig, lit = compile_func(self)
        return frozenset(aig.cone_bits(lit))

    @property
    def constant(self) -> bool | None:
        """True/False when the circuit folds to a constant, else None."""
        from .circuit import compile_func

        _, lit = compile_func(self)
        return {0: False, 1: True}.get(lit)

    def values_for(self, assignment: Mapping[Bit, int]) -> dict[str, int]:
        values = dict.fromkeys(self.inputs, 0)
        seen = set()
        for bit, val in (*assignment.items(), *self.fixed):
            if bit.var in values and bit.index < self.inputs[bit.var]:
                seen.add(bit)
                if val:
                    values[bit.var] |= 1 << bit.index
        missing = self.variable_bits - seen
        if missing:
            raise EvaluationError(f"unassigned input bits: {sorted(map(str, missing))}")
        return values

    def __call__(self, assignment: Mapping[Bit, int]) -> bool:
        return bool(evaluate(self.expr, self.values_for(assignment)))

    def truth_table(self, order: Iterable[Bit]) -> np.ndarray:
        """Vectorised evaluation over all assignments to ``order`` (bit j of row index = order[j]).

        Bits of the function not in ``order`` and not fixed are taken as 0.
        """
        order = list(order)
        k = len(order)
        idx = np.arange(1 << k, dtype=np.uint64)
        values = {name: np.zeros(1 << k, dtype=np.uint64) for name in self.inputs}
        for j, bit in enumerate(order):
            if bit.var in values and bit.index < self.inputs[bit.var]:
                values[bit.var] |= ((idx >> np.uint64(j)) & np.uint64(1)) << np.uint64(bit.index)
        for bit, val in self.fixed:
            if val:
                values[bit.var] |= np.uint64(1 << bit.index)
        return evaluate_vec(self.expr, values, n=1 << k).astype(bool)

    def __str__(self) -> str:
        s = to_str(self.expr)
        if self.fixed:
            s += " | " + ", ".join(f"{b}={v}" for b, v in self.fixed)
        return s


def cofactor(f: BoolFunc, bit: Bit, value: int) -> BoolFunc:
    """``f`` with ``bit`` fixed to ``value``; returns ``f`` itself if the bit is not free in it."""
    if bit not in f.variable_bits:
        return f
    fixed = tuple(sorted((*f.fixed, (bit, 1 if value else 0))))
    return BoolFunc(f.expr, fixed)


def negate(f: BoolFunc) -> BoolFunc:
    return BoolFunc(unop("not", f.expr), f.fixed)


def conjoin(funcs: Iterable[BoolFunc]) -> BoolFunc:
    """Conjunction of several functions.  Fixed bits are inlined as constants."""
    acc = TRUE
    for f in funcs:
        acc = binop("and", acc, bake(f).expr) if acc is not TRUE else bake(f).expr
    return BoolFunc(acc)


def bake(f: BoolFunc) -> BoolFunc:
    """Equivalent function with fixed bits substituted into the expression."""
    if not f.fixed:
        return f
    widths = f.inputs
    by_var: dict[str, list[tuple[int, int]]] = {}
    for bit, val in f.fixed:
        by_var.setdefault(bit.var, []).append((bit.index, val))
    mapping = {}
    for name, pairs in by_var.items():
        w = widths[name]
        clear = sum(1 << i for i, _ in pairs)
        setv = sum(1 << i for i, v in pairs if v)
        leaf = inp(name, w)
        mapping[leaf] = binop("|", binop("&", leaf, const(~clear, w)), const(setv, w))
    return BoolFunc(substitute(f.expr, mapping))


def iter_assignments(bits: Iterable[Bit]) -> Iterator[dict[Bit, int]]:
    """All assignments to ``bits``; row r sets bit j to (r >> j) & 1."""
    bits = list(bits)
    for r in range(1 << len(bits)):
        yield {b: (r >> j) & 1 for j, b in enumerate(bits)}


def bit_blast(f: BoolFunc):
    """Definitional CNF for ``f``; see :class:`qpa.circuit.CnfFormula`."""
    from .circuit import compile_func

    aig, lit = compile_func(f)
    return aig.to_cnf(lit)
