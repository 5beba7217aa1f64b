"""Bit-level circuits (and-inverter graphs) and their CNF encoding.

Literals are ints: ``2 * node + negated``.  Node 0 is constant false, so
literal 0 is FALSE and literal 1 is TRUE.  Gates are structurally hashed and
constant-folded on construction, and node ids are topologically ordered.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .errors import StructureError
from .expr import BVExpr, Bit, BoolFunc, postorder

FALSE = 0
TRUE = 1


def neg(lit: int) -> int:
    return lit ^ 1


@dataclass(frozen=True)
class CnfFormula:
    """Clauses over variables ``1..num_vars`` (DIMACS literal convention).

    Input bits occupy the first variables; the rest are definitional gate
    variables.  ``gate_of_clause[i]`` is the gate variable whose definition
    clause ``i`` belongs to, or 0 for the asserted root.  Because every gate
    variable is functionally determined by the inputs, the number of total
    models equals the number of satisfying input assignments.
    """

    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    input_vars: tuple[tuple[Bit, int], ...] = ()
    gate_of_clause: tuple[int, ...] = ()

    @property
    def input_map(self) -> dict[Bit, int]:
        return dict(self.input_vars)

    @property
    def num_inputs(self) -> int:
        return len(self.input_vars)

    @property
    def aux_vars(self) -> range:
        return range(self.num_inputs + 1, self.num_vars + 1)


class Aig:
    """A growable and-inverter graph."""

    def __init__(self):
        self._f0: list[int] = [0]
        self._f1: list[int] = [0]
        self._bit_of: dict[int, Bit] = {}
        self._node_of: dict[Bit, int] = {}
        self._strash: dict[tuple[int, int], int] = {}
        self._restrict_memo: dict[tuple, dict[int, int]] = {}
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._f0)

    def is_input(self, node: int) -> bool:
        return node in self._bit_of

    def input(self, bit: Bit) -> int:
        with self._lock:
            node = self._node_of.get(bit)
            if node is None:
                node = len(self._f0)
                self._f0.append(-1)
                self._f1.append(-1)
                self._bit_of[node] = bit
                self._node_of[bit] = node
            return 2 * node

    def AND(self, a: int, b: int) -> int:
        if a == FALSE or b == FALSE or a == neg(b):
            return FALSE
        if a == TRUE or a == b:
            return b
        if b == TRUE:
            return a
        if a > b:
            a, b = b, a
        with self._lock:
            node = self._strash.get((a, b))
            if node is None:
                node = len(self._f0)
                self._f0.append(a)
                self._f1.append(b)
                self._strash[(a, b)] = node
            return 2 * node

    def OR(self, a: int, b: int) -> int:
        return neg(self.AND(neg(a), neg(b)))

    def XOR(self, a: int, b: int) -> int:
        if a == FALSE:
            return b
        if b == FALSE:
            return a
        if a == TRUE:
            return neg(b)
        if b == TRUE:
            return neg(a)
        return self.OR(self.AND(a, neg(b)), self.AND(neg(a), b))

    def MUX(self, s: int, t: int, e: int) -> int:
        if s == TRUE:
            return t
        if s == FALSE:
            return e
        if t == e:
            return t
        return self.OR(self.AND(s, t), self.AND(neg(s), e))

    # ------------------------------------------------------------ queries

    def cone(self, lits: Iterable[int]) -> list[int]:
        """Nodes (excluding constant 0) feeding ``lits``, ascending."""
        seen: set[int] = set()
        stack = [l >> 1 for l in lits]
        while stack:
            n = stack.pop()
            if n == 0 or n in seen:
                continue
            seen.add(n)
            if n not in self._bit_of:
                stack.append(self._f0[n] >> 1)
                stack.append(self._f1[n] >> 1)
        return sorted(seen)

    def cone_bits(self, *lits: int) -> list[Bit]:
        return sorted(self._bit_of[n] for n in self.cone(lits) if n in self._bit_of)

    def restrict(self, lit: int, assignment: Mapping[Bit, int]) -> int:
        """Cofactor: the literal obtained by fixing the given input bits."""
        if not assignment:
            return lit
        key = tuple(sorted(assignment.items()))
        with self._lock:
            memo = self._restrict_memo.setdefault(key, {})
            for node in self.cone([lit]):
                if node in memo:
                    continue
                if node in self._bit_of:
                    bit = self._bit_of[node]
                    memo[node] = (TRUE if assignment[bit] else FALSE) if bit in assignment else 2 * node
                else:
                    a, b = self._f0[node], self._f1[node]
                    memo[node] = self.AND(memo.get(a >> 1, 0) ^ (a & 1), memo.get(b >> 1, 0) ^ (b & 1))
            if lit >> 1 == 0:
                return lit
            return memo[lit >> 1] ^ (lit & 1)

    def truth_table(self, lit: int, order: Sequence[Bit], fixed: Mapping[Bit, int] | None = None) -> int:
        """Truth table of ``lit`` as a ``2**len(order)``-bit integer.

        Bit ``r`` of the result is the value under the assignment where
        ``order[j] = (r >> j) & 1``.  Every input in the cone must be in
        ``order`` or in ``fixed``.
        """
        k = len(order)
        full = (1 << (1 << k)) - 1
        if lit == FALSE:
            return 0
        if lit == TRUE:
            return full
        pos = {b: j for j, b in enumerate(order)}
        fixed = fixed or {}
        nodes = self.cone([lit])
        # free intermediate tables once their last reader is done
        last_use: dict[int, int] = {}
        for node in nodes:
            if node not in self._bit_of:
                last_use[self._f0[node] >> 1] = node
                last_use[self._f1[node] >> 1] = node
        vals: dict[int, int] = {0: 0}
        for node in nodes:
            if node in self._bit_of:
                bit = self._bit_of[node]
                if bit in pos:
                    vals[node] = _projection(pos[bit], k)
                elif bit in fixed:
                    vals[node] = full if fixed[bit] else 0
                else:
                    raise StructureError(f"input {bit} not among the enumerated variables")
                continue
            a, b = self._f0[node], self._f1[node]
            va = vals[a >> 1] ^ (full if a & 1 else 0)
            vb = vals[b >> 1] ^ (full if b & 1 else 0)
            vals[node] = va & vb
            for child in (a >> 1, b >> 1):
                if child and last_use.get(child) == node:
                    del vals[child]
        out = vals[lit >> 1]
        return out ^ full if lit & 1 else out

    def count_models(
        self, lit: int, order: Sequence[Bit], chunk_bits: int = 16, stop_at_first: bool = False
    ) -> int:
        """Number of assignments to ``order`` satisfying ``lit`` by bit-parallel enumeration.

        The variables past ``chunk_bits`` are enumerated one chunk at a time so
        memory stays at ``2**chunk_bits`` bits per live gate.
        """
        order = list(order)
        low, high = order[:chunk_bits], order[chunk_bits:]
        total = 0
        for r in range(1 << len(high)):
            fixed = {b: (r >> j) & 1 for j, b in enumerate(high)}
            total += self.truth_table(lit, low, fixed).bit_count()
            if stop_at_first and total:
                break
        return total

    def to_cnf(self, lit: int, order: Sequence[Bit] | None = None) -> CnfFormula:
        """Tseitin encoding of ``lit`` asserted true.

        Input variables are numbered first (in ``order`` if given, else sorted),
        then gates in topological order.
        """
        if lit == TRUE:
            return CnfFormula(0, ())
        if lit == FALSE:
            return CnfFormula(0, ((),), (), (0,))
        nodes = self.cone([lit])
        bits = self.cone_bits(lit) if order is None else list(order)
        var: dict[int, int] = {}
        for i, bit in enumerate(bits, start=1):
            node = self._node_of.get(bit)
            if node is not None:
                var[node] = i
        nvars = len(bits)
        for node in nodes:
            if node not in self._bit_of:
                nvars += 1
                var[node] = nvars
        for node in nodes:
            if node in self._bit_of and node not in var:
                raise StructureError(f"input {self._bit_of[node]} missing from variable order")

        def dlit(l: int) -> int:
            v = var[l >> 1]
            return -v if l & 1 else v

        clauses: list[tuple[int, ...]] = []
        owner: list[int] = []
        for node in nodes:
            if node in self._bit_of:
                continue
            g = var[node]
            a, b = dlit(self._f0[node]), dlit(self._f1[node])
            clauses += [(-g, a), (-g, b), (g, -a, -b)]
            owner += [g, g, g]
        clauses.append((dlit(lit),))
        owner.append(0)
        return CnfFormula(
            nvars,
            tuple(clauses),
            tuple((b, i) for i, b in enumerate(bits, start=1)),
            tuple(owner),
        )


@lru_cache(maxsize=None)
def _projection(j: int, k: int) -> int:
    """Truth table of variable ``j`` over ``k`` variables."""
    block = 1 << j
    pattern = ((1 << block) - 1) << block
    length = 2 * block
    total = 1 << k
    while length < total:
        pattern |= pattern << length
        length *= 2
    return pattern & ((1 << total) - 1)


# ---------------------------------------------------------------- bit-blasting


def _add(aig: Aig, a: list[int], b: list[int], carry: int = FALSE) -> tuple[list[int], int]:
    out = []
    for x, y in zip(a, b):
        t = aig.XOR(x, y)
        out.append(aig.XOR(t, carry))
        carry = aig.OR(aig.AND(x, y), aig.AND(carry, t))
    return out, carry


def _ult(aig: Aig, a: list[int], b: list[int]) -> int:
    # a < b  iff  no carry out of a + ~b + 1
    _, carry = _add(aig, a, [neg(x) for x in b], TRUE)
    return neg(carry)


def _shift(aig: Aig, a: list[int], s: list[int], left: bool) -> list[int]:
    w = len(a)
    cur = list(a)
    overflow = FALSE
    for k, sbit in enumerate(s):
        dist = 1 << k
        if dist >= w:
            overflow = aig.OR(overflow, sbit)
            continue
        if left:
            moved = [FALSE] * dist + cur[: w - dist]
        else:
            moved = cur[dist:] + [FALSE] * dist
        cur = [aig.MUX(sbit, m, c) for m, c in zip(moved, cur)]
    return [aig.AND(neg(overflow), c) for c in cur]


def _mul(aig: Aig, a: list[int], b: list[int]) -> list[int]:
    w = len(a)
    acc = [FALSE] * w
    for i, bi in enumerate(b):
        if bi == FALSE:
            continue
        partial = [FALSE] * i + [aig.AND(bi, x) for x in a[: w - i]]
        acc, _ = _add(aig, acc, partial)
    return acc


def _urem(aig: Aig, a: list[int], b: list[int]) -> list[int]:
    # restoring division; a divisor of 0 never subtracts, leaving a
    w = len(a)
    bx = b + [FALSE]
    rem = [FALSE] * (w + 1)
    for i in reversed(range(w)):
        rem = [a[i]] + rem[:w]
        ge = neg(_ult(aig, rem, bx))
        diff, _ = _add(aig, rem, [neg(x) for x in bx], TRUE)
        rem = [aig.MUX(ge, d, r) for d, r in zip(diff, rem)]
    return rem[:w]


def _eq(aig: Aig, a: list[int], b: list[int]) -> int:
    acc = TRUE
    for x, y in zip(a, b):
        acc = aig.AND(acc, neg(aig.XOR(x, y)))
    return acc


def blast(aig: Aig, e: BVExpr, memo: dict[int, list[int]] | None = None) -> list[int]:
    """Literals for the bits of ``e`` (LSB first).  ``e`` must be local-free."""
    memo = {} if memo is None else memo
    for node in postorder(e):
        if id(node) in memo:
            continue
        op = node.op
        if op == "const":
            bits = [TRUE if (node.value >> i) & 1 else FALSE for i in range(node.width)]
        elif op == "input":
            bits = [aig.input(Bit(node.name, i)) for i in range(node.width)]
        elif op == "local":
            raise StructureError(f"cannot bit-blast free local variable {node.name!r}")
        else:
            args = [memo[id(c)] for c in node.args]
            if op == "~":
                bits = [neg(x) for x in args[0]]
            elif op == "not":
                bits = [neg(args[0][0])]
            elif op in ("&", "and"):
                bits = [aig.AND(x, y) for x, y in zip(*args)]
            elif op in ("|", "or"):
                bits = [aig.OR(x, y) for x, y in zip(*args)]
            elif op == "^":
                bits = [aig.XOR(x, y) for x, y in zip(*args)]
            elif op == "+":
                bits = _add(aig, *args)[0]
            elif op == "-":
                bits = _add(aig, args[0], [neg(x) for x in args[1]], TRUE)[0]
            elif op == "*":
                bits = _mul(aig, *args)
            elif op == "%":
                bits = _urem(aig, *args)
            elif op == "<<":
                bits = _shift(aig, args[0], args[1], left=True)
            elif op == ">>":
                bits = _shift(aig, args[0], args[1], left=False)
            elif op == "==":
                bits = [_eq(aig, *args)]
            elif op == "!=":
                bits = [neg(_eq(aig, *args))]
            elif op == "<":
                bits = [_ult(aig, *args)]
            else:
                raise StructureError(f"unknown operator {op!r}")
        memo[id(node)] = bits
    return memo[id(e)]


@lru_cache(maxsize=4096)
def _compiled(e: BVExpr) -> tuple[Aig, int]:
    aig = Aig()
    return aig, blast(aig, e)[0]


def compile_func(f: BoolFunc) -> tuple[Aig, int]:
    """Circuit and root literal for ``f`` (cached per expression)."""
    aig, root = _compiled(f.expr)
    return aig, aig.restrict(root, dict(f.fixed))


def compile_many(funcs: Sequence[BoolFunc]) -> tuple[Aig, list[int]]:
    """Place several functions in one circuit so their literals can be combined."""
    exprs = {id(f.expr) for f in funcs}
    if len(exprs) == 1:
        aig, root = _compiled(funcs[0].expr)
        return aig, [aig.restrict(root, dict(f.fixed)) for f in funcs]
    aig = Aig()
    memo: dict[int, list[int]] = {}
    out = []
    for f in funcs:
        root = blast(aig, f.expr, memo)[0]
        out.append(aig.restrict(root, dict(f.fixed)))
    return aig, out
