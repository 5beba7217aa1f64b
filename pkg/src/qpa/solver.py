"""Satisfiability, equivalence and exact model counting.

Small problems are decided by bit-parallel enumeration over the circuit; CNF
inputs and large variable sets go through DPLL (with component splitting and a
cache when counting).  Every query is self-contained: a :class:`Solver` only
holds configuration and call counters.
"""

from __future__ import annotations

import os
import random
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .circuit import FALSE, TRUE, Aig, CnfFormula, compile_func, compile_many
from .errors import BudgetExceeded, QpaError, SupportViolation
from .expr import Bit, BoolFunc


@dataclass(frozen=True)
class Budget:
    """Resource limits for one query.  ``None`` means unlimited."""

    max_decisions: int | None = None
    max_seconds: float | None = None


@dataclass(frozen=True)
class CountResult:
    count: int
    num_vars: int
    decisions: int = 0
    seconds: float = 0.0
    method: str = "enumeration"


def _default_seed() -> int:
    return int(os.environ.get("QPA_SEED", "0"))


@dataclass
class Solver:
    """Configuration plus per-kind call counters.

    ``enumerate_limit`` is the largest number of variables decided by
    enumeration; anything above goes through DPLL on the CNF encoding.
    """

    budget: Budget = field(default_factory=Budget)
    seed: int = field(default_factory=_default_seed)
    enumerate_limit: int = 24
    stats: Counter = field(default_factory=Counter)

    # ------------------------------------------------------------ CNF level

    def is_sat(self, cnf: CnfFormula) -> bool:
        self.stats["is_sat"] += 1
        return _Dpll(cnf, self.budget, self.seed).solve()

    def count_cnf(self, cnf: CnfFormula) -> CountResult:
        """Number of total models of ``cnf`` over all its variables."""
        start = time.perf_counter()
        search = _Dpll(cnf, self.budget, self.seed)
        n = search.count()
        return CountResult(n, cnf.num_vars, search.decisions, time.perf_counter() - start, "dpll")

    # ------------------------------------------------------------ function level

    def satisfiable(self, f: BoolFunc) -> bool:
        aig, lit = compile_func(f)
        return self._lit_sat(aig, lit)

    def equiv(self, f: BoolFunc, g: BoolFunc) -> bool:
        """True iff ``f`` and ``g`` agree everywhere (their XOR is unsatisfiable)."""
        self.stats["equiv"] += 1
        aig, (a, b) = compile_many([f, g])
        return not self._lit_sat(aig, aig.XOR(a, b))

    def _lit_sat(self, aig: Aig, lit: int) -> bool:
        if lit in (FALSE, TRUE):
            return lit == TRUE
        bits = aig.cone_bits(lit)
        if len(bits) <= self.enumerate_limit:
            return aig.count_models(lit, bits, stop_at_first=True) > 0
        return self.is_sat(aig.to_cnf(lit))

    def model_count(self, f: BoolFunc, vars: Iterable[Bit]) -> CountResult:
        """Exact number of assignments to ``vars`` under which ``f`` holds.

        Bits of ``f`` outside ``vars`` must be semantically irrelevant; one that
        is not raises :class:`SupportViolation`.
        """
        self.stats["model_count"] += 1
        start = time.perf_counter()
        vars = frozenset(vars)
        aig, lit = compile_func(f)
        for bit in aig.cone_bits(lit):
            if bit in vars:
                continue
            lo, hi = aig.restrict(lit, {bit: 0}), aig.restrict(lit, {bit: 1})
            if self._lit_sat(aig, aig.XOR(lo, hi)):
                raise SupportViolation(f"bit {bit} affects the function but is not counted over")
            lit = lo
        bits = aig.cone_bits(lit)
        free = len(vars) - len(bits)
        if len(bits) <= self.enumerate_limit:
            n = aig.count_models(lit, bits)
            return CountResult(n << free, len(vars), 0, time.perf_counter() - start)
        inner = self.count_cnf(aig.to_cnf(lit, bits))
        return CountResult(inner.count << free, len(vars), inner.decisions,
                           time.perf_counter() - start, "dpll")


_default = Solver()


def default_solver() -> Solver:
    return _default


def is_sat(cnf: CnfFormula) -> bool:
    return _default.is_sat(cnf)


def equiv(f: BoolFunc, g: BoolFunc) -> bool:
    return _default.equiv(f, g)


def model_count(f: BoolFunc, vars: Iterable[Bit]) -> CountResult:
    return _default.model_count(f, vars)


# ---------------------------------------------------------------- DPLL


class _Conflict(Exception):
    pass


class _Dpll:
    """DPLL over residual clause lists.

    Clauses are ``(owner, lits)`` pairs; ``owner`` is the gate variable a
    definitional clause belongs to (0 otherwise).
    """

    def __init__(self, cnf: CnfFormula, budget: Budget, seed: int):
        owners = cnf.gate_of_clause or (0,) * len(cnf.clauses)
        self.clauses = [(o, tuple(c)) for o, c in zip(owners, cnf.clauses)]
        self.num_vars = cnf.num_vars
        self.budget = budget
        self.decisions = 0
        self.deadline = (time.perf_counter() + budget.max_seconds) if budget.max_seconds else None
        rng = random.Random(seed)
        order = list(range(1, cnf.num_vars + 1))
        rng.shuffle(order)
        self.rank = {v: i for i, v in enumerate(order)}
        # branch only on inputs when the gate variables are definitional
        self.decision_vars = (
            frozenset(v for _, v in cnf.input_vars) if cnf.input_vars and cnf.gate_of_clause else None
        )
        if self.decision_vars is not None:
            # inputs closest to the root first; keeps carry chains decided
            # from the top so residual subproblems coincide in the cache
            dist = _root_distance(self.clauses)
            far = cnf.num_vars + 1
            self.rank = {v: (dist.get(v, far), self.rank[v]) for v in self.rank}
        self.cache: dict[frozenset, int] = {}

    def _tick(self) -> None:
        self.decisions += 1
        if self.budget.max_decisions is not None and self.decisions > self.budget.max_decisions:
            raise BudgetExceeded(f"solver exceeded {self.budget.max_decisions} decisions")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise BudgetExceeded(f"solver exceeded {self.budget.max_seconds}s")

    @staticmethod
    def _assign(clauses, lits: set[int]):
        out = []
        for owner, c in clauses:
            if any(l in lits for l in c):
                continue
            reduced = tuple(l for l in c if -l not in lits)
            if not reduced:
                raise _Conflict
            out.append((owner, reduced))
        return out

    def _propagate(self, clauses, assigned: set[int]):
        while True:
            units = {c[0] for _, c in clauses if len(c) == 1}
            if not units:
                return clauses
            if any(-u in units for u in units):
                raise _Conflict
            assigned |= {abs(u) for u in units}
            clauses = self._assign(clauses, units)

    def _choose(self, clauses) -> int:
        occ: Counter = Counter(abs(l) for _, c in clauses for l in c)
        if self.decision_vars is not None:
            pool = [v for v in occ if v in self.decision_vars]
            if pool:
                return min(pool, key=self.rank.__getitem__)
        return max(occ, key=lambda v: (occ[v], self.rank[v]))

    def solve(self) -> bool:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * self.num_vars + 1000))
        try:
            if any(not c for _, c in self.clauses):
                return False
            return self._solve(self.clauses)
        finally:
            sys.setrecursionlimit(limit)

    def _solve(self, clauses) -> bool:
        try:
            clauses = self._propagate(clauses, set())
        except _Conflict:
            return False
        if not clauses:
            return True
        v = self._choose(clauses)
        self._tick()
        for lit in (v, -v):
            try:
                branch = self._assign(clauses, {lit})
            except _Conflict:
                continue
            if self._solve(branch):
                return True
        return False

    def count(self) -> int:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * self.num_vars + 1000))
        try:
            if any(not c for _, c in self.clauses):
                return 0
            return self._count(self.clauses, set(range(1, self.num_vars + 1)))
        finally:
            sys.setrecursionlimit(limit)

    def _count(self, clauses, scope: set[int]) -> int:
        assigned: set[int] = set()
        try:
            clauses = self._propagate(clauses, assigned)
        except _Conflict:
            return 0
        mentioned = {abs(l) for _, c in clauses for l in c}
        free = len(scope) - len(assigned & scope) - len(mentioned)
        total = 1 << free
        for comp in _components(clauses):
            total *= self._count_component(comp)
            if total == 0:
                return 0
        return total

    def _count_component(self, comp) -> int:
        key = frozenset(c for _, c in comp)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        vars_ = {abs(l) for _, c in comp for l in c}
        if all(o and (o in c or -o in c) for o, c in comp):
            # only residual gate definitions: every assignment to the
            # non-gate variables extends uniquely
            result = 1 << (len(vars_) - len({o for o, _ in comp}))
        else:
            v = self._choose(comp)
            self._tick()
            result = 0
            rest = vars_ - {v}
            for lit in (v, -v):
                try:
                    branch = self._assign(comp, {lit})
                except _Conflict:
                    continue
                result += self._count(branch, set(rest))
        self.cache[key] = result
        return result


def _root_distance(clauses) -> dict[int, int]:
    fanins: dict[int, set[int]] = {}
    roots = []
    for owner, c in clauses:
        if owner:
            fanins.setdefault(owner, set()).update(abs(l) for l in c if abs(l) != owner)
        else:
            roots += [abs(l) for l in c]
    dist = {r: 0 for r in roots}
    frontier = list(roots)
    while frontier:
        nxt = []
        for v in frontier:
            for u in fanins.get(v, ()):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    return dist


def _components(clauses):
    """Split clauses into groups with disjoint variable sets."""
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, c in clauses:
        first = find(abs(c[0]))
        for l in c[1:]:
            r = find(abs(l))
            if r != first:
                parent[r] = first
    groups: dict[int, list] = {}
    for item in clauses:
        groups.setdefault(find(abs(item[1][0])), []).append(item)
    return list(groups.values())


# ---------------------------------------------------------------- DIMACS


def dimacs_text(cnf: CnfFormula) -> str:
    lines = [f"c var {bit} {index}" for bit, index in cnf.input_vars]
    lines.append(f"p cnf {cnf.num_vars} {len(cnf.clauses)}")
    lines += [" ".join([*map(str, c), "0"]) for c in cnf.clauses]
    return "\n".join(lines) + "\n"


def export_dimacs(cnf: CnfFormula, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(dimacs_text(cnf))
    return path


def read_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF, recovering ``c var <name>[<i>] <index>`` comments."""
    inputs = []
    header = None
    lits: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            parts = line.split()
            if len(parts) == 4 and parts[1] == "var":
                name, _, idx = parts[2].rstrip("]").partition("[")
                inputs.append((Bit(name, int(idx)), int(parts[3])))
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise QpaError(f"bad DIMACS header: {line!r}")
            header = (int(parts[2]), int(parts[3]))
            continue
        lits += [int(t) for t in line.split()]
    if header is None:
        raise QpaError("DIMACS text has no 'p cnf' header")
    clauses, cur = [], []
    for l in lits:
        if l == 0:
            clauses.append(tuple(cur))
            cur = []
        else:
            cur.append(l)
    if cur:
        clauses.append(tuple(cur))
    if len(clauses) != header[1]:
        raise QpaError(f"header announces {header[1]} clauses, found {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses), tuple(inputs))
