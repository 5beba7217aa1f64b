"""Weighted control-flow graphs and their path algebra.

Blocks are numbered in creation order, which is a topological order; the
dummy sink is always the last block.  Edges are numbered by source block,
with a branch point's false edge before its true edge.  Under this labeling
the unrolled two-iteration modexp gets the familiar 9-edge diamond chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .. import expr as bv
from ..errors import StructureError, UnsupportedStructure
from .lang import Assign, If, Repeat, Return, SourceProgram, Stmt, Weight, stmt_str


@dataclass(frozen=True)
class CostModel:
    """Default block weights.

    A statement costs ``statement`` plus ``ops[op]`` for every operator node in
    its expression; a block costs the sum over its statements, and a branch
    point costs its condition.  ``weight k`` annotations override a block.
    """

    statement: int = 1
    ops: tuple[tuple[str, int], ...] = ()

    @classmethod
    def from_table(cls, table: Mapping[str, int]) -> "CostModel":
        table = dict(table)
        stmt = int(table.pop("statement", 1))
        return cls(stmt, tuple(sorted((k, int(v)) for k, v in table.items())))

    def expr_cost(self, e: bv.BVExpr) -> int:
        if not self.ops:
            return 0
        costs = dict(self.ops)
        return sum(costs.get(n.op, 0) for n in bv.postorder(e))

    def stmt_cost(self, s: Stmt) -> int:
        if isinstance(s, (Assign, Return)):
            return self.statement + self.expr_cost(s.expr)
        return 0

    def cond_cost(self, cond: bv.BVExpr) -> int:
        return self.statement + self.expr_cost(cond)


DEFAULT_COST = CostModel()


@dataclass(frozen=True)
class Block:
    id: int
    kind: str  # 'code' | 'branch' | 'sink'
    stmts: tuple[Stmt, ...] = ()
    weight: int = 0
    cond: bv.BVExpr | None = None
    line: int = 0


@dataclass(frozen=True)
class Edge:
    index: int
    src: int
    dst: int
    label: str | None = None  # 'true' / 'false' out of a branch point


@dataclass(frozen=True)
class WeightedCfg:
    blocks: tuple[Block, ...]
    edges: tuple[Edge, ...]
    inputs: tuple[tuple[str, int], ...]
    locals: tuple[tuple[str, int], ...] = ()
    program: SourceProgram | None = field(default=None, compare=False, repr=False)

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return len(self.blocks) - 1

    @cached_property
    def branches(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.blocks if b.kind == "branch")

    @cached_property
    def out_edges(self) -> tuple[tuple[Edge, ...], ...]:
        out: list[list[Edge]] = [[] for _ in self.blocks]
        for e in self.edges:
            out[e.src].append(e)
        return tuple(tuple(x) for x in out)

    @cached_property
    def in_edges(self) -> tuple[tuple[Edge, ...], ...]:
        inc: list[list[Edge]] = [[] for _ in self.blocks]
        for e in self.edges:
            inc[e.dst].append(e)
        return tuple(tuple(x) for x in inc)

    def edge(self, block: int, label: str) -> Edge:
        for e in self.out_edges[block]:
            if e.label == label:
                return e
        raise StructureError(f"block {block} has no {label} edge")

    @cached_property
    def input_bits(self) -> tuple[bv.Bit, ...]:
        return bv.input_bits(self.inputs)

    @property
    def num_input_bits(self) -> int:
        return len(self.input_bits)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.blocks], dtype=object)

    def validate(self) -> None:
        """Check the structural invariants; raises StructureError."""
        if not self.blocks or self.blocks[-1].kind != "sink":
            raise StructureError("last block must be the dummy sink")
        if self.out_edges[self.sink]:
            raise StructureError("dummy sink has outgoing edges")
        for e in self.edges:
            if e.src >= e.dst:
                raise StructureError(f"edge {e.index} is not forward; graph must be a DAG")
        for b in self.blocks[:-1]:
            outs = self.out_edges[b.id]
            want = 2 if b.kind == "branch" else 1
            if len(outs) != want:
                raise StructureError(f"block {b.id} has outdegree {len(outs)}, expected {want}")
            if b.weight < 0:
                raise StructureError(f"block {b.id} has negative weight")
            if b.id != self.source and not self.in_edges[b.id]:
                raise StructureError(f"block {b.id} is unreachable")
        sink_preds = {e.src for e in self.in_edges[self.sink]}
        for b in self.blocks[:-1]:
            if any(e.dst == self.sink for e in self.out_edges[b.id]) != (b.id in sink_preds):
                raise StructureError("sink bookkeeping inconsistent")

    def to_json(self) -> str:
        """Debugging dump: blocks, weights, edges, pretty-printed conditions."""
        doc = {
            "inputs": [{"name": n, "width": w} for n, w in self.inputs],
            "source": self.source,
            "sink": self.sink,
            "blocks": [
                {
                    "id": b.id,
                    "kind": b.kind,
                    "weight": b.weight,
                    "statements": [stmt_str(s) for s in b.stmts],
                    **({"condition": bv.to_str(b.cond)} if b.cond is not None else {}),
                }
                for b in self.blocks
            ],
            "edges": [
                {"index": e.index, "src": e.src, "dst": e.dst, "label": e.label}
                for e in self.edges
            ],
        }
        return json.dumps(doc, indent=2)


# ---------------------------------------------------------------- construction


class _Builder:
    def __init__(self, cost: CostModel):
        self.cost = cost
        self.blocks: list[dict] = []
        self.links: list[tuple[int, int, str | None]] = []
        self.sink_preds: list[tuple[int, str | None]] = []

    def new_block(self, pending, **fields) -> int:
        bid = len(self.blocks)
        if bid and not pending:
            raise StructureError(f"unreachable code at line {fields.get('line', 0)}")
        self.blocks.append(fields)
        for src, label in pending:
            self.links.append((src, bid, label))
        return bid

    def flush(self, buf: list[Stmt], pending):
        if not buf:
            return pending
        stmts = tuple(s for s in buf if not isinstance(s, Weight))
        notes = [s.amount for s in buf if isinstance(s, Weight)]
        weight = sum(notes) if notes else sum(self.cost.stmt_cost(s) for s in stmts)
        bid = self.new_block(pending, kind="code", stmts=stmts, weight=weight, line=buf[0].line)
        buf.clear()
        if stmts and isinstance(stmts[-1], Return):
            self.sink_preds.append((bid, None))
            return []
        return [(bid, None)]

    def emit(self, stmts: Sequence[Stmt], pending):
        buf: list[Stmt] = []
        for s in stmts:
            if isinstance(s, Repeat):
                raise StructureError(f"line {s.line}: unroll loops before building the CFG")
            if isinstance(s, If):
                pending = self.flush(buf, pending)
                br = self.new_block(pending, kind="branch", cond=s.cond,
                                    weight=self.cost.cond_cost(s.cond), line=s.line)
                then_exits = self.emit(s.then, [(br, "true")])
                else_exits = self.emit(s.orelse, [(br, "false")])
                pending = then_exits + else_exits
            else:
                buf.append(s)
                if isinstance(s, Return):
                    pending = self.flush(buf, pending)
        return self.flush(buf, pending)


def build_cfg(p: SourceProgram, cost: CostModel = DEFAULT_COST) -> WeightedCfg:
    """Weighted CFG of a loop-free program, with a dummy sink appended."""
    if not p.is_loop_free():
        raise StructureError("program still contains repeat loops; unroll it first")
    b = _Builder(cost)
    pending = b.emit(p.body, [])
    if not b.blocks:
        b.new_block([], kind="code", stmts=(), weight=0)
        pending = [(0, None)]
    sink = len(b.blocks)
    for src, label in b.sink_preds + pending:
        b.links.append((src, sink, label))
    order = {"false": 0, "true": 1, None: 2}
    links = sorted(b.links, key=lambda t: (t[0], order[t[2]], t[1]))
    edges = tuple(Edge(i, s, d, l) for i, (s, d, l) in enumerate(links))
    blocks = tuple(Block(id=i, **fields) for i, fields in enumerate(b.blocks))
    blocks += (Block(id=sink, kind="sink"),)
    g = WeightedCfg(
        blocks,
        edges,
        tuple((d.name, d.width) for d in p.inputs),
        tuple((d.name, d.width) for d in p.locals),
        p,
    )
    g.validate()
    return g


def with_weights(g: WeightedCfg, weights: Mapping[int, int]) -> WeightedCfg:
    """Copy of ``g`` with some block weights replaced."""
    blocks = tuple(
        Block(b.id, b.kind, b.stmts, weights.get(b.id, b.weight), b.cond, b.line) for b in g.blocks
    )
    return WeightedCfg(blocks, g.edges, g.inputs, g.locals, g.program)


# ---------------------------------------------------------------- nesting


@dataclass(frozen=True)
class Nesting:
    """Result of the unnesting check.

    ``witness`` is ``(outer, inner)``: a branch point lying inside the region
    of another before that region reconverges.
    """

    ok: bool
    witness: tuple[int, int] | None = None
    depth: int = 0

    def __bool__(self) -> bool:
        return self.ok


def postdominators(g: WeightedCfg) -> list[int]:
    """Immediate post-dominator of every block (the sink maps to itself).

    Ids are topological and a post-dominator always has a larger id than the
    block it post-dominates, so one reverse sweep with two-finger
    intersection suffices.
    """
    n = len(g.blocks)
    ipdom = [-1] * n
    ipdom[g.sink] = g.sink
    for v in reversed(range(n - 1)):
        succ = [e.dst for e in g.out_edges[v]]
        cur = succ[0]
        for other in succ[1:]:
            a, b = cur, other
            while a != b:
                if a < b:
                    a = ipdom[a]
                else:
                    b = ipdom[b]
            cur = a
        ipdom[v] = cur
    return ipdom


def open_regions(g: WeightedCfg) -> list[frozenset[int]]:
    """For each block, the branch points whose region (before reconvergence) contains it."""
    ipdom = postdominators(g)
    closes: dict[int, set[int]] = {}
    for b in g.branches:
        closes.setdefault(ipdom[b], set()).add(b)
    regions: list[frozenset[int]] = [frozenset()] * len(g.blocks)
    for v in range(len(g.blocks)):
        acc: set[int] = set()
        for e in g.in_edges[v]:
            acc |= regions[e.src]
            if g.blocks[e.src].kind == "branch":
                acc.add(e.src)
        regions[v] = frozenset(acc - closes.get(v, set()))
    return regions


def check_unnested(g: WeightedCfg) -> Nesting:
    """Every branch region must reconverge before any other branch point.

    Walks blocks in topological order carrying the set of open branch
    regions; its size is the nesting level.
    """
    regions = open_regions(g)
    depth = max((len(r) for r in regions), default=0)
    for b in g.branches:
        if regions[b]:
            return Nesting(False, (min(regions[b]), b), depth)
    return Nesting(True, None, depth)


def require_unnested(g: WeightedCfg) -> None:
    nest = check_unnested(g)
    if not nest:
        outer, inner = nest.witness
        raise UnsupportedStructure(
            f"nested conditionals: branch {inner} lies inside branch {outer}", nest.witness
        )


# ---------------------------------------------------------------- paths


@dataclass(frozen=True)
class PathVec:
    """A source-to-sink path as an edge-incidence vector plus its true-branch set."""

    edges: tuple[int, ...]
    branches: frozenset[int]

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64)


def path_from_edges(g: WeightedCfg, vector: Iterable[int]) -> PathVec:
    """Validate an edge vector as a source-to-sink path."""
    vec = tuple(int(x) for x in vector)
    if len(vec) != len(g.edges) or any(x not in (0, 1) for x in vec):
        raise StructureError("path vector must be a 0/1 vector over the edges")
    chosen = {i for i, x in enumerate(vec) if x}
    v, used, taken = g.source, set(), set()
    while v != g.sink:
        nxt = [e for e in g.out_edges[v] if e.index in chosen]
        if len(nxt) != 1:
            raise StructureError(f"vector does not leave block {v} along exactly one edge")
        e = nxt[0]
        used.add(e.index)
        if e.label == "true":
            taken.add(v)
        v = e.dst
    if used != chosen:
        raise StructureError("vector selects edges off the source-to-sink path")
    return PathVec(vec, frozenset(taken))


def path_blocks(g: WeightedCfg, p: PathVec) -> list[int]:
    v, seq = g.source, [g.source]
    chosen = {i for i, x in enumerate(p.edges) if x}
    while v != g.sink:
        (e,) = [e for e in g.out_edges[v] if e.index in chosen]
        v = e.dst
        seq.append(v)
    return seq


def path_weight(g: WeightedCfg, p: PathVec | Sequence[int]) -> int:
    """Total block weight along a path (each edge carries its source block's weight)."""
    vec = p.edges if isinstance(p, PathVec) else p
    path_from_edges(g, vec)
    return sum(g.blocks[e.src].weight for e in g.edges if vec[e.index])


def compose_path(g: WeightedCfg, taken: Iterable[int]) -> PathVec:
    """The unique path whose true-branch set is ``taken`` (unnested graphs only)."""
    require_unnested(g)
    taken = frozenset(taken)
    stray = taken - set(g.branches)
    if stray:
        raise StructureError(f"not branch points: {sorted(stray)}")
    vec = [0] * len(g.edges)
    v = g.source
    while v != g.sink:
        if g.blocks[v].kind == "branch":
            e = g.edge(v, "true" if v in taken else "false")
        else:
            (e,) = g.out_edges[v]
        vec[e.index] = 1
        v = e.dst
    return PathVec(tuple(vec), taken)


def special_paths(g: WeightedCfg) -> tuple[PathVec, dict[int, PathVec]]:
    """The all-false path and, per branch point, the path taking only its true edge."""
    none = compose_path(g, ())
    return none, {b: compose_path(g, (b,)) for b in g.branches}


# ---------------------------------------------------------------- conditions


def symbolic_conditions(g: WeightedCfg) -> dict[int, bv.BoolFunc]:
    """Each branch condition closed over input bits.

    Straight-line assignments outside every branch region are substituted
    forward.  Variables written inside a region have a path-dependent value
    after the merge; a condition reading one raises UnsupportedStructure.
    """
    require_unnested(g)
    regions = open_regions(g)
    env: dict[str, bv.BVExpr] = {name: bv.inp(name, w) for name, w in g.inputs}
    env.update({name: bv.const(0, w) for name, w in g.locals})
    tainted: dict[str, int] = {}
    out: dict[int, bv.BoolFunc] = {}
    for block in g.blocks:
        if block.kind == "branch":
            reads = bv.free_locals(block.cond)
            bad = sorted(set(reads) & set(tainted))
            if bad:
                raise UnsupportedStructure(
                    f"branch {block.id} (line {block.line}) reads {bad[0]!r}, which depends on "
                    f"the outcome of branch {tainted[bad[0]]}",
                    (block.id, bad[0]),
                )
            out[block.id] = bv.close_over_inputs(block.cond, env)
            continue
        inside = regions[block.id]
        for s in block.stmts:
            if not isinstance(s, Assign):
                continue
            if inside:
                tainted.setdefault(s.target, min(inside))
                continue
            reads = set(bv.free_locals(s.expr)) & set(tainted)
            if reads:
                tainted[s.target] = tainted[sorted(reads)[0]]
            else:
                env[s.target] = bv.resolve_locals(s.expr, env)
                tainted.pop(s.target, None)
    return out
