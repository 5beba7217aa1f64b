"""Ground-truth baselines: run every input, or count inputs per path.

Two concrete interpreters are provided so that oracle bugs and frontend bugs
do not hide each other: one walks the (unrolled) AST and works out block
boundaries and weights by itself, the other routes inputs through the CFG.
Both are vectorised over numpy lanes, one lane per input.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import expr as bv
from .analysis import Stats, WeightDistribution
from .errors import BudgetExceeded, StructureError
from .expr import Bit
from .program.cfg import (
    DEFAULT_COST,
    CostModel,
    PathVec,
    WeightedCfg,
    path_weight,
    require_unnested,
    compose_path,
    symbolic_conditions,
)
from .program.lang import Assign, If, Repeat, Return, SourceProgram, Weight
from .solver import Solver, default_solver

DEFAULT_INPUT_LIMIT = 20
DEFAULT_PATH_LIMIT = 1 << 16
CHUNK = 1 << 16


@dataclass(frozen=True)
class ExecutionTrace:
    inputs: tuple[tuple[str, int], ...]
    blocks: tuple[int, ...]
    taken: frozenset[int]
    weight: int
    path: PathVec
    result: int | None = None


def _split_inputs(g_inputs: Sequence[tuple[str, int]], index: np.ndarray) -> dict[str, np.ndarray]:
    """Input values for input numbers ``index`` (bits laid out variable by variable, LSB first)."""
    out = {}
    shift = 0
    for name, width in g_inputs:
        out[name] = (index >> np.uint64(shift)) & np.uint64((1 << width) - 1)
        shift += width
    return out


def input_value(g: WeightedCfg, assignment: Mapping[Bit, int]) -> dict[str, int]:
    values = {name: 0 for name, _ in g.inputs}
    for bit, v in assignment.items():
        if v:
            values[bit.var] |= 1 << bit.index
    return values


# ---------------------------------------------------------------- scalar


def execute(g: WeightedCfg, inputs: Mapping[str, int]) -> ExecutionTrace:
    """Run one input through the CFG."""
    env = {name: int(inputs.get(name, 0)) & ((1 << w) - 1) for name, w in g.inputs}
    env.update({name: 0 for name, _ in g.locals})
    v = g.source
    seq = [v]
    taken = set()
    edges = [0] * len(g.edges)
    result = None
    weight = 0
    while v != g.sink:
        block = g.blocks[v]
        weight += block.weight
        for s in block.stmts:
            if isinstance(s, Assign):
                env[s.target] = bv.evaluate(s.expr, {}, env)
            elif isinstance(s, Return):
                result = bv.evaluate(s.expr, {}, env)
        if block.kind == "branch":
            label = "true" if bv.evaluate(block.cond, {}, env) else "false"
            if label == "true":
                taken.add(v)
            e = g.edge(v, label)
        else:
            (e,) = g.out_edges[v]
        edges[e.index] = 1
        v = e.dst
        seq.append(v)
    path = PathVec(tuple(edges), frozenset(taken))
    if weight != path_weight(g, path):
        raise StructureError("trace weight disagrees with path weight")
    entry = tuple((name, int(inputs.get(name, 0)) & ((1 << w) - 1)) for name, w in g.inputs)
    return ExecutionTrace(entry, tuple(seq), frozenset(taken), weight, path, result)


def run_program(p: SourceProgram, inputs: Mapping[str, int]) -> tuple[int | None, dict[str, int]]:
    """Scalar AST interpreter with native ``repeat``; returns (result, final state)."""
    env = {d.name: int(inputs.get(d.name, 0)) & ((1 << d.width) - 1) for d in p.inputs}
    env.update({d.name: 0 for d in p.locals})

    def run(stmts) -> tuple[bool, int | None]:
        for s in stmts:
            if isinstance(s, Assign):
                env[s.target] = bv.evaluate(s.expr, {}, env)
            elif isinstance(s, Return):
                return True, bv.evaluate(s.expr, {}, env)
            elif isinstance(s, If):
                done, val = run(s.then if bv.evaluate(s.cond, {}, env) else s.orelse)
                if done:
                    return done, val
            elif isinstance(s, Repeat):
                for _ in range(s.count):
                    done, val = run(s.body)
                    if done:
                        return done, val
        return False, None

    return run(p.body)[1], env


# ---------------------------------------------------------------- vectorised interpreters


def _cfg_lanes(g: WeightedCfg, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights and true-branch bitmasks (over branch ordinals) for a chunk of inputs."""
    n = len(index)
    state = _split_inputs(g.inputs, index)
    for name, _ in g.locals:
        state[name] = np.zeros(n, dtype=np.uint64)
    ordinal = {b: i for i, b in enumerate(g.branches)}
    at = np.zeros((len(g.blocks), n), dtype=bool)
    at[g.source] = True
    weight = np.zeros(n, dtype=object if _wide(g) else np.int64)
    taken = np.zeros(n, dtype=object)
    for block in g.blocks[:-1]:
        lanes = at[block.id]
        if not lanes.any():
            continue
        weight[lanes] += block.weight
        for s in block.stmts:
            if isinstance(s, Assign):
                new = bv.evaluate_vec(s.expr, {}, state, n)
                state[s.target] = np.where(lanes, new, state[s.target])
        if block.kind == "branch":
            c = bv.evaluate_vec(block.cond, {}, state, n).astype(bool)
            t, f = g.edge(block.id, "true"), g.edge(block.id, "false")
            at[t.dst] |= lanes & c
            at[f.dst] |= lanes & ~c
            taken[lanes & c] += 1 << ordinal[block.id]
        else:
            (e,) = g.out_edges[block.id]
            at[e.dst] |= lanes
    if not at[g.sink].all():
        raise StructureError("some inputs never reached the sink")
    return weight, taken


def _wide(g: WeightedCfg) -> bool:
    return sum(b.weight for b in g.blocks) >= (1 << 62)


def _ast_blocks(p: SourceProgram, cost: CostModel):
    """Segment the AST the way the CFG builder does, independently.

    A block is a maximal run of simple statements in one statement list,
    ended by an ``if`` or a ``return``.  Each ``if`` is its own block
    costing its condition.  Returns a nested plan of ('run', stmts, weight)
    and ('if', ordinal, cond, weight, then_plan, else_plan) items.
    """
    counter = itertools.count()

    def plan(stmts):
        out, run = [], []

        def close():
            if run:
                notes = [s.amount for s in run if isinstance(s, Weight)]
                body = [s for s in run if not isinstance(s, Weight)]
                w = sum(notes) if notes else sum(cost.stmt_cost(s) for s in body)
                out.append(("run", tuple(body), w))
                run.clear()

        for s in stmts:
            if isinstance(s, If):
                close()
                k = next(counter)
                out.append(("if", k, s.cond, cost.cond_cost(s.cond), plan(s.then), plan(s.orelse)))
            elif isinstance(s, Repeat):
                raise StructureError("AST interpreter expects an unrolled program")
            else:
                run.append(s)
                if isinstance(s, Return):
                    close()
        close()
        return out

    return plan(p.body)


def _ast_lanes(p: SourceProgram, cost: CostModel, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(index)
    state = _split_inputs([(d.name, d.width) for d in p.inputs], index)
    for d in p.locals:
        state[d.name] = np.zeros(n, dtype=np.uint64)
    weight = np.zeros(n, dtype=np.int64)
    taken = np.zeros(n, dtype=object)
    live = np.ones(n, dtype=bool)

    def run(items, mask):
        for item in items:
            m = mask & live
            if not m.any():
                return
            if item[0] == "run":
                _, stmts, w = item
                weight[m] += w
                for s in stmts:
                    if isinstance(s, Assign):
                        new = bv.evaluate_vec(s.expr, {}, state, n)
                        state[s.target] = np.where(m, new, state[s.target])
                    elif isinstance(s, Return):
                        live[m] = False
            else:
                _, k, cond, w, then, orelse = item
                weight[m] += w
                c = bv.evaluate_vec(cond, {}, state, n).astype(bool)
                taken[m & c] += 1 << k
                run(then, m & c)
                run(orelse, m & ~c)

    run(_ast_blocks(p, cost), np.ones(n, dtype=bool))
    return weight, taken


def _chunk_job(args):
    kind, obj, cost, lo, hi = args
    index = np.arange(lo, hi, dtype=np.uint64)
    if kind == "cfg":
        w, _ = _cfg_lanes(obj, index)
    else:
        w, _ = _ast_lanes(obj, cost, index)
    keys, counts = np.unique(w, return_counts=True)
    return {int(k): int(c) for k, c in zip(keys, counts)}


def brute_force_distribution(
    g: WeightedCfg,
    limit: int = DEFAULT_INPUT_LIMIT,
    interpreter: str = "cfg",
    cost: CostModel = DEFAULT_COST,
    jobs: int = 1,
) -> WeightDistribution:
    """Exact distribution by running all 2^|I| inputs.

    ``interpreter='ast'`` runs the source program instead of the CFG; it
    must be given the cost model the CFG was built with.
    """
    n = g.num_input_bits
    if n > limit:
        raise BudgetExceeded(f"2^{n} inputs exceed the brute-force limit of 2^{limit}")
    if interpreter not in ("cfg", "ast"):
        raise ValueError(f"unknown interpreter {interpreter!r}")
    if interpreter == "ast" and g.program is None:
        raise StructureError("CFG carries no source program")
    start = time.perf_counter()
    obj = g if interpreter == "cfg" else g.program
    total = 1 << n
    chunks = [(interpreter, obj, cost, lo, min(lo + CHUNK, total)) for lo in range(0, total, CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_chunk_job, chunks))
    else:
        parts = [_chunk_job(c) for c in chunks]
    counts: dict[int, int] = {}
    for part in parts:
        for w, c in part.items():
            counts[w] = counts.get(w, 0) + c
    stats = Stats(paths=0, seconds=time.perf_counter() - start, method=f"brute-force-{interpreter}")
    return WeightDistribution.from_map(counts, n, stats)


def lane_traces(g: WeightedCfg, cost: CostModel = DEFAULT_COST, index=None):
    """Per-input (weight, true-branch mask) from both interpreters, for cross-checking.

    Branch masks use the order of branch points in the CFG, which equals the
    preorder of ``if`` statements in the unrolled source.
    """
    if index is None:
        index = np.arange(1 << g.num_input_bits, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    return _cfg_lanes(g, index), _ast_lanes(g.program, cost, index)


# ---------------------------------------------------------------- path enumeration


def path_enumeration_distribution(
    g: WeightedCfg,
    limit: int = DEFAULT_PATH_LIMIT,
    solver: Solver | None = None,
) -> WeightDistribution:
    """Count inputs per path: one model-counter call for each of the 2^|B| paths."""
    require_unnested(g)
    bs = g.branches
    if (1 << len(bs)) > limit:
        raise BudgetExceeded(f"2^{len(bs)} paths exceed the path-enumeration limit of {limit}")
    start = time.perf_counter()
    solver = solver or default_solver()
    calls0 = solver.stats["model_count"]
    conds = symbolic_conditions(g)
    bits = g.input_bits
    counts: dict[int, int] = {}
    for mask in range(1 << len(bs)):
        taken = [b for j, b in enumerate(bs) if (mask >> j) & 1]
        parts = [conds[b] if b in taken else bv.negate(conds[b]) for b in bs]
        c = solver.model_count(bv.conjoin(parts), bits).count
        if c:
            w = path_weight(g, compose_path(g, taken))
            counts[w] = counts.get(w, 0) + c
    stats = Stats(
        counter_calls=solver.stats["model_count"] - calls0,
        paths=1 << len(bs),
        seconds=time.perf_counter() - start,
        method="path-enumeration",
    )
    return WeightDistribution.from_map(counts, g.num_input_bits, stats)


def semantic_support(f: bv.BoolFunc, bits: Sequence[Bit]) -> frozenset[Bit]:
    """Bits whose two cofactors differ, by full truth-table comparison."""
    bits = list(bits)
    table = f.truth_table(bits)
    out = set()
    idx = np.arange(1 << len(bits))
    for j, b in enumerate(bits):
        lo = idx[(idx >> j) & 1 == 0]
        if (table[lo] != table[lo | (1 << j)]).any():
            out.add(b)
    return frozenset(out)


__all__ = [
    "ExecutionTrace",
    "brute_force_distribution",
    "execute",
    "input_value",
    "lane_traces",
    "path_enumeration_distribution",
    "run_program",
    "semantic_support",
]
