"""Exact timing distribution and value-set analysis over weighted CFGs.

Pipeline: close each branch condition over the input bits, find its exact
support by cofactor comparison, group branches whose supports overlap, and
count models once per branch.  For pairwise-independent branches the
probability of a path factorises over branches, so the full distribution
follows from |B| counter calls and a walk over all 2^|B| paths.  The set of
achievable weights is cheaper still: it is the base-path weight plus every
submultiset sum of the per-branch weight deltas.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from . import kernels
from . import expr as bv
from .errors import BudgetExceeded, StructureError, UnsupportedStructure
from .expr import Bit, BoolFunc
from .program.cfg import (
    Block,
    Edge,
    WeightedCfg,
    check_unnested,
    path_weight,
    special_paths,
    symbolic_conditions,
)
from .solver import Solver, default_solver
from .sums import submultiset_sums

DEFAULT_MAX_PATHS = 1 << 24
DEFAULT_MAX_GROUP = 16


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class Failure:
    """Structured refusal: the program is outside the class the method handles.

    ``reason`` is one of ``nested``, ``unsupported`` or ``dependent``;
    ``witness`` names the offending branch points (and bit, if any).
    """

    reason: str
    message: str
    witness: tuple = ()

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"FAILURE ({self.reason}): {self.message}"


@dataclass(frozen=True)
class BranchInfo:
    id: int
    condition: BoolFunc
    support: frozenset[Bit]
    true_count: int | None = None
    candidates: int = 0

    @property
    def false_count(self) -> int | None:
        if self.true_count is None:
            return None
        return (1 << len(self.support)) - self.true_count

    @property
    def trivial(self) -> bool:
        return not self.support


@dataclass(frozen=True)
class Independence:
    """Maximal groups of branches connected by shared support bits."""

    groups: tuple[tuple[int, ...], ...]

    @property
    def pairwise(self) -> bool:
        return all(len(g) == 1 for g in self.groups)

    @property
    def dependent(self) -> tuple[tuple[int, ...], ...]:
        return tuple(g for g in self.groups if len(g) > 1)

    def __bool__(self) -> bool:
        return self.pairwise


@dataclass(frozen=True)
class BranchProfile:
    input_bits: tuple[Bit, ...]
    branches: tuple[BranchInfo, ...]

    def __getitem__(self, b: int) -> BranchInfo:
        for info in self.branches:
            if info.id == b:
                return info
        raise KeyError(b)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(i.id for i in self.branches)

    @property
    def supports(self) -> dict[int, frozenset[Bit]]:
        return {i.id: i.support for i in self.branches}

    @property
    def true_counts(self) -> dict[int, int | None]:
        return {i.id: i.true_count for i in self.branches}

    @property
    def residual(self) -> frozenset[Bit]:
        used = set()
        for i in self.branches:
            used |= i.support
        return frozenset(self.input_bits) - used

    @property
    def trivial(self) -> tuple[int, ...]:
        return tuple(i.id for i in self.branches if i.trivial)

    @property
    def independence(self) -> Independence:
        return check_independence(self)


@dataclass
class Stats:
    counter_calls: int = 0
    equivalence_checks: int = 0
    sat_checks: int = 0
    paths: int = 0
    merge_steps: int = 0
    seconds: float = 0.0
    method: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class WeightDistribution:
    """Exact map weight -> number of inputs, over 2^num_bits equally likely inputs."""

    counts: tuple[tuple[int, int], ...]
    num_bits: int
    stats: Stats = field(default_factory=Stats, compare=False)

    @classmethod
    def from_map(cls, counts: Mapping[int, int], num_bits: int, stats: Stats | None = None):
        items = tuple(sorted((int(w), int(c)) for w, c in counts.items() if c))
        d = cls(items, num_bits, stats or Stats())
        if d.total_count != d.total:
            raise StructureError(f"counts sum to {d.total_count}, expected 2^{num_bits}")
        return d

    @property
    def total(self) -> int:
        return 1 << self.num_bits

    @property
    def total_count(self) -> int:
        return sum(c for _, c in self.counts)

    def as_dict(self) -> dict[int, int]:
        return dict(self.counts)

    def keys(self) -> tuple[int, ...]:
        return tuple(w for w, _ in self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightDistribution):
            return NotImplemented
        return self.counts == other.counts and self.num_bits == other.num_bits

    def __hash__(self) -> int:
        return hash((self.counts, self.num_bits))

    def probability(self, weight: int) -> str:
        return exact_probability(self.as_dict().get(weight, 0), self.num_bits)

    def values(self) -> "ValueSet":
        return ValueSet(self.keys(), "exact")


@dataclass(frozen=True)
class ValueSet:
    """Sorted distinct achievable total weights."""

    values: tuple[int, ...]
    provenance: str = "exact"  # or 'includes-infeasible-upper-bound'
    stats: Stats = field(default_factory=Stats, compare=False)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __eq__(self, other) -> bool:
        if isinstance(other, ValueSet):
            return self.values == other.values
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.values)


# ---------------------------------------------------------------- supports


def _support_of(args) -> tuple[frozenset[Bit], int]:
    f, solver = args
    candidates = sorted(f.variable_bits)
    keep = set()
    for bit in candidates:
        if not solver.equiv(bv.cofactor(f, bit, 0), bv.cofactor(f, bit, 1)):
            keep.add(bit)
    return frozenset(keep), len(candidates)


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def find_condition_supports(
    g: WeightedCfg, solver: Solver | None = None, jobs: int = 1
) -> BranchProfile | Failure:
    """Exact support of every branch condition, or FAILURE for unsupported shapes.

    Candidates are the input bits occurring in the closed condition; a
    candidate is kept iff its two cofactors are inequivalent.
    """
    solver = solver or default_solver()
    nest = check_unnested(g)
    if not nest:
        outer, inner = nest.witness
        return Failure("nested", f"there are nested conditionals: branch {inner} inside branch {outer}",
                       nest.witness)
    try:
        conds = symbolic_conditions(g)
    except UnsupportedStructure as exc:
        return Failure("unsupported", str(exc), tuple(exc.witness or ()))
    ids = list(conds)
    found = _map(_support_of, [(conds[b], solver) for b in ids], jobs)
    infos = tuple(BranchInfo(b, conds[b], sup, None, cand) for b, (sup, cand) in zip(ids, found))
    return BranchProfile(g.input_bits, infos)


def check_independence(p: BranchProfile) -> Independence:
    """Partition branches into maximal groups linked by common support bits."""
    parent = {b: b for b in p.ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: dict[Bit, int] = {}
    for info in p.branches:
        for bit in sorted(info.support):
            if bit in owner:
                a, b = find(owner[bit]), find(info.id)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                owner[bit] = info.id
    groups: dict[int, list[int]] = {}
    for b in p.ids:
        groups.setdefault(find(b), []).append(b)
    return Independence(tuple(tuple(sorted(v)) for _, v in sorted(groups.items())))


def _dependence_failure(p: BranchProfile, ind: Independence) -> Failure:
    group = ind.dependent[0]
    a, b = group[0], group[1]
    for x, y in itertools.combinations(group, 2):
        shared = p[x].support & p[y].support
        if shared:
            a, b = x, y
            break
    bit = sorted(p[a].support & p[b].support)
    what = f" on {bit[0]}" if bit else ""
    return Failure(
        "dependent",
        f"branches {a} and {b} are not independent (shared support{what}); "
        "enable dependent-group handling",
        (a, b),
    )


# ---------------------------------------------------------------- counting


def _count_of(args) -> int:
    f, support, solver = args
    return solver.model_count(f, support).count


def true_counts(p: BranchProfile, solver: Solver | None = None, jobs: int = 1) -> BranchProfile:
    """Fill T_b for every branch with one model-counter call each."""
    solver = solver or default_solver()
    todo = [(i.condition, i.support, solver) for i in p.branches]
    if jobs <= 1:
        counts = [_count_of(t) for t in todo]
    else:
        counts = _map(_count_of, todo, jobs)
        solver.stats["model_count"] += len(todo)
    infos = tuple(replace(i, true_count=c) for i, c in zip(p.branches, counts))
    return replace(p, branches=infos)


def path_probability(p: BranchProfile, taken: Iterable[int]) -> int:
    """Numerator of the probability of the path with true-set ``taken``, over 2^|I|.

    2^|R| * prod_{b in S} T_b * prod_{b not in S} (2^|S_b| - T_b).
    """
    taken = set(taken)
    num = 1 << len(p.residual)
    for info in p.branches:
        if info.true_count is None:
            raise StructureError("true counts have not been computed")
        num *= info.true_count if info.id in taken else info.false_count
    return num


def _basis(g: WeightedCfg) -> tuple[int, dict[int, int]]:
    p0, pb = special_paths(g)
    w0 = path_weight(g, p0)
    return w0, {b: path_weight(g, q) - w0 for b, q in pb.items()}


def _gray_job(args) -> tuple[dict[int, int], int]:
    return kernels.gray_accumulate(*args)


def _merge(parts: Iterable[Mapping[int, int]]) -> dict[int, int]:
    out: dict[int, int] = {}
    for part in parts:
        for w, c in part.items():
            out[w] = out.get(w, 0) + c
    return out


def _enumerate_paths(deltas, tcounts, fcounts, base, mult, jobs: int) -> tuple[dict[int, int], int]:
    """All 2^n subsets in Gray-code order, split over ``jobs`` workers by a fixed prefix."""
    n = len(deltas)
    k = min(max(jobs, 1).bit_length() - 1, n)
    if k == 0:
        return kernels.gray_accumulate(deltas, tcounts, fcounts, base, mult)
    hi = n - k
    jobs_args = []
    for prefix in range(1 << k):
        b, m = base, mult
        for j in range(k):
            idx = hi + j
            if (prefix >> j) & 1:
                b += deltas[idx]
                m *= tcounts[idx]
            else:
                m *= fcounts[idx]
        jobs_args.append((deltas[:hi], tcounts[:hi], fcounts[:hi], b, m))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_gray_job, jobs_args))
    return _merge(r for r, _ in results), sum(p for _, p in results)


def find_weight_distribution(
    g: WeightedCfg,
    profile: BranchProfile | None = None,
    *,
    solver: Solver | None = None,
    max_paths: int = DEFAULT_MAX_PATHS,
    dependent: bool = False,
    max_dependent_group: int = DEFAULT_MAX_GROUP,
    jobs: int = 1,
) -> WeightDistribution | Failure:
    """Exact distribution of total path weight over uniformly random inputs.

    Queries the model counter exactly once per branch, then walks all 2^|B|
    paths, accumulating each path's input count under its weight.
    """
    start = time.perf_counter()
    solver = solver or default_solver()
    calls0 = solver.stats["model_count"]
    if profile is None:
        profile = find_condition_supports(g, solver, jobs)
        if isinstance(profile, Failure):
            return profile
    ind = check_independence(profile)
    if not ind.pairwise:
        if not dependent:
            return _dependence_failure(profile, ind)
        return analyze_dependent_groups(
            g, profile, "distribution", solver=solver, max_paths=max_paths,
            max_group=max_dependent_group, jobs=jobs,
        )
    if len(profile.branches) >= 64 or (1 << len(profile.branches)) > max_paths:
        raise BudgetExceeded(
            f"2^{len(profile.branches)} paths exceed the path budget of {max_paths}"
        )
    if any(i.true_count is None for i in profile.branches):
        profile = true_counts(profile, solver, jobs)
    w0, delta = _basis(g)
    ids = profile.ids
    counts, paths = _enumerate_paths(
        [delta[b] for b in ids],
        [profile[b].true_count for b in ids],
        [profile[b].false_count for b in ids],
        w0,
        1 << len(profile.residual),
        jobs,
    )
    stats = Stats(
        counter_calls=solver.stats["model_count"] - calls0,
        paths=paths,
        seconds=time.perf_counter() - start,
        method="independent",
    )
    return WeightDistribution.from_map(counts, g.num_input_bits, stats)


# ---------------------------------------------------------------- trivial branches


def eliminate_trivial(
    g: WeightedCfg, p: BranchProfile, solver: Solver | None = None
) -> tuple[WeightedCfg, BranchProfile]:
    """Resolve every branch with empty support to the edge it always takes.

    The branch block stays (its condition is still evaluated) but becomes an
    ordinary block; blocks reachable only through the dead edge are dropped
    and ids are renumbered in order, which keeps them topological.
    """
    g2, p2, _ = _eliminate(g, p, solver or default_solver())
    return g2, p2


def _eliminate(g: WeightedCfg, p: BranchProfile, solver: Solver):
    forced: dict[int, str] = {}
    for info in p.branches:
        if info.trivial:
            solver.stats["trivial_sat"] += 1
            forced[info.id] = "true" if solver.satisfiable(info.condition) else "false"
    if not forced:
        return g, p, {b: b for b in p.ids}
    keep_edges = [
        e for e in g.edges if e.src not in forced or e.label == forced[e.src]
    ]
    live = {g.source}
    for e in keep_edges:  # edges are sorted by source, a topological order
        if e.src in live:
            live.add(e.dst)
    order = [b.id for b in g.blocks if b.id in live]
    remap = {old: new for new, old in enumerate(order)}
    blocks = []
    for old in order:
        b = g.blocks[old]
        if old in forced:
            b = Block(b.id, "code", b.stmts, b.weight, None, b.line)
        blocks.append(replace(b, id=remap[old]))
    rank = {"false": 0, "true": 1, None: 2}
    links = sorted(
        ((remap[e.src], remap[e.dst], None if e.src in forced else e.label)
         for e in keep_edges if e.src in live),
        key=lambda t: (t[0], rank[t[2]], t[1]),
    )
    edges = tuple(Edge(i, s, d, lab) for i, (s, d, lab) in enumerate(links))
    g2 = WeightedCfg(tuple(blocks), edges, g.inputs, g.locals, g.program)
    g2.validate()
    infos = tuple(
        replace(i, id=remap[i.id]) for i in p.branches if i.id not in forced and i.id in live
    )
    ids = {i.id: remap[i.id] for i in p.branches if i.id not in forced and i.id in live}
    return g2, replace(p, branches=infos), ids


# ---------------------------------------------------------------- values


def find_possible_weights(
    g: WeightedCfg,
    profile: BranchProfile | None = None,
    *,
    solver: Solver | None = None,
    dependent: bool = False,
    max_paths: int = DEFAULT_MAX_PATHS,
    max_dependent_group: int = DEFAULT_MAX_GROUP,
    jobs: int = 1,
) -> ValueSet | Failure:
    """Every achievable total weight, without counting or enumerating paths.

    After trivial branches are eliminated every path is feasible, so the
    values are w(P0) plus the submultiset sums of D = {w(P_b) - w(P0)}.
    """
    start = time.perf_counter()
    solver = solver or default_solver()
    if profile is None:
        profile = find_condition_supports(g, solver, jobs)
        if isinstance(profile, Failure):
            return profile
    ind = check_independence(profile)
    if not ind.pairwise:
        if not dependent:
            return _dependence_failure(profile, ind)
        return analyze_dependent_groups(
            g, profile, "values", solver=solver, max_paths=max_paths,
            max_group=max_dependent_group, jobs=jobs,
        )
    g2, p2 = eliminate_trivial(g, profile, solver)
    w0, delta = _basis(g2)
    sums = submultiset_sums([delta[b] for b in p2.ids])
    stats = Stats(merge_steps=sums.steps, seconds=time.perf_counter() - start, method="submultiset-sums")
    return ValueSet(sums.shifted(w0), "exact", stats)


# ---------------------------------------------------------------- dependent groups


def _group_options(p: BranchProfile, group, delta, problem: str, solver: Solver):
    """Feasible joint polarity assignments of one group as (delta sum, count) pairs."""
    union = frozenset().union(*(p[b].support for b in group))
    out = []
    for bits in itertools.product((0, 1), repeat=len(group)):
        parts = [p[b].condition if v else bv.negate(p[b].condition) for b, v in zip(group, bits)]
        conj = bv.conjoin(parts)
        d = sum(delta[b] for b, v in zip(group, bits) if v)
        if problem == "values":
            if solver.satisfiable(conj):
                out.append((d, 1))
        else:
            c = solver.model_count(conj, union).count
            if c:
                out.append((d, c))
    return out, len(union)


def analyze_dependent_groups(
    g: WeightedCfg,
    p: BranchProfile,
    problem: str = "distribution",
    *,
    solver: Solver | None = None,
    max_paths: int = DEFAULT_MAX_PATHS,
    max_group: int = DEFAULT_MAX_GROUP,
    jobs: int = 1,
) -> WeightDistribution | ValueSet:
    """Handle branches that share support bits by enumerating each group jointly.

    Each dependent group is treated as one super-branch with 2^|G| polarity
    assignments.  For values, the feasible ones are kept; for the
    distribution, each gets the joint model count over the union of the
    group's supports.  Singleton groups go through the ordinary
    per-branch path.
    """
    if problem not in ("distribution", "values"):
        raise ValueError(f"unknown problem {problem!r}")
    start = time.perf_counter()
    solver = solver or default_solver()
    calls0 = solver.stats["model_count"]
    ind = check_independence(p)
    for grp in ind.dependent:
        if len(grp) > max_group:
            raise BudgetExceeded(
                f"dependent group of {len(grp)} branches exceeds the limit of {max_group}"
            )
    space = 1
    for grp in ind.groups:
        space <<= len(grp)
    if space > max_paths and problem == "distribution":
        raise BudgetExceeded(f"{space} joint assignments exceed the path budget of {max_paths}")

    if problem == "values":
        # trivial branches never share support, so the groups survive elimination
        g2, p2, _ = _eliminate(g, p, solver)
        ind2 = check_independence(p2)
        w0, delta = _basis(g2)
        base = submultiset_sums([delta[grp[0]] for grp in ind2.groups if len(grp) == 1])
        values = set(base.shifted(w0))
        for grp in ind2.dependent:
            opts, _ = _group_options(p2, grp, delta, problem, solver)
            values = {v + d for v in values for d, _ in opts}
        stats = Stats(merge_steps=base.steps, seconds=time.perf_counter() - start,
                      method="dependent-groups")
        return ValueSet(tuple(sorted(values)), "exact", stats)

    singles = [grp[0] for grp in ind.groups if len(grp) == 1]
    w0, delta = _basis(g)
    single_profile = replace(p, branches=tuple(p[b] for b in singles))
    single_profile = true_counts(single_profile, solver)
    options = [_group_options(p, grp, delta, problem, solver)[0] for grp in ind.dependent]
    residual = len(p.residual)
    parts = []
    paths = 0
    for combo in itertools.product(*options):
        d = sum(x for x, _ in combo)
        m = 1 << residual
        for _, c in combo:
            m *= c
        part, n = _enumerate_paths(
            [delta[b] for b in singles],
            [single_profile[b].true_count for b in singles],
            [single_profile[b].false_count for b in singles],
            w0 + d,
            m,
            jobs,
        )
        parts.append(part)
        paths += n
    stats = Stats(
        counter_calls=solver.stats["model_count"] - calls0,
        paths=paths,
        seconds=time.perf_counter() - start,
        method="dependent-groups",
    )
    return WeightDistribution.from_map(_merge(parts), g.num_input_bits, stats)


# ---------------------------------------------------------------- metrics


def channel_capacity(v: ValueSet | Iterable[int]) -> float:
    """log2 of the number of distinct observable values (bits)."""
    n = len(v) if isinstance(v, ValueSet) else len(set(v))
    if n == 0:
        raise StructureError("channel capacity of an empty value set")
    return math.log2(n)


def capacity_from_size(n: int) -> float:
    if n <= 0:
        raise StructureError("channel capacity of an empty value set")
    return math.log2(n)


def shannon_entropy(d: WeightDistribution) -> float:
    """-sum p log2 p over the weight classes."""
    n = d.num_bits
    h = 0.0
    for _, c in d.counts:
        h -= (c / d.total) * (math.log2(c) - n)
    return max(h, 0.0)


# ---------------------------------------------------------------- export


def exact_probability(count: int, num_bits: int) -> str:
    """``count / 2^num_bits`` reduced to ``num/2^k`` with odd ``num`` (or 0/1)."""
    if count == 0:
        return "0/1"
    tz = (count & -count).bit_length() - 1
    shift = min(tz, num_bits)
    return f"{count >> shift}/2^{num_bits - shift}"


def _decimal(count: int, num_bits: int) -> str:
    return f"{count / (1 << num_bits):.12g}"


def to_csv(d: WeightDistribution) -> str:
    lines = ["weight,count,probability,probability_decimal"]
    for w, c in d.counts:
        lines.append(f"{w},{c},{exact_probability(c, d.num_bits)},{_decimal(c, d.num_bits)}")
    return "\n".join(lines) + "\n"


def to_json(d: WeightDistribution, extra: Mapping | None = None) -> str:
    doc = {
        "input_bits": d.num_bits,
        "total": str(d.total),
        "rows": [
            {
                "weight": w,
                "count": str(c),
                "probability": exact_probability(c, d.num_bits),
                "probability_decimal": float(_decimal(c, d.num_bits)),
            }
            for w, c in d.counts
        ],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2)


def histogram(d: WeightDistribution, bin_width: int = 1, width: int = 50) -> str:
    """Text histogram: one row per bin of total weight, bar length proportional to count."""
    if bin_width < 1:
        raise ValueError("bin width must be positive")
    bins: dict[int, int] = {}
    for w, c in d.counts:
        lo = (w // bin_width) * bin_width
        bins[lo] = bins.get(lo, 0) + c
    if not bins:
        return ""
    peak = max(bins.values())
    label = max(len(f"{lo}") for lo in bins) + (len(f"{bin_width}") + 3 if bin_width > 1 else 0)
    rows = []
    for lo in range(min(bins), max(bins) + 1, bin_width):
        c = bins.get(lo, 0)
        key = f"{lo}" if bin_width == 1 else f"{lo}..{lo + bin_width - 1}"
        bar = "#" * max(1, round(width * c / peak)) + " " if c else ""
        rows.append(f"{key:>{label}} | {bar}{c}")
    return "\n".join(rows) + "\n"
