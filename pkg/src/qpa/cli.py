"""Command-line front end.

Exit codes: 0 success, 1 unreadable or invalid program, 2 FAILURE (nested or
otherwise unsupported structure, or dependent branches without
``--dependent``), 3 resource budget exceeded, 4 oracle mismatch.

Results go to stdout and are byte-stable for fixed input and flags; timings
and counter statistics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import analysis as A
from . import oracle as O
from .errors import BudgetExceeded, ParseError, StructureError, UnsupportedStructure
from .program import CostModel, build_cfg, parse, unroll
from .program.cfg import DEFAULT_COST
from .solver import Budget, Solver
from .sums import sumset_size

EXIT_OK, EXIT_PARSE, EXIT_FAILURE, EXIT_BUDGET, EXIT_MISMATCH = 0, 1, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _cost(args) -> CostModel:
    if not args.cost_table:
        return DEFAULT_COST
    try:
        table = json.loads(Path(args.cost_table).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _Exit(EXIT_PARSE, f"cannot read cost table: {exc}")
    return CostModel.from_table(table)


def _load(args):
    try:
        text = Path(args.file).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Exit(EXIT_PARSE, f"cannot read {args.file}: {exc}")
    cost = _cost(args)
    try:
        prog = unroll(parse(text))
        return build_cfg(prog, cost), cost
    except ParseError as exc:
        raise _Exit(EXIT_PARSE, f"{args.file}:{exc}")
    except UnsupportedStructure as exc:
        raise _Exit(EXIT_FAILURE, str(exc))
    except StructureError as exc:
        raise _Exit(EXIT_PARSE, f"{args.file}: {exc}")


def _solver(args) -> Solver:
    budget = Budget(args.max_decisions, args.timeout)
    return Solver(budget=budget) if args.seed is None else Solver(budget=budget, seed=args.seed)


def _check(result):
    if isinstance(result, A.Failure):
        witness = ", ".join(map(str, result.witness))
        raise _Exit(EXIT_FAILURE, f"{result}" + (f" [witness: {witness}]" if witness else ""))
    return result


def _note(args, text: str) -> None:
    if not args.quiet:
        print(text, file=sys.stderr)


def _fmt_bits(bits) -> str:
    return "{" + ", ".join(str(b) for b in sorted(bits)) + "}"


# ---------------------------------------------------------------- commands


def cmd_supports(args) -> int:
    g, _ = _load(args)
    solver = _solver(args)
    prof = _check(A.find_condition_supports(g, solver, args.jobs))
    ind = A.check_independence(prof)
    out = [f"input bits: {g.num_input_bits}", f"branches: {len(prof.branches)}"]
    for info in prof.branches:
        line = g.blocks[info.id].line
        out.append(f"  branch {info.id} (line {line}): support {_fmt_bits(info.support)}")
    out.append(f"residual bits: {len(prof.residual)}")
    if ind.pairwise:
        out.append("independence: pairwise independent")
    else:
        groups = "; ".join("{" + ", ".join(map(str, grp)) + "}" for grp in ind.dependent)
        out.append(f"independence: dependent groups {groups}")
    trivial = ", ".join(map(str, prof.trivial)) or "none"
    out.append(f"trivial branches: {trivial}")
    print("\n".join(out))
    return EXIT_OK


def cmd_dist(args) -> int:
    g, cost = _load(args)
    solver = _solver(args)
    start = time.perf_counter()
    d = _check(
        A.find_weight_distribution(
            g, solver=solver, max_paths=args.max_paths, dependent=args.dependent,
            max_dependent_group=args.max_dependent_group, jobs=args.jobs,
        )
    )
    elapsed = time.perf_counter() - start
    _note(args, f"counter calls: {d.stats.counter_calls}  paths: {d.stats.paths}  "
                f"time: {elapsed:.3f}s")
    if args.format == "json":
        sys.stdout.write(A.to_json(d))
        sys.stdout.write("\n")
    elif args.format == "csv":
        sys.stdout.write(A.to_csv(d))
    if args.hist_bin:
        sys.stdout.write(A.histogram(d, args.hist_bin))
    if args.oracle:
        ref = O.brute_force_distribution(g, limit=args.oracle_limit, cost=cost, jobs=args.jobs)
        if ref != d:
            print("MISMATCH", file=sys.stderr)
            return EXIT_MISMATCH
        print("MATCH", file=sys.stderr)
    return EXIT_OK


def _values(args):
    g, cost = _load(args)
    solver = _solver(args)
    v = _check(
        A.find_possible_weights(
            g, solver=solver, dependent=args.dependent, max_paths=args.max_paths,
            max_dependent_group=args.max_dependent_group, jobs=args.jobs,
        )
    )
    mismatch = False
    if args.oracle:
        ref = O.brute_force_distribution(g, limit=args.oracle_limit, cost=cost, jobs=args.jobs)
        mismatch = ref.keys() != v.values
        print("MISMATCH" if mismatch else "MATCH", file=sys.stderr)
    return g, v, mismatch


def cmd_values(args) -> int:
    _, v, mismatch = _values(args)
    print("\n".join(map(str, v.values)))
    return EXIT_MISMATCH if mismatch else EXIT_OK


def cmd_capacity(args) -> int:
    if args.size_only:
        g, _ = _load(args)
        solver = _solver(args)
        prof = _check(A.find_condition_supports(g, solver, args.jobs))
        ind = A.check_independence(prof)
        if not ind.pairwise:
            raise _Exit(EXIT_FAILURE, "--size-only needs pairwise independent branches")
        g2, p2 = A.eliminate_trivial(g, prof, solver)
        p0, pb = A.special_paths(g2)
        w0 = A.path_weight(g2, p0)
        n = sumset_size([A.path_weight(g2, pb[b]) - w0 for b in p2.ids])
        print(f"values: {n}")
        print(f"capacity: {A.capacity_from_size(n):.4f} bits")
        return EXIT_OK
    _, v, mismatch = _values(args)
    print(f"values: {len(v)}")
    print(f"capacity: {A.channel_capacity(v):.4f} bits")
    return EXIT_MISMATCH if mismatch else EXIT_OK


def cmd_oracle(args) -> int:
    g, cost = _load(args)
    bf = O.brute_force_distribution(g, limit=args.oracle_limit, cost=cost, jobs=args.jobs)
    ast = O.brute_force_distribution(g, limit=args.oracle_limit, cost=cost,
                                     interpreter="ast", jobs=args.jobs)
    print(f"inputs: {bf.total}")
    print(f"distinct weights: {len(bf)}")
    print(f"entropy: {A.shannon_entropy(bf):.4f} bits")
    print(f"capacity: {A.capacity_from_size(len(bf)):.4f} bits")
    if args.format == "csv":
        sys.stdout.write(A.to_csv(bf))
    if bf != ast:
        print("MISMATCH (CFG and AST interpreters disagree)", file=sys.stderr)
        return EXIT_MISMATCH
    if args.paths:
        try:
            pe = O.path_enumeration_distribution(g, limit=args.max_paths, solver=_solver(args))
        except UnsupportedStructure as exc:
            raise _Exit(EXIT_FAILURE, str(exc))
        _note(args, f"path enumeration counter calls: {pe.stats.counter_calls}")
        if pe != bf:
            print("MISMATCH (path enumeration)", file=sys.stderr)
            return EXIT_MISMATCH
    print("MATCH", file=sys.stderr)
    return EXIT_OK


def cmd_cfg(args) -> int:
    g, _ = _load(args)
    print(g.to_json())
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qpa",
        description="Exact timing distributions and channel capacity of loop-free programs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="program source (.qp)")
    common.add_argument("--cost-table", metavar="JSON",
                        help='per-operation costs, e.g. {"statement": 1, "*": 3}')
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--max-paths", type=int, default=A.DEFAULT_MAX_PATHS,
                        help="largest 2^|B| to enumerate (default 2^24)")
    common.add_argument("--max-dependent-group", type=int, default=A.DEFAULT_MAX_GROUP,
                        help="largest dependent branch group (default 16)")
    common.add_argument("--dependent", action="store_true",
                        help="handle branches with shared support by joint enumeration")
    common.add_argument("--max-decisions", type=int, default=None, help="solver decision budget")
    common.add_argument("--timeout", type=float, default=None, help="solver time budget per query (s)")
    common.add_argument("--seed", type=int, default=None, help="solver tie-break seed (or QPA_SEED)")
    common.add_argument("--oracle", action="store_true", help="cross-check against brute force")
    common.add_argument("--oracle-limit", type=int, default=O.DEFAULT_INPUT_LIMIT,
                        help="largest |I| for brute force (default 20)")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress statistics on stderr")

    p = sub.add_parser("supports", parents=[common], help="branch supports and independence")
    p.set_defaults(func=cmd_supports)

    p = sub.add_parser("dist", parents=[common], help="exact weight distribution")
    p.add_argument("--format", choices=("csv", "json", "none"), default="csv")
    p.add_argument("--hist-bin", type=int, default=0, metavar="N",
                   help="also print a text histogram with bins of width N")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("values", parents=[common], help="achievable total weights")
    p.set_defaults(func=cmd_values)

    p = sub.add_parser("capacity", parents=[common], help="channel capacity in bits")
    p.add_argument("--size-only", action="store_true",
                   help="count values via the absolute-value transform without listing them")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("oracle", parents=[common], help="brute-force baselines")
    p.add_argument("--format", choices=("csv", "none"), default="none")
    p.add_argument("--paths", action="store_true",
                   help="also run path enumeration with one counter call per path")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("cfg", parents=[common], help="dump the weighted CFG as JSON")
    p.set_defaults(func=cmd_cfg)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
