import random

import pytest

from qpa import expr as bv
from qpa.circuit import CnfFormula
from qpa.errors import BudgetExceeded, SupportViolation
from qpa.expr import Bit, BoolFunc
from qpa.solver import Budget, Solver, dimacs_text, export_dimacs, read_dimacs


def bit_of(name, width, i):
    x = bv.inp(name, width)
    one = bv.const(1, width)
    return bv.binop("==", bv.binop("&", bv.binop(">>", x, bv.const(i, width)), one), one)


def truth_count(f: BoolFunc, bits):
    return sum(bool(f(a)) for a in bv.iter_assignments(sorted(bits)))


def random_func(rng, width=4, names="ab", depth=3):
    leaves = [bv.inp(n, width) for n in names]

    def build(d):
        if d == 0 or rng.random() < 0.3:
            return rng.choice(leaves) if rng.random() < 0.8 else bv.const(rng.getrandbits(width), width)
        op = rng.choice(["&", "|", "^", "+", "-", "*", "%", "<<", ">>"])
        return bv.binop(op, build(d - 1), build(d - 1))

    return BoolFunc(bv.binop(rng.choice(["==", "!=", "<"]), build(depth), build(depth)))


# ---------------------------------------------------------------- is_sat


def test_is_sat_examples():
    s = Solver()
    assert s.is_sat(CnfFormula(0, ()))
    assert not s.is_sat(CnfFormula(1, ((1,), (-1,))))
    fig1_branch = BoolFunc(bit_of("e", 2, 0))
    assert s.is_sat(bv.bit_blast(fig1_branch))


def test_is_sat_iff_positive_count():
    rng = random.Random(2)
    s = Solver()
    for _ in range(40):
        f = random_func(rng, width=3)
        cnf = bv.bit_blast(f)
        count = s.model_count(f, f.variable_bits).count
        assert s.is_sat(cnf) == (count > 0)
        assert s.satisfiable(f) == (count > 0)


# ---------------------------------------------------------------- equiv


def test_equiv_examples():
    s = Solver()
    b0 = BoolFunc(bit_of("b", 1, 0))
    not_b0 = BoolFunc(bv.unop("not", bit_of("b", 1, 0)))
    assert s.equiv(b0, b0)
    assert not s.equiv(b0, not_b0)
    f = BoolFunc(bit_of("e", 2, 0))
    lo, hi = bv.cofactor(f, Bit("e", 1), 0), bv.cofactor(f, Bit("e", 1), 1)
    assert s.equiv(lo, hi)
    lo, hi = bv.cofactor(f, Bit("e", 0), 0), bv.cofactor(f, Bit("e", 0), 1)
    assert not s.equiv(lo, hi)


def test_equiv_matches_truth_tables():
    rng = random.Random(4)
    s = Solver()
    for _ in range(60):
        f, g = random_func(rng, 3), random_func(rng, 3)
        bits = sorted(f.variable_bits | g.variable_bits)
        same = all(f(a) == g(a) for a in bv.iter_assignments(bits))
        assert s.equiv(f, g) == same


# ---------------------------------------------------------------- model_count


def test_model_count_examples():
    s = Solver()
    vars3 = [Bit("x", i) for i in range(3)]
    assert s.model_count(BoolFunc(bv.TRUE), vars3).count == 8
    assert s.model_count(BoolFunc(bit_of("b", 1, 0)), [Bit("b", 0)]).count == 1
    b = bv.inp("b", 2)
    either = BoolFunc(bv.binop("!=", b, bv.const(0, 2)))
    assert s.model_count(either, [Bit("b", 0), Bit("b", 1)]).count == 3


def test_model_count_extra_vars_scale_count():
    s = Solver()
    f = BoolFunc(bit_of("e", 2, 0))
    assert s.model_count(f, [Bit("e", 0)]).count == 1
    assert s.model_count(f, [Bit("e", 0), Bit("e", 1)]).count == 2
    assert s.model_count(f, [Bit("e", 0), Bit("z", 0), Bit("z", 1)]).count == 4


def test_model_count_irrelevant_bit_outside_vars_is_fine():
    s = Solver()
    e = bv.inp("e", 2)
    # e[1] is present but cancels out
    f = BoolFunc(bv.binop("==", bv.binop("&", bv.binop("^", e, bv.binop("&", e, bv.const(2, 2))),
                                         bv.const(1, 2)), bv.const(1, 2)))
    assert s.model_count(f, [Bit("e", 0)]).count == 1


def test_model_count_support_violation():
    s = Solver()
    f = BoolFunc(bit_of("e", 2, 1))
    with pytest.raises(SupportViolation):
        s.model_count(f, [Bit("e", 0)])


@pytest.mark.parametrize("seed", range(6))
def test_model_count_matches_brute_force_up_to_14_bits(seed):
    rng = random.Random(seed)
    s = Solver()
    for width in (2, 4, 7):
        f = random_func(rng, width=width, depth=2)
        bits = f.variable_bits
        assert len(bits) <= 14
        assert s.model_count(f, bits).count == truth_count(f, bits)


def test_dpll_path_agrees_with_enumeration():
    rng = random.Random(13)
    enum, dpll = Solver(), Solver(enumerate_limit=0)
    for _ in range(25):
        f = random_func(rng, width=3, depth=2)
        bits = f.variable_bits
        a = enum.model_count(f, bits)
        b = dpll.model_count(f, bits)
        assert a.count == b.count == truth_count(f, bits)
        assert dpll.satisfiable(f) == (a.count > 0)


def test_determinism_under_fixed_seed():
    rng = random.Random(9)
    funcs = [random_func(rng, width=3, depth=2) for _ in range(10)]
    runs = []
    for _ in range(2):
        s = Solver(seed=42, enumerate_limit=0)
        runs.append([(r.count, r.decisions) for r in (s.model_count(f, f.variable_bits) for f in funcs)])
    assert runs[0] == runs[1]


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("QPA_SEED", "17")
    assert Solver().seed == 17


def test_decision_budget_raises_instead_of_guessing():
    rng = random.Random(1)
    s = Solver(budget=Budget(max_decisions=1), enumerate_limit=0)
    with pytest.raises(BudgetExceeded):
        for _ in range(50):
            f = random_func(rng, width=6, depth=3)
            s.model_count(f, f.variable_bits)


def test_call_counters():
    s = Solver()
    f = BoolFunc(bit_of("e", 2, 0))
    s.model_count(f, [Bit("e", 0)])
    s.equiv(f, f)
    s.equiv(f, f)
    assert s.stats["model_count"] == 1
    assert s.stats["equiv"] == 2


# ---------------------------------------------------------------- DIMACS


def test_dimacs_examples():
    assert dimacs_text(CnfFormula(1, ((1,),))) == "p cnf 1 1\n1 0\n"
    assert dimacs_text(CnfFormula(0, ())) == "p cnf 0 0\n"


def test_dimacs_round_trip(tmp_path):
    rng = random.Random(6)
    s = Solver()
    for i in range(20):
        cnf = bv.bit_blast(random_func(rng, width=3, depth=2))
        path = export_dimacs(cnf, tmp_path / f"f{i}.cnf")
        back = read_dimacs(path.read_text())
        assert back.clauses == cnf.clauses
        assert back.num_vars == cnf.num_vars
        assert back.input_vars == cnf.input_vars
        assert s.count_cnf(back).count == s.count_cnf(cnf).count


def test_dimacs_external_solver_cross_check(tmp_path):
    pysat = pytest.importorskip("pysat.solvers")
    rng = random.Random(10)
    s = Solver()
    for i in range(20):
        f = random_func(rng, width=3, depth=2)
        cnf = bv.bit_blast(f)
        path = export_dimacs(cnf, tmp_path / f"g{i}.cnf")
        # count by blocking clauses over the input variables
        clauses = [list(c) for c in read_dimacs(path.read_text()).clauses]
        inputs = [v for _, v in cnf.input_vars]
        n = 0
        with pysat.Minisat22(bootstrap_with=clauses) as ext:
            while ext.solve():
                model = set(ext.get_model())
                n += 1
                ext.add_clause([-v if v in model else v for v in inputs])
                if not inputs:
                    break
        free = len(f.variable_bits) - len(inputs)
        assert n << free == s.model_count(f, f.variable_bits).count
