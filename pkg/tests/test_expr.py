import itertools
import random

import numpy as np
import pytest

from qpa import expr as bv
from qpa.errors import EvaluationError, StructureError
from qpa.expr import Bit, BoolFunc
from qpa.solver import Solver


def e2():
    return bv.inp("e", 2)


def cond_bit0(x):
    return bv.binop("==", bv.binop("&", x, bv.const(1, x.width)), bv.const(1, x.width))


def all_bits(f: BoolFunc):
    return sorted(f.variable_bits)


def models_by_enumeration(f: BoolFunc):
    bits = all_bits(f)
    return [a for a in bv.iter_assignments(bits) if f(a)]


# ---------------------------------------------------------------- eval


def test_eval_branch_condition_on_exponent_bit0():
    assert bv.evaluate(cond_bit0(e2()), {"e": 2}) == 0
    assert bv.evaluate(cond_bit0(e2()), {"e": 3}) == 1


def test_eval_identity_and_wraparound():
    x = bv.inp("x", 8)
    assert bv.evaluate(bv.binop("+", x, bv.const(0, 8)), {"x": 173}) == 173
    assert bv.evaluate(bv.binop("+", bv.const(255, 8), bv.const(1, 8)), {}) == 0
    assert bv.evaluate(bv.binop("+", x, bv.const(1, 8)), {"x": 255}) == 0


def test_eval_unbound_variable_names_it():
    with pytest.raises(EvaluationError, match="'q'"):
        bv.evaluate(bv.inp("q", 4), {})
    with pytest.raises(EvaluationError, match="'t'"):
        bv.evaluate(bv.local("t", 4), {})


def test_shift_by_width_or_more_is_zero():
    x = bv.inp("x", 8)
    for k in (8, 9, 200):
        assert bv.evaluate(bv.binop("<<", x, bv.inp("k", 8)), {"x": 0xFF, "k": k}) == 0
        assert bv.evaluate(bv.binop(">>", x, bv.inp("k", 8)), {"x": 0xFF, "k": k}) == 0


def test_remainder_by_zero_keeps_dividend():
    x, y = bv.inp("x", 8), bv.inp("y", 8)
    assert bv.evaluate(bv.binop("%", x, y), {"x": 77, "y": 0}) == 77
    assert bv.evaluate(bv.binop("%", x, y), {"x": 77, "y": 10}) == 7


def test_width_rules():
    with pytest.raises(StructureError):
        bv.binop("+", bv.inp("a", 4), bv.inp("b", 5))
    assert bv.binop("<", bv.inp("a", 4), bv.inp("b", 4)).width == 1
    with pytest.raises(StructureError):
        bv.const(0, 65)


@pytest.mark.parametrize("width", [1, 3, 8, 16, 32, 64])
def test_modular_ring_axioms(width):
    rng = random.Random(width)
    a, b, c = (bv.inp(n, width) for n in "abc")
    mask = (1 << width) - 1

    def ev(e, env):
        return bv.evaluate(e, env)

    add, mul, sub = (lambda x, y, op=op: bv.binop(op, x, y) for op in "+*-")
    for _ in range(200):
        env = {n: rng.getrandbits(width) for n in "abc"}
        assert ev(add(a, b), env) == ev(add(b, a), env)
        assert ev(mul(a, b), env) == ev(mul(b, a), env)
        assert ev(add(add(a, b), c), env) == ev(add(a, add(b, c)), env)
        assert ev(mul(mul(a, b), c), env) == ev(mul(a, mul(b, c)), env)
        assert ev(mul(a, add(b, c)), env) == ev(add(mul(a, b), mul(a, c)), env)
        assert ev(add(a, sub(b, a)), env) == env["b"]
        assert ev(mul(a, b), env) == (env["a"] * env["b"]) & mask


def test_vector_evaluation_matches_scalar():
    rng = random.Random(5)
    x, y = bv.inp("x", 12), bv.inp("y", 12)
    e = bv.binop(
        "^",
        bv.binop("%", bv.binop("*", x, y), bv.binop("|", y, bv.const(3, 12))),
        bv.binop(">>", bv.binop("-", x, y), bv.binop("&", y, bv.const(15, 12))),
    )
    xs = np.array([rng.getrandbits(12) for _ in range(300)], dtype=np.uint64)
    ys = np.array([rng.getrandbits(12) for _ in range(300)], dtype=np.uint64)
    vec = bv.evaluate_vec(e, {"x": xs, "y": ys})
    for i in range(300):
        assert vec[i] == bv.evaluate(e, {"x": int(xs[i]), "y": int(ys[i])})


def test_hash_consing_and_pickle():
    import pickle

    a = bv.binop("+", bv.inp("x", 8), bv.const(1, 8))
    b = bv.binop("+", bv.inp("x", 8), bv.const(1, 8))
    assert a is b
    assert pickle.loads(pickle.dumps(a)) is a


# ---------------------------------------------------------------- closure


def test_close_over_inputs_follows_shifted_exponent():
    e_in = e2()
    shifted = bv.binop(">>", e_in, bv.const(1, 2))
    cond = cond_bit0(bv.local("e1", 2))
    f = bv.close_over_inputs(cond, {"e1": shifted})
    assert f.inputs == {"e": 2}
    assert f.bits == frozenset({Bit("e", 1)})
    for v in range(4):
        assert f({Bit("e", 0): v & 1, Bit("e", 1): v >> 1}) == bool((v >> 1) & 1)


def test_close_over_inputs_identity_and_errors():
    c = cond_bit0(e2())
    assert bv.close_over_inputs(c).expr is c
    with pytest.raises(StructureError, match="no binding"):
        bv.close_over_inputs(cond_bit0(bv.local("t", 2)), {})
    loop = {"p": bv.local("q", 2), "q": bv.local("p", 2)}
    with pytest.raises(StructureError, match="cyclic"):
        bv.close_over_inputs(cond_bit0(bv.local("p", 2)), loop)


# ---------------------------------------------------------------- cofactors


def test_cofactor_examples():
    b0, b1 = bv.inp("b", 2), None
    x = bv.inp("x", 2)
    bit = lambda i: bv.binop("==", bv.binop("&", bv.binop(">>", x, bv.const(i, 2)), bv.const(1, 2)), bv.const(1, 2))
    conj = BoolFunc(bv.binop("and", bit(0), bit(1)))
    g = bv.cofactor(conj, Bit("x", 0), 1)
    assert Solver().equiv(g, BoolFunc(bit(1)))
    assert Bit("x", 0) not in g.variable_bits
    del b0, b1

    f = BoolFunc(cond_bit0(e2()))
    assert bv.cofactor(f, Bit("z", 0), 1) is f
    assert bv.cofactor(f, Bit("e", 0), 0).constant is False
    assert not any(bv.cofactor(f, Bit("e", 0), 0).truth_table([Bit("e", 1)]))


def random_formula(rng, names_widths, depth=3):
    leaves = [bv.inp(n, w) for n, w in names_widths]
    w = names_widths[0][1]
    leaves = [x for x in leaves if x.width == w]

    def build(d):
        if d == 0 or rng.random() < 0.3:
            return rng.choice(leaves) if rng.random() < 0.8 else bv.const(rng.getrandbits(w), w)
        op = rng.choice(["&", "|", "^", "+", "-", "*", "%", "<<", ">>"])
        return bv.binop(op, build(d - 1), build(d - 1))

    cmp = rng.choice(["==", "!=", "<"])
    return BoolFunc(bv.binop(cmp, build(depth), build(depth)))


def test_cofactor_commutativity_on_truth_tables():
    rng = random.Random(11)
    for _ in range(40):
        f = random_formula(rng, [("a", 5), ("b", 5)])
        bits = sorted(f.variable_bits)
        for x, y in itertools.combinations(rng.sample(bits, 4), 2):
            for vx, vy in itertools.product((0, 1), repeat=2):
                one = bv.cofactor(bv.cofactor(f, x, vx), y, vy)
                two = bv.cofactor(bv.cofactor(f, y, vy), x, vx)
                rest = [b for b in bits if b not in (x, y)]
                assert (one.truth_table(rest) == two.truth_table(rest)).all()


def test_syntactic_bits_cover_semantic_support():
    from qpa.oracle import semantic_support

    rng = random.Random(3)
    for _ in range(40):
        f = random_formula(rng, [("a", 4), ("b", 4)])
        sem = semantic_support(f, sorted(f.variable_bits))
        assert sem <= f.bits <= f.variable_bits


# ---------------------------------------------------------------- bit blasting


def extendable(cnf, assignment) -> bool:
    """Does some assignment to auxiliaries extend ``assignment`` to a model?"""
    from qpa.circuit import CnfFormula
    from qpa.solver import Solver

    units = [(v if assignment.get(bit, 0) else -v,) for bit, v in cnf.input_vars]
    extended = CnfFormula(cnf.num_vars, cnf.clauses + tuple(units), cnf.input_vars, ())
    return Solver().is_sat(extended)


def test_bit_blast_constant_and_single_bit():
    assert bv.bit_blast(BoolFunc(bv.TRUE)).clauses == ()
    b = bv.inp("b", 1)
    cnf = bv.bit_blast(BoolFunc(bv.binop("==", b, bv.const(1, 1))))
    assert cnf.clauses == ((1,),)
    assert cnf.input_vars == ((Bit("b", 0), 1),)


def test_bit_blast_exponent_condition_has_two_extendable_inputs():
    f = BoolFunc(cond_bit0(e2()))
    cnf = bv.bit_blast(f)
    bits = [Bit("e", 0), Bit("e", 1)]
    n = sum(extendable(cnf, a) for a in bv.iter_assignments(bits))
    assert n == 2


def test_bit_blast_models_match_evaluation_exhaustively():
    rng = random.Random(21)
    for _ in range(12):
        f = random_formula(rng, [("a", 3), ("b", 3)], depth=2)
        cnf = bv.bit_blast(f)
        mapped = {bit for bit, _ in cnf.input_vars}
        for a in bv.iter_assignments(sorted(f.variable_bits)):
            if mapped or f.constant is not None:
                assert extendable(cnf, a) == f(a)


def test_bit_blast_auxiliaries_are_definitional():
    from qpa.solver import Solver

    rng = random.Random(8)
    s = Solver()
    for _ in range(10):
        f = random_formula(rng, [("a", 4), ("b", 4)], depth=2)
        cnf = bv.bit_blast(f)
        # total models of the CNF equal satisfying input assignments
        inputs = {bit for bit, _ in cnf.input_vars}
        expected = len(models_by_enumeration(f)) >> (len(f.variable_bits) - len(inputs))
        assert s.count_cnf(cnf).count == expected
