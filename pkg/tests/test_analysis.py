import json
import math
from math import comb

import pytest

from conftest import program_text
from qpa import analysis as A
from qpa.errors import BudgetExceeded, StructureError
from qpa.expr import Bit
from qpa.oracle import brute_force_distribution
from qpa.program import load
from qpa.solver import Solver

BINOMIAL8 = tuple((28 + 5 * k, comb(8, k)) for k in range(9))


def test_fig1_supports(fig1):
    p = A.find_condition_supports(fig1, Solver())
    assert p.supports == {1: frozenset({Bit("e", 0)}), 4: frozenset({Bit("e", 1)})}
    assert p.independence.pairwise
    assert p.residual == frozenset()
    assert p.trivial == ()
    assert p[1].candidates == 2


def test_fig1_distribution_and_values(fig1):
    d = A.find_weight_distribution(fig1, solver=Solver())
    assert d.counts == ((10, 1), (11, 2), (12, 1))
    assert d.probability(11) == "1/2^1"
    assert A.find_possible_weights(fig1, solver=Solver()).values == (10, 11, 12)


def test_true_counts_single_support_bit(modexp8):
    p = A.true_counts(A.find_condition_supports(modexp8, Solver()), Solver())
    assert all(i.true_count == 1 and i.false_count == 1 for i in p.branches)
    assert A.path_probability(p, ()) == 1
    assert A.path_probability(p, p.ids[:3]) == 1


def test_modexp8_binomial(modexp8):
    s = Solver()
    d = A.find_weight_distribution(modexp8, solver=s)
    assert d.counts == BINOMIAL8
    assert d.stats.counter_calls == 8
    assert d.stats.paths == 256
    v = A.find_possible_weights(modexp8, solver=Solver())
    assert len(v) == 9
    assert abs(A.channel_capacity(v) - 3.1699250014423126) < 1e-9
    assert abs(A.shannon_entropy(d) - 2.544197507453808) < 1e-9


def test_counter_calls_equal_branch_count_with_residual_bits():
    g = load("input a: u8\nvar r: u8\nif (a & 1) == 1 { weight 2 }\nif (a & 6) == 6 { weight 3 }")
    s = Solver()
    d = A.find_weight_distribution(g, solver=s)
    assert d.stats.counter_calls == 2
    assert d == brute_force_distribution(g)
    assert len(A.find_condition_supports(g, Solver()).residual) == 5


def test_irrelevant_bit_is_not_in_support():
    # a[1] is mentioned but xor-ed away
    g = load("input a: u4\nif ((a ^ (a & 2)) & 3) == 1 { weight 4 }")
    p = A.find_condition_supports(g, Solver())
    assert p.supports[p.ids[0]] == frozenset({Bit("a", 0)})
    assert p.branches[0].candidates == 4


def test_trivial_elimination():
    g = load(program_text("trivial.qp"))
    p = A.find_condition_supports(g, Solver())
    assert p.trivial == (0, 2)
    g2, p2 = A.eliminate_trivial(g, p, Solver())
    g2.validate()
    assert len(g2.branches) == 1 and p2.ids == g2.branches
    assert A.find_possible_weights(g, solver=Solver()).values == (8, 10)
    d = A.find_weight_distribution(g, solver=Solver())
    assert d == brute_force_distribution(g)
    assert d.counts == ((8, 12), (10, 4))


def test_nested_failure():
    g = load(program_text("nested.qp"))
    for fn in (A.find_weight_distribution, A.find_possible_weights):
        r = fn(g, solver=Solver())
        assert isinstance(r, A.Failure) and not r
        assert r.reason == "nested" and r.witness == (0, 1)
        assert str(r).startswith("FAILURE (nested)")


def test_merge_dependent_failure():
    r = A.find_condition_supports(load(program_text("merge_dependent.qp")), Solver())
    assert isinstance(r, A.Failure)
    assert r.reason == "unsupported"
    assert r.witness == (2, "t")


def test_dependent_pair_needs_flag():
    g = load(program_text("mt_pair.qp"))
    p = A.find_condition_supports(g, Solver())
    assert p.independence.dependent == ((1, 22),)
    r = A.find_weight_distribution(g, solver=Solver())
    assert isinstance(r, A.Failure) and r.reason == "dependent"
    assert 1 in r.witness and 22 in r.witness
    assert isinstance(A.find_possible_weights(g, solver=Solver()), A.Failure)


def test_dependent_pair_joint_enumeration():
    g = load(program_text("mt_pair.qp"))
    ref = brute_force_distribution(g)
    d = A.find_weight_distribution(g, solver=Solver(), dependent=True)
    assert d == ref
    assert d.stats.method == "dependent-groups"
    v = A.find_possible_weights(g, solver=Solver(), dependent=True)
    assert v.values == ref.keys()


def test_dependent_group_budget():
    g = load(program_text("mt_pair.qp"))
    with pytest.raises(BudgetExceeded):
        A.find_weight_distribution(g, solver=Solver(), dependent=True, max_dependent_group=1)


def test_path_budget(modexp8):
    with pytest.raises(BudgetExceeded):
        A.find_weight_distribution(modexp8, solver=Solver(), max_paths=255)


def test_parallel_jobs_give_identical_results(modexp8):
    one = A.find_weight_distribution(modexp8, solver=Solver(), jobs=1)
    two = A.find_weight_distribution(modexp8, solver=Solver(), jobs=2)
    assert one == two


def test_distribution_invariants():
    with pytest.raises(StructureError):
        A.WeightDistribution.from_map({1: 3}, 2)
    d = A.WeightDistribution.from_map({5: 2, 3: 2, 9: 0}, 2)
    assert d.counts == ((3, 2), (5, 2))
    assert d.values().values == (3, 5)


def test_exact_probability_rendering():
    assert A.exact_probability(70, 8) == "35/2^7"
    assert A.exact_probability(256, 8) == "1/2^0"
    assert A.exact_probability(0, 3) == "0/1"
    assert A.exact_probability(3, 4) == "3/2^4"


def test_csv_and_json(fig1):
    d = A.find_weight_distribution(fig1, solver=Solver())
    assert A.to_csv(d) == (
        "weight,count,probability,probability_decimal\n"
        "10,1,1/2^2,0.25\n11,2,1/2^1,0.5\n12,1,1/2^2,0.25\n"
    )
    doc = json.loads(A.to_json(d))
    assert doc["input_bits"] == 2 and doc["total"] == "4"
    assert [r["weight"] for r in doc["rows"]] == [10, 11, 12]


def test_histogram(fig1):
    d = A.find_weight_distribution(fig1, solver=Solver())
    rows = A.histogram(d, 1).splitlines()
    assert len(rows) == 3
    assert rows[1].count("#") == 50 and rows[0].count("#") == 25
    assert len(A.histogram(d, 2).splitlines()) == 2
    with pytest.raises(ValueError):
        A.histogram(d, 0)


def test_metrics():
    assert A.capacity_from_size(1) == 0.0
    assert A.channel_capacity([3, 3, 7, 9]) == math.log2(3)
    with pytest.raises(StructureError):
        A.channel_capacity([])
    uniform = A.WeightDistribution.from_map({i: 1 for i in range(16)}, 4)
    assert A.shannon_entropy(uniform) == pytest.approx(4.0)


def test_early_return_in_arm():
    last = load("input a: u4\nvar r: u4\nif a == 1 {\n return r\n}\nr = 2\nreturn r")
    assert A.find_weight_distribution(last, solver=Solver()) == brute_force_distribution(last)
    followed = load("input a: u4\nvar r: u4\nif a == 1 {\n return r\n}\nif a == 2 { r = 2 }\nreturn r")
    r = A.find_weight_distribution(followed, solver=Solver())
    assert isinstance(r, A.Failure) and r.reason == "nested" and r.witness == (0, 2)
