import itertools

import numpy as np
import pytest

from conftest import program_text
from qpa.errors import BudgetExceeded, ParseError, StructureError, UnsupportedStructure
from qpa.expr import Bit
from qpa.oracle import execute, lane_traces, run_program
from qpa.program import (
    CostModel,
    build_cfg,
    check_unnested,
    compose_path,
    load,
    parse,
    path_from_edges,
    path_weight,
    postdominators,
    special_paths,
    symbolic_conditions,
    unroll,
)
from qpa.program.lang import count_conditionals
from qpa.randprog import corpus

# ---------------------------------------------------------------- parsing


@pytest.mark.parametrize(
    "text, where, fragment",
    [
        ("input x: u4\nx = x +", (2, 8), "expected an expression"),
        ("input x: u4\ny = 1", (2, 1), "undeclared identifier 'y'"),
        ("input x: u4\nvar y: u5\ny = x", (3, 1), "width mismatch"),
        ("input x: u65", (1, 10), "outside 1..64"),
        ("input x: u4\nrepeat -1 {}", (2, 8), "non-negative"),
        ("input x: u4\nx = 1\ninput z: u2", (3, 1), "declarations must precede"),
    ],
)
def test_parse_errors_carry_position(text, where, fragment):
    with pytest.raises(ParseError, match=fragment) as info:
        parse(text)
    assert (info.value.line, info.value.column) == where


def test_parse_accepts_comments_compound_assignment_and_else_if():
    p = parse(
        """
        // leading comment
        input a: u8
        var r: u8 = 2;  # trailing
        r += a
        if a < 3 { r = 1 } else if a == 9 { r = 2 } else { r *= 3 }
        return r
        """
    )
    assert p.input_widths == (("a", 8),)
    assert count_conditionals(p) == 2
    assert run_program(p, {"a": 1}) [0] == 1
    assert run_program(p, {"a": 9})[0] == 2
    assert run_program(p, {"a": 4})[0] == (2 + 4) * 3


def test_literals_take_the_width_of_their_context():
    p = parse("input a: u4\nvar r: u4\nr = a + 0xf\nreturn r")
    assert run_program(p, {"a": 1})[0] == 0
    with pytest.raises(ParseError, match="does not fit in u4"):
        parse("input a: u4\nvar r: u4\nr = a + 0x1f")


# ---------------------------------------------------------------- unrolling


def test_unroll_removes_loops_and_preserves_semantics():
    p = parse(program_text("modexp8.qp"))
    assert not p.is_loop_free()
    q = unroll(p)
    assert q.is_loop_free()
    assert count_conditionals(q) == 8
    for e in (0, 1, 0x5A, 0xFF):
        assert run_program(p, {"e": e}) == run_program(q, {"e": e})


def test_unroll_zero_and_nested_counts():
    p = parse("input a: u4\nvar r: u4\nrepeat 0 { r = r + 1 }\nrepeat 2 { repeat 3 { r = r + a } }\nreturn r")
    q = unroll(p)
    assert q.is_loop_free()
    assert run_program(q, {"a": 1})[0] == 6
    assert run_program(p, {"a": 1})[0] == 6


def test_unroll_budget():
    p = parse("input a: u4\nvar r: u4\nrepeat 1000 { repeat 1000 { r = r + a } }")
    with pytest.raises(BudgetExceeded):
        unroll(p, max_statements=10_000)


def test_modexp_result_is_modular_power():
    p = parse(program_text("fig1.qp"))
    for e in range(4):
        assert run_program(p, {"e": e})[0] == pow(3, e, 1000003)


# ---------------------------------------------------------------- CFG shape


def test_fig1_cfg_shape(fig1):
    fig1.validate()
    assert len(fig1.edges) == 9
    assert fig1.branches == (1, 4)
    assert fig1.source == 0 and fig1.sink == len(fig1.blocks) - 1
    assert fig1.num_input_bits == 2
    assert fig1.input_bits == (Bit("e", 0), Bit("e", 1))
    labels = [(e.src, e.dst, e.label) for e in fig1.edges]
    assert labels == [
        (0, 1, None), (1, 3, "false"), (1, 2, "true"), (2, 3, None), (3, 4, None),
        (4, 6, "false"), (4, 5, "true"), (5, 6, None), (6, 7, None),
    ]
    assert postdominators(fig1) == [1, 3, 3, 4, 6, 6, 7, 7]


def test_fig1_path_a_is_first_true_edge_only(fig1):
    path_a = (1, 0, 1, 1, 1, 1, 0, 0, 1)
    p0, pb = special_paths(fig1)
    assert pb[1].edges == path_a
    assert path_from_edges(fig1, path_a).branches == frozenset({1})
    assert p0.edges == (1, 1, 0, 0, 1, 1, 0, 0, 1)


def test_path_vectors_are_linear(fig1):
    # the path taking both true edges is the sum of the single-branch paths minus the base path
    p0, pb = special_paths(fig1)
    both = compose_path(fig1, (1, 4))
    assert (both.vector == pb[1].vector + pb[4].vector - p0.vector).all()
    assert path_weight(fig1, both) == path_weight(fig1, pb[1]) + path_weight(fig1, pb[4]) - path_weight(fig1, p0)


def test_invalid_path_vectors(fig1):
    with pytest.raises(StructureError):
        path_from_edges(fig1, (1, 1, 1, 0, 1, 1, 0, 0, 1))
    with pytest.raises(StructureError):
        path_from_edges(fig1, (1, 0, 0))
    with pytest.raises(StructureError):
        compose_path(fig1, (0,))


def test_weight_annotation_and_cost_table():
    text = "input a: u4\nvar r: u4\nif a == 1 { r = r * a\n weight 5 }\nr = r * a"
    g = load(text)
    arm = g.edge(g.branches[0], "true").dst
    assert g.blocks[arm].weight == 5
    heavy = build_cfg(unroll(parse(text)), CostModel.from_table({"statement": 1, "*": 10}))
    assert heavy.blocks[-2].weight == 11
    assert heavy.blocks[arm].weight == 5


def test_return_ends_the_program():
    g = load("input a: u4\nvar r: u4\nr = 1\nreturn r")
    assert execute(g, {"a": 0}).result == 1
    assert execute(g, {"a": 0}).weight == 2
    with pytest.raises(ParseError, match="unreachable"):
        parse("input a: u4\nvar r: u4\nreturn r\nr = 2")


def test_to_json_is_deterministic(fig1):
    assert fig1.to_json() == load(program_text("fig1.qp")).to_json()


# ---------------------------------------------------------------- nesting and conditions


def test_nested_program_has_witness():
    g = load(program_text("nested.qp"))
    nest = check_unnested(g)
    assert not nest and nest.witness == (0, 1) and nest.depth == 2
    with pytest.raises(UnsupportedStructure) as info:
        compose_path(g, ())
    assert info.value.witness == (0, 1)


def test_merge_dependent_condition_is_unsupported():
    g = load(program_text("merge_dependent.qp"))
    assert check_unnested(g)
    with pytest.raises(UnsupportedStructure) as info:
        symbolic_conditions(g)
    assert info.value.witness[1] == "t"


def test_symbolic_conditions_close_over_shifted_exponent(fig1):
    conds = symbolic_conditions(fig1)
    assert conds[1].bits == frozenset({Bit("e", 0)})
    assert conds[4].bits == frozenset({Bit("e", 1)})


# ---------------------------------------------------------------- paths versus executions


def small_corpus():
    return [load(gp.source) for gp in corpus(40, base_seed=500) if gp.num_branches <= 10]


def test_paths_biject_with_branch_subsets():
    for g in small_corpus():
        bs = g.branches
        seen = set()
        for r in range(len(bs) + 1):
            for taken in itertools.combinations(bs, r):
                p = compose_path(g, taken)
                assert path_from_edges(g, p.edges).branches == frozenset(taken)
                seen.add(p.edges)
        assert len(seen) == 2 ** len(bs)


def test_every_execution_decomposes_over_basis_paths():
    for g in small_corpus():
        p0, pb = special_paths(g)
        w0 = path_weight(g, p0)
        deltas = {b: path_weight(g, p) - w0 for b, p in pb.items()}
        rng = np.random.default_rng(g.num_input_bits)
        for idx in rng.integers(0, 1 << g.num_input_bits, size=16):
            vals = {}
            shift = 0
            for name, w in g.inputs:
                vals[name] = (int(idx) >> shift) & ((1 << w) - 1)
                shift += w
            t = execute(g, vals)
            assert t.weight == w0 + sum(deltas[b] for b in t.taken)
            assert t.path == compose_path(g, t.taken)


def test_cfg_and_ast_interpreters_agree_lane_by_lane(modexp8):
    (w_cfg, m_cfg), (w_ast, m_ast) = lane_traces(modexp8)
    assert (w_cfg == w_ast).all()
    assert (m_cfg == m_ast).all()
    for g in small_corpus()[:10]:
        (a, b), (c, d) = lane_traces(g)
        assert (a == c).all() and (b == d).all()
