"""Program frontend: source language, unrolling, weighted CFGs and path algebra."""

from .cfg import (
    DEFAULT_COST,
    Block,
    CostModel,
    Edge,
    Nesting,
    PathVec,
    WeightedCfg,
    build_cfg,
    check_unnested,
    compose_path,
    open_regions,
    path_blocks,
    path_from_edges,
    path_weight,
    postdominators,
    require_unnested,
    special_paths,
    symbolic_conditions,
    with_weights,
)
from .lang import (
    Assign,
    Decl,
    If,
    Repeat,
    Return,
    SourceProgram,
    Stmt,
    Weight,
    count_conditionals,
    parse,
    stmt_str,
    unroll,
    walk,
)

__all__ = [
    "Assign",
    "Block",
    "CostModel",
    "DEFAULT_COST",
    "Decl",
    "Edge",
    "If",
    "Nesting",
    "PathVec",
    "Repeat",
    "Return",
    "SourceProgram",
    "Stmt",
    "Weight",
    "WeightedCfg",
    "build_cfg",
    "check_unnested",
    "compose_path",
    "count_conditionals",
    "load",
    "open_regions",
    "parse",
    "path_blocks",
    "path_from_edges",
    "path_weight",
    "postdominators",
    "require_unnested",
    "special_paths",
    "stmt_str",
    "symbolic_conditions",
    "unroll",
    "walk",
    "with_weights",
]


def load(text: str, cost: CostModel = DEFAULT_COST) -> WeightedCfg:
    """Parse, unroll and build the weighted CFG in one step."""
    return build_cfg(unroll(parse(text)), cost)
