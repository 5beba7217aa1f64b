"""Random generator of analysable test programs.

Every program is a chain of diamonds.  Branch ``k`` reads only a private
slice of input bits: its condition is an arbitrary expression over
``x & M_k`` for a mask ``M_k`` disjoint from every other branch's, so
supports are pairwise disjoint by construction (though a condition may
ignore some of its bits, or all of them).  Arms write accumulators that no
later condition reads, and straight-line code between diamonds recodes the
inputs through invertible maps so conditions exercise symbolic closure.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

_ARITH = ("+", "-", "*", "^", "|", "&")
_CMP = ("==", "!=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class GeneratedProgram:
    source: str
    num_inputs: int
    num_branches: int
    seed: int


def _masked_leaf(var: str, mask: int) -> str:
    return f"({var} & {hex(mask)})"


def _expr(rng: random.Random, leaf: str, width: int, depth: int) -> str:
    if depth == 0 or rng.random() < 0.35:
        return leaf
    op = rng.choice(_ARITH + ("%", ">>", "<<"))
    a = _expr(rng, leaf, width, depth - 1)
    if op in (">>", "<<"):
        return f"({a} {op} {rng.randrange(width + 1)})"
    if op == "%":
        return f"({a} % {rng.randrange(0, 1 << width)})"
    if rng.random() < 0.5:
        b = str(rng.randrange(1 << width))
    else:
        b = _expr(rng, leaf, width, depth - 1)
    return f"({a} {op} {b})"


def _reachable(rng: random.Random, mask: int, width: int) -> int:
    """A constant the masked leaf can actually equal, most of the time."""
    if rng.random() < 0.8:
        return rng.randrange(1 << width) & mask
    return rng.randrange(1 << width)


def _condition(rng: random.Random, leaf: str, mask: int, width: int) -> str:
    kind = rng.random()
    if kind < 0.08:
        # a tautology or contradiction that still mentions the input
        return rng.choice([f"({leaf} | ~{leaf}) == {hex((1 << width) - 1)}",
                           f"({leaf} ^ {leaf}) != 0"])
    if kind < 0.7 and mask:
        op = rng.choice(("==", "!=", "==", "!=", "<", ">", "<=", ">="))
        k = _reachable(rng, mask, width)
        if op in ("<", ">=") and k == 0 or op in (">", "<=") and k >= mask:
            op = "!="
        cond = f"{leaf} {op} {k}"
    else:
        lhs = _expr(rng, leaf, width, 2)
        rhs = str(rng.randrange(1 << width)) if rng.random() < 0.7 else _expr(rng, leaf, width, 1)
        cond = f"{lhs} {rng.choice(_CMP)} {rhs}"
    if rng.random() < 0.2:
        other = f"{leaf} {rng.choice(_CMP)} {_reachable(rng, mask, width)}"
        cond = f"({cond}) {rng.choice(['and', 'or'])} ({other})"
    return cond


def random_program(
    seed: int,
    max_inputs: int = 14,
    max_branches: int = 8,
) -> GeneratedProgram:
    """An unnested program whose branch conditions have pairwise disjoint supports."""
    rng = random.Random(seed)
    nbranch = rng.randint(0, max_branches)
    nbits = rng.randint(min(max(1, nbranch), max_inputs), max_inputs)
    nvars = rng.randint(1, min(3, nbits))
    cuts = sorted(rng.sample(range(1, nbits), nvars - 1))
    widths = [b - a for a, b in zip([0, *cuts], [*cuts, nbits])]
    names = [f"x{i}" for i in range(nvars)]

    # hand out disjoint slices of bits; some branches get none (trivial ones)
    pool = [(v, i) for v, w in zip(names, widths) for i in range(w)]
    rng.shuffle(pool)
    owned: list[tuple[str, int]] = []
    for _ in range(nbranch):
        live = sorted({v for v, _ in pool})
        var = rng.choice(live) if live else rng.choice(names)
        free = [i for v, i in pool if v == var]
        take = min(rng.choice([0, 1, 1, 1, 1, 2, 2, 3]), len(free))
        bits = rng.sample(free, take)
        pool = [(v, i) for v, i in pool if not (v == var and i in bits)]
        owned.append((var, sum(1 << i for i in bits)))

    width = dict(zip(names, widths))
    lines = ["input " + ", ".join(f"{n}: u{w}" for n, w in zip(names, widths))]
    lines.append("var acc: u16, tmp: u16")
    # view[v] is the name through which inputs are read; recoded views are
    # obtained by xor with a constant, which keeps every bit in place
    views = {n: n for n in names}
    recoded = 0
    for var, mask in owned:
        if rng.random() < 0.3:
            name = f"y{recoded}"
            recoded += 1
            lines.insert(1, f"var {name}: u{width[var]}")
            lines.append(f"{name} = {views[var]} ^ {rng.randrange(1 << width[var])}")
            lines.append(f"{name} = {name} ^ {rng.randrange(1 << width[var])}")
            views[var] = name
        if rng.random() < 0.4:
            lines.append(f"tmp = tmp + {rng.randrange(1, 100)}")
        leaf = _masked_leaf(views[var], mask)
        cond = _condition(rng, leaf, mask, width[var])
        lines.append(f"if {cond} {{")
        lines.extend(_arm(rng))
        if rng.random() < 0.4:
            lines.append("} else {")
            lines.extend(_arm(rng))
        lines.append("}")
    if rng.random() < 0.5:
        lines.append("return acc")
    return GeneratedProgram("\n".join(lines) + "\n", nbits, nbranch, seed)


def _arm(rng: random.Random) -> list[str]:
    out = []
    for _ in range(rng.randint(0, 3)):
        out.append(f"    acc = acc + {rng.randrange(1, 1000)}")
    if rng.random() < 0.5:
        out.append(f"    weight {rng.randrange(0, 20)}")
    return out


def corpus(n: int, base_seed: int = 0, **kw) -> list[GeneratedProgram]:
    return [random_program(base_seed + i, **kw) for i in range(n)]
