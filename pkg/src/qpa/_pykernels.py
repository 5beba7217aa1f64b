"""Pure-Python hot kernels.

Reference implementations of the two inner loops the compiled extension
accelerates.  They accept arbitrary Python integers and are used whenever the
extension is unavailable or the values do not fit in 64 bits.
"""

from __future__ import annotations

from typing import Sequence

BACKEND = "python"


def submultiset_sums(values: Sequence[int]) -> tuple[list[int], int]:
    """Sorted distinct submultiset sums of nonzero ``values`` plus the merge-step count.

    One pass per element merges ``sums`` with ``sums + x`` into a fresh list.
    Positive elements merge left to right; negative ones right to left, so
    the list stays ascending in both cases.  A step is one append.
    """
    sums = [0]
    steps = 0
    for x in values:
        n = len(sums)
        if x > 0:
            new = [sums[0]]
            i = 1
            for y in sums:
                z = x + y
                while i < n and sums[i] < z:
                    new.append(sums[i])
                    i += 1
                new.append(z)
                if i < n and sums[i] == z:
                    i += 1
        elif x < 0:
            new = [sums[-1]]
            i = n - 2
            for y in reversed(sums):
                z = x + y
                while i >= 0 and sums[i] > z:
                    new.append(sums[i])
                    i -= 1
                new.append(z)
                if i >= 0 and sums[i] == z:
                    i -= 1
            new.reverse()
        else:
            raise ValueError("zero elements must be removed before merging")
        steps += len(new)
        sums = new
    return sums, steps


def gray_accumulate(
    deltas: Sequence[int],
    true_counts: Sequence[int],
    false_counts: Sequence[int],
    base: int,
    mult: int,
) -> tuple[dict[int, int], int]:
    """Visit every subset of branches in Gray-code order.

    The subset with true-set S has weight ``base + sum(deltas[S])`` and count
    ``mult * prod(true_counts[S]) * prod(false_counts[not S])``.  Each step
    flips one branch, so the weight and the product change by one add and by
    one divide plus one multiply.  Zero factors are tracked by a counter
    instead of entering the product.  Returns ``({weight: count}, paths)``.
    """
    n = len(deltas)
    state = [False] * n
    zeros = 0
    prod = 1
    for f in false_counts:
        if f:
            prod *= f
        else:
            zeros += 1
    w = base
    out: dict[int, int] = {}
    if not zeros:
        out[w] = mult * prod
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if state[j]:
            old, new = true_counts[j], false_counts[j]
            w -= deltas[j]
        else:
            old, new = false_counts[j], true_counts[j]
            w += deltas[j]
        state[j] = not state[j]
        if old:
            prod //= old
        else:
            zeros -= 1
        if new:
            prod *= new
        else:
            zeros += 1
        if not zeros:
            out[w] = out.get(w, 0) + mult * prod
    return out, 1 << n
