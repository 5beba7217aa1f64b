"""Submultiset sums of a multiset of integer weight differences.

``D+`` is the set of sums of all submultisets of ``D``.  The merge algorithm
keeps a sorted list of sums found so far and folds in one element at a time,
for a worst-case cost of Theta(|D| |D+|) list appends.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from . import kernels
from .errors import BudgetExceeded, StructureError


@dataclass(frozen=True)
class DiffMultiset:
    """A multiset of integers, stored as a sorted tuple."""

    items: tuple[int, ...]

    @classmethod
    def of(cls, values: Iterable[int]) -> "DiffMultiset":
        return cls(tuple(sorted(int(v) for v in values)))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def spread(self) -> int:
        """V = max D - min D (0 for the empty multiset)."""
        return self.items[-1] - self.items[0] if self.items else 0

    @property
    def counts(self) -> Counter:
        return Counter(self.items)


@dataclass(frozen=True)
class SumSet:
    """Strictly increasing tuple of achievable sums; always contains 0."""

    values: tuple[int, ...]
    steps: int = 0

    def __post_init__(self):
        v = self.values
        if any(a >= b for a, b in zip(v, v[1:])):
            raise StructureError("sum set must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __contains__(self, x) -> bool:
        from bisect import bisect_left

        i = bisect_left(self.values, x)
        return i < len(self.values) and self.values[i] == x

    def shifted(self, offset: int) -> tuple[int, ...]:
        return tuple(offset + v for v in self.values)


def _as_list(d) -> list[int]:
    return list(d.items) if isinstance(d, DiffMultiset) else [int(x) for x in d]


def sumset_size_bound(d) -> int:
    """Upper bound (n+1)((n-1)V+1) on |D+| for |D| = n >= 2 and V = max D - min D."""
    items = _as_list(d)
    n = len(items)
    if n < 2:
        raise StructureError("the size bound needs at least two elements")
    v = max(items) - min(items)
    return (n + 1) * ((n - 1) * v + 1)


def _default_budget(nonzero: list[int]) -> int:
    return sumset_size_bound(nonzero) if len(nonzero) >= 2 else len(nonzero) + 1


def submultiset_sums(d, max_size: int | None = None, backend: str | None = None) -> SumSet:
    """D+ in ascending order.

    Zeros are dropped first (they add no new sums).  ``max_size`` caps the
    output length; by default it is the size bound, which can never be
    exceeded, so a BudgetExceeded there would indicate a bug.
    """
    items = [x for x in _as_list(d) if x != 0]
    budget = _default_budget(items) if max_size is None else max_size
    sums, steps = kernels.submultiset_sums(items, backend=backend)
    if len(sums) > budget:
        raise BudgetExceeded(f"{len(sums)} distinct sums exceed the budget of {budget}")
    return SumSet(tuple(sums), steps)


def abs_transform(d) -> DiffMultiset:
    """Absolute values with zeros removed; has the same number of submultiset sums."""
    return DiffMultiset.of(abs(x) for x in _as_list(d) if x != 0)


def sumset_size(d, backend: str | None = None) -> int:
    """|D+| via the nonnegative transform (no need for the sums themselves)."""
    return len(submultiset_sums(abs_transform(d), backend=backend))


def brute_force_sums(d) -> tuple[int, ...]:
    """Reference: every subset sum, deduplicated.  Exponential; for testing."""
    items = _as_list(d)
    out = {0}
    for k in range(1, len(items) + 1):
        for combo in combinations(items, k):
            out.add(sum(combo))
    return tuple(sorted(out))
