"""Backend selection for the hot kernels.

The compiled extension is used when it imports and the values fit in 64
bits; otherwise the pure-Python kernels run.  Setting ``QPA_PURE_PYTHON=1``
forces the fallback.
"""

from __future__ import annotations

import os
from typing import Sequence

from . import _pykernels

INT64_SAFE = 1 << 62


def _load_compiled():
    if os.environ.get("QPA_PURE_PYTHON", "").strip() not in ("", "0"):
        return None
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"

# gray_accumulate on the compiled side uses a dense array over the weight range
MAX_DENSE_SPAN = 1 << 24


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _compiled is not None else ("python",)


def _pick(backend: str | None):
    if backend is None:
        return _compiled or _pykernels
    if backend == "python":
        return _pykernels
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")


def submultiset_sums(values: Sequence[int], backend: str | None = None) -> tuple[list[int], int]:
    """Sorted submultiset sums of nonzero ``values`` and the merge-step count."""
    impl = _pick(backend)
    if impl is not _pykernels and sum(abs(v) for v in values) >= INT64_SAFE:
        if backend == "cython":
            raise OverflowError("values exceed the 64-bit kernel range")
        impl = _pykernels
    return impl.submultiset_sums(list(values))


def gray_accumulate(
    deltas: Sequence[int],
    true_counts: Sequence[int],
    false_counts: Sequence[int],
    base: int = 0,
    mult: int = 1,
    backend: str | None = None,
) -> tuple[dict[int, int], int]:
    """Weight-to-count map over all branch subsets; see :func:`qpa._pykernels.gray_accumulate`."""
    impl = _pick(backend)
    if impl is not _pykernels:
        lo = base + sum(d for d in deltas if d < 0)
        hi = base + sum(d for d in deltas if d > 0)
        total = mult
        for t, f in zip(true_counts, false_counts):
            total *= t + f
        fits = (
            total < INT64_SAFE
            and hi - lo < MAX_DENSE_SPAN
            and -INT64_SAFE < lo <= hi < INT64_SAFE
        )
        if fits:
            dense, paths = impl.gray_accumulate(
                list(deltas), list(true_counts), list(false_counts), base, mult, lo, hi - lo + 1
            )
            nz = dense.nonzero()[0]
            return {int(lo + i): int(dense[i]) for i in nz}, int(paths)
        if backend == "cython":
            raise OverflowError("counts or weight range exceed the compiled kernel limits")
    return _pykernels.gray_accumulate(deltas, true_counts, false_counts, base, mult)
