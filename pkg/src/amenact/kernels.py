"""Backend selection for the subset-enumeration kernels.

The compiled module is used when it imported and the instance fits in 64
bits; otherwise the pure-Python version runs. Work can be split across
threads by the smallest element of the subset; partial results are merged
with the same (ratio, lexicographic) order the kernels use, so the answer
is independent of the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - exercised only without a build
    _ckernels = None

_backend = "compiled" if _ckernels is not None else "python"


def available() -> list[str]:
    return ["compiled", "python"] if _ckernels is not None else ["python"]


def backend() -> str:
    return _backend


def use_backend(name: str) -> str:
    """Force ``"python"`` or ``"compiled"``; returns the previous choice."""
    global _backend
    if name not in available():
        raise ValueError(f"backend {name!r} unavailable (have {available()})")
    prev, _backend = _backend, name
    return prev


def _pick(fits: bool):
    if _backend == "compiled" and fits:
        return _ckernels
    return _pykernels


def _merge(parts):
    best = None
    total = 0
    for num, den, mask, count in parts:
        total += count
        if den == 0:
            continue
        if best is None or _pykernels._better(num, den, mask, best):
            best = (num, den, mask)
    if best is None:
        return (0, 0, 0, total)
    return (*best, total)


def _run(fn, args, n_cand, threads):
    if threads <= 1 or n_cand <= 1:
        return fn(*args, 0, n_cand)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda i: fn(*args, i, i + 1), range(n_cand)))
    return _merge(parts)


def min_boundary_ratio(nbr_masks, n_cand: int, max_size: int, threads: int = 1):
    mod = _pick(len(nbr_masks) <= 64 and n_cand <= 64)
    return _run(mod.min_boundary_ratio, (list(nbr_masks), n_cand, max_size), n_cand, threads)


def min_max_displacement(images, n_cand: int, max_size: int, threads: int = 1):
    mod = _pick(n_cand <= 64)
    return _run(mod.min_max_displacement, ([list(r) for r in images], n_cand, max_size), n_cand, threads)
