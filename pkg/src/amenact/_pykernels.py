"""Pure-Python subset-enumeration kernels (fallback for the compiled module).

Both kernels enumerate every nonempty subset ``F`` of the candidate indices
``0..n_cand-1`` with ``|F| <= max_size`` whose smallest element lies in
``[lo, hi)``, and return ``(num, den, mask, count)``: the minimal ratio
``num/den``, the bitmask of the minimizing ``F`` and the number of subsets
visited. Ties are broken by the lexicographic order of the sorted index
tuple, so the result does not depend on how the search space is split.
"""

from __future__ import annotations


def lex_less(a: int, b: int) -> bool:
    """Compare two bitmasks by their sorted index tuples."""
    while a and b:
        la = a & -a
        lb = b & -b
        if la != lb:
            return la < lb
        a ^= la
        b ^= lb
    return a == 0 and b != 0


def _better(num, den, mask, best):
    if best is None:
        return True
    bn, bd, bm = best
    lhs, rhs = num * bd, bn * den
    if lhs != rhs:
        return lhs < rhs
    return lex_less(mask, bm)


def min_boundary_ratio(nbr_masks, n_cand, max_size, lo=0, hi=None):
    """Minimize ``|dF| / |F|`` with ``dF = N(F) \\ F`` (vertex boundary)."""
    hi = n_cand if hi is None else hi
    best = None
    count = 0
    # stack entries: (next index, F mask, neighbour union, size)
    stack = [(i, 1 << i, nbr_masks[i], 1) for i in range(hi - 1, lo - 1, -1)]
    while stack:
        i, f, acc, size = stack.pop()
        count += 1
        b = bin(acc & ~f).count("1")
        if _better(b, size, f, best):
            best = (b, size, f)
        if size < max_size:
            for j in range(n_cand - 1, i, -1):
                stack.append((j, f | (1 << j), acc | nbr_masks[j], size + 1))
    if best is None:
        return (0, 0, 0, count)
    return (best[0], best[1], best[2], count)


def min_max_displacement(images, n_cand, max_size, lo=0, hi=None):
    """Minimize ``max_s |sF ^ F| / |F|`` over generator image tables.

    ``images[s][v]`` is the index of ``s.v`` or ``-1`` when it is not a
    candidate (so it can never lie in ``F``).
    """
    hi = n_cand if hi is None else hi
    ngen = len(images)
    bits = [[(1 << t) if 0 <= t < n_cand else 0 for t in row] for row in images]
    best = None
    count = 0
    stack = [(i, 1 << i, tuple(bits[s][i] for s in range(ngen)), 1) for i in range(hi - 1, lo - 1, -1)]
    while stack:
        i, f, img, size = stack.pop()
        count += 1
        worst = 0
        for s in range(ngen):
            out = size - bin(img[s] & f).count("1")
            if out > worst:
                worst = out
        if _better(2 * worst, size, f, best):
            best = (2 * worst, size, f)
        if size < max_size:
            for j in range(n_cand - 1, i, -1):
                stack.append((j, f | (1 << j), tuple(img[s] | bits[s][j] for s in range(ngen)), size + 1))
    if best is None:
        return (0, 0, 0, count)
    return (best[0], best[1], best[2], count)
