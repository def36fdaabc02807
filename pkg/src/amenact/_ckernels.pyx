# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twins of :mod:`amenact._pykernels` (candidate sets of <= 64 vertices)."""

from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline bint _lex_less(uint64_t a, uint64_t b) nogil:
    cdef uint64_t la, lb
    while a and b:
        la = a & (~a + 1)
        lb = b & (~b + 1)
        if la != lb:
            return la < lb
        a ^= la
        b ^= lb
    return a == 0 and b != 0


cdef inline bint _better(int64_t num, int64_t den, uint64_t mask,
                         int64_t bn, int64_t bd, uint64_t bm, bint have) nogil:
    cdef int64_t lhs, rhs
    if not have:
        return True
    lhs = num * bd
    rhs = bn * den
    if lhs != rhs:
        return lhs < rhs
    return _lex_less(mask, bm)


def min_boundary_ratio(nbr_masks, int n_cand, int max_size, int lo=0, hi=None):
    cdef int h = n_cand if hi is None else hi
    cdef int n = len(nbr_masks)
    if n_cand > 64 or n > 64:
        raise ValueError("compiled kernel handles at most 64 vertices")
    if max_size > n_cand:
        max_size = n_cand
    cdef uint64_t nbr[64]
    cdef int k
    for k in range(n):
        nbr[k] = <uint64_t>nbr_masks[k]
    cdef uint64_t fm[65]
    cdef uint64_t acc[65]
    cdef int pos[65]
    cdef int d, i, size
    cdef int64_t b, bn = 0, bd = 0
    cdef uint64_t bm = 0
    cdef bint have = False
    cdef long long count = 0
    if max_size < 1 or lo >= h:
        return (0, 0, 0, 0)
    with nogil:
        fm[0] = 0
        acc[0] = 0
        d = 0
        pos[0] = lo
        while d >= 0:
            i = pos[d]
            if (d == 0 and i >= h) or (d > 0 and i >= n_cand):
                d -= 1
                if d >= 0:
                    pos[d] += 1
                continue
            fm[d + 1] = fm[d] | ((<uint64_t>1) << i)
            acc[d + 1] = acc[d] | nbr[i]
            size = d + 1
            count += 1
            b = __builtin_popcountll(acc[d + 1] & ~fm[d + 1])
            if _better(b, size, fm[d + 1], bn, bd, bm, have):
                bn = b
                bd = size
                bm = fm[d + 1]
                have = True
            if size < max_size and i + 1 < n_cand:
                d += 1
                pos[d] = i + 1
            else:
                pos[d] += 1
    return (bn, bd, bm, count)


def min_max_displacement(images, int n_cand, int max_size, int lo=0, hi=None):
    cdef int h = n_cand if hi is None else hi
    cdef int ngen = len(images)
    if n_cand > 64:
        raise ValueError("compiled kernel handles at most 64 candidates")
    if max_size > n_cand:
        max_size = n_cand
    if max_size < 1 or lo >= h or ngen == 0:
        return (0, 0, 0, 0)
    cdef uint64_t *bits = <uint64_t *>malloc(ngen * 64 * sizeof(uint64_t))
    cdef uint64_t *img = <uint64_t *>malloc(ngen * 65 * sizeof(uint64_t))
    cdef int s, v, t
    for s in range(ngen):
        row = images[s]
        for v in range(n_cand):
            t = row[v]
            bits[s * 64 + v] = ((<uint64_t>1) << t) if 0 <= t < n_cand else 0
    cdef uint64_t fm[65]
    cdef int pos[65]
    cdef int d, i, size, out, worst
    cdef int64_t bn = 0, bd = 0
    cdef uint64_t bm = 0
    cdef bint have = False
    cdef long long count = 0
    try:
        with nogil:
            fm[0] = 0
            for s in range(ngen):
                img[s * 65] = 0
            d = 0
            pos[0] = lo
            while d >= 0:
                i = pos[d]
                if (d == 0 and i >= h) or (d > 0 and i >= n_cand):
                    d -= 1
                    if d >= 0:
                        pos[d] += 1
                    continue
                fm[d + 1] = fm[d] | ((<uint64_t>1) << i)
                size = d + 1
                count += 1
                worst = 0
                for s in range(ngen):
                    img[s * 65 + d + 1] = img[s * 65 + d] | bits[s * 64 + i]
                    out = size - __builtin_popcountll(img[s * 65 + d + 1] & fm[d + 1])
                    if out > worst:
                        worst = out
                if _better(2 * worst, size, fm[d + 1], bn, bd, bm, have):
                    bn = 2 * worst
                    bd = size
                    bm = fm[d + 1]
                    have = True
                if size < max_size and i + 1 < n_cand:
                    d += 1
                    pos[d] = i + 1
                else:
                    pos[d] += 1
    finally:
        free(bits)
        free(img)
    return (bn, bd, bm, count)
