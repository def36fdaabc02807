"""Compare the compiled and pure-Python subset kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import random
import time
from fractions import Fraction

from amenact import kernels
from amenact.graphs import cayley_ball
from amenact.groups import sanov_group


def boundary_instance():
    # candidates: the 17 vertices of the radius-2 ball in the free-group ball of radius 3
    ball = cayley_ball(sanov_group(), 3)
    inner = ball.within(2)
    index = {v: k for k, v in enumerate(inner)}
    masks = []
    for v in inner:
        m = 0
        for w in ball.adj[v]:
            m |= 1 << index.setdefault(w, len(index))
        masks.append(m)
    return masks, len(inner)


def displacement_instance(n, seed=0):
    rng = random.Random(seed)
    rows = []
    for _ in range(2):
        perm = list(range(n + 4))
        rng.shuffle(perm)
        rows.append([p if p < n else -1 for p in perm[:n]])
    return rows


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    masks, n = boundary_instance()
    images = displacement_instance(16)
    cases = [
        ("boundary  n=17 m=9", lambda t: kernels.min_boundary_ratio(masks, n, 9, threads=t)),
        ("boundary  n=17 m=17", lambda t: kernels.min_boundary_ratio(masks, n, 17, threads=t)),
        ("displace  n=16 m=8", lambda t: kernels.min_max_displacement(images, 16, 8, threads=t)),
    ]
    print(f"{'case':22} {'backend':9} {'threads':>7} {'seconds':>9} {'subsets':>9}")
    for label, fn in cases:
        results = set()
        for name in kernels.available():
            prev = kernels.use_backend(name)
            try:
                for threads in (1, 4):
                    secs, (num, den, mask, count) = timed(lambda: fn(threads), args.repeat)
                    results.add((Fraction(num, den), mask))
                    print(f"{label:22} {name:9} {threads:7d} {secs:9.4f} {count:9d}")
            finally:
                kernels.use_backend(prev)
        assert len(results) == 1, f"backends disagree on {label}"


if __name__ == "__main__":
    main()
