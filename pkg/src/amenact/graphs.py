"""Finite balls of locally finite graphs and the analyses run on them.

A :class:`GraphBall` is materialized by breadth-first search and then put in
canonical order (distance from the center, then vertex encoding), so two
constructions that visit the frontier in different orders serialize to the
same bytes.

Ratios are exact :class:`fractions.Fraction` values throughout; decimal
strings appear only as display renderings.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Sequence

from . import kernels
from .errors import (
    BudgetExceeded,
    DepthExceeded,
    NotARay,
    NotATree,
    RadiusTooSmall,
)
from .groups import encode as _encode

DEFAULT_SUBSET_BUDGET = 5_000_000


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def decimal_rendering(x: Fraction, digits: int = 6) -> str:
    with localcontext() as ctx:
        ctx.prec = digits + 4
        return str(round(Decimal(x.numerator) / Decimal(x.denominator), digits))


# --------------------------------------------------------------------------
# balls


class GraphBall:
    """Radius-``R`` ball around a center, canonically ordered.

    ``labels`` (optional) maps ``(vertex index, generator, sign)`` to the
    index of the image vertex, or ``-1`` when the image lies outside.
    """

    def __init__(self, center, dist: dict, edges: Iterable, radius: int,
                 encode: Callable[[Any], str] = _encode, labels: dict | None = None):
        codes = {p: encode(p) for p in dist}
        order = sorted(dist, key=lambda p: (dist[p], codes[p]))
        self.points: tuple = tuple(order)
        self.codes: tuple[str, ...] = tuple(codes[p] for p in order)
        self.index: dict = {p: i for i, p in enumerate(order)}
        self.dist: tuple[int, ...] = tuple(dist[p] for p in order)
        self.radius = radius
        self.center = self.index[center]
        adj: list[set[int]] = [set() for _ in order]
        for u, v in edges:
            if u == v:
                continue
            i, j = self.index[u], self.index[v]
            adj[i].add(j)
            adj[j].add(i)
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in adj)
        self.labels: dict | None = None
        if labels is not None:
            self.labels = {
                (self.index[p], name, sign): (self.index[img] if img in self.index else -1)
                for (p, name, sign), img in labels.items()
            }

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"GraphBall(R={self.radius}, |V|={len(self)}, center={self.codes[self.center]!r})"

    def degree(self, i: int) -> int:
        return len(self.adj[i])

    def sphere(self, n: int) -> list[int]:
        return [i for i, d in enumerate(self.dist) if d == n]

    def within(self, n: int) -> list[int]:
        return [i for i, d in enumerate(self.dist) if d <= n]

    def interior(self) -> list[int]:
        return self.within(self.radius - 1)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, a in enumerate(self.adj) for j in a if i < j]

    def has_edge(self, u, v) -> bool:
        i, j = self.index.get(u), self.index.get(v)
        return i is not None and j is not None and j in self.adj[i]

    def is_tree(self) -> bool:
        return len(self.edges()) == len(self) - 1

    def to_dict(self) -> dict:
        out = {
            "center": self.codes[self.center],
            "radius": self.radius,
            "vertices": list(self.codes),
            "dist": list(self.dist),
            "edges": [[self.codes[i], self.codes[j]] for i, j in self.edges()],
        }
        if self.labels is not None:
            out["labels"] = [
                [self.codes[i], name if sign > 0 else f"{name}^-1", self.codes[j] if j >= 0 else None]
                for (i, name, sign), j in sorted(self.labels.items())
            ]
        return out

    def to_dot(self, ray: Sequence | None = None, name: str = "ball") -> str:
        ray_idx = [self.index[p] for p in ray if p in self.index] if ray else []
        ray_edges = {frozenset(e) for e in zip(ray_idx, ray_idx[1:])}
        edge_labels: dict[frozenset, set[str]] = {}
        if self.labels:
            for (i, gname, sign), j in self.labels.items():
                if j >= 0 and sign > 0 and i != j:
                    edge_labels.setdefault(frozenset((i, j)), set()).add(gname)
        lines = [f"graph {_dot_id(name)} {{", "  node [shape=circle];"]
        for i, code in enumerate(self.codes):
            attrs = [f'label={_dot_id(code)}']
            if i == self.center:
                attrs.append('style=filled fillcolor="gold"')
            elif i in ray_idx:
                attrs.append('style=filled fillcolor="lightblue"')
            lines.append(f"  v{i} [{' '.join(attrs)}];")
        for i, j in self.edges():
            attrs = []
            lab = edge_labels.get(frozenset((i, j)))
            if lab:
                attrs.append(f"label={_dot_id(','.join(sorted(lab)))}")
            if frozenset((i, j)) in ray_edges:
                attrs.append("penwidth=2")
            suffix = f" [{' '.join(attrs)}]" if attrs else ""
            lines.append(f"  v{i} -- v{j}{suffix};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    # tree helpers -------------------------------------------------------

    def parent(self, i: int) -> int | None:
        for j in self.adj[i]:
            if self.dist[j] == self.dist[i] - 1:
                return j
        return None

    def tree_distance(self, i: int, j: int) -> int:
        a, b, d = i, j, 0
        while self.dist[a] > self.dist[b]:
            a, d = self.parent(a), d + 1
        while self.dist[b] > self.dist[a]:
            b, d = self.parent(b), d + 1
        while a != b:
            a, b, d = self.parent(a), self.parent(b), d + 2
        return d

    def tree_path(self, i: int, j: int) -> list[int]:
        up_i, up_j = [i], [j]
        a, b = i, j
        while self.dist[a] > self.dist[b]:
            a = self.parent(a)
            up_i.append(a)
        while self.dist[b] > self.dist[a]:
            b = self.parent(b)
            up_j.append(b)
        while a != b:
            a, b = self.parent(a), self.parent(b)
            up_i.append(a)
            up_j.append(b)
        return up_i + up_j[-2::-1]


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def build_ball(center: Hashable, neighbors: Callable[[Any], Iterable], radius: int,
               encode: Callable[[Any], str] = _encode) -> GraphBall:
    """BFS ball; ``neighbors`` must be symmetric."""
    dist = {center: 0}
    frontier = [center]
    edges = set()
    for d in range(radius):
        nxt = []
        for p in frontier:
            for q in neighbors(p):
                if q == p:
                    continue
                edges.add(frozenset((p, q)))
                if q not in dist:
                    dist[q] = d + 1
                    nxt.append(q)
        frontier = nxt
    for p in frontier:
        for q in neighbors(p):
            if q in dist and q != p:
                edges.add(frozenset((p, q)))
    return GraphBall(center, dist, [tuple(e) for e in edges], radius, encode)


def schreier_ball(action, center, radius: int, strict: bool = False) -> GraphBall:
    """Ball of the Schreier graph of ``action``'s generators, with edge labels.

    Images that cannot be evaluated (``DepthExceeded``) are dropped unless
    ``strict`` is set.
    """
    letters = action.group.letters()
    cache: dict = {}

    def images(p):
        if p not in cache:
            out = {}
            for name, sign in letters:
                try:
                    out[(name, sign)] = action.act(action.group.letter(name, sign), p)
                except DepthExceeded:
                    if strict:
                        raise
            cache[p] = out
        return cache[p]

    dist = {center: 0}
    frontier = [center]
    for d in range(radius):
        nxt = []
        for p in frontier:
            for img in images(p).values():
                if img not in dist:
                    dist[img] = d + 1
                    nxt.append(img)
        frontier = nxt
    edges = []
    labels = {}
    for p in dist:
        for (name, sign), img in images(p).items():
            labels[(p, name, sign)] = img
            if img in dist and img != p:
                edges.append((p, img))
    return GraphBall(center, dist, edges, radius, action.encode, labels)


def cayley_ball(group, radius: int, encode: Callable[[Any], str] = _encode) -> GraphBall:
    """Cayley graph ball with edges ``g -- s*g`` (left multiplication)."""
    from .actions import ActionSpec

    spec = ActionSpec(group, lambda g, h: g * h, encode=encode, name="left-regular")
    return schreier_ball(spec, group.identity(), radius)


def tree_ball(q: int, radius: int) -> GraphBall:
    """Ball in the (q+1)-regular tree; vertices are non-backtracking paths."""

    def nbrs(p):
        if not p:
            return [(c,) for c in range(q + 1)]
        return [p[:-1]] + [p + (c,) for c in range(q)]

    return build_ball((), nbrs, radius, encode=lambda p: ".".join(map(str, p)) or "root")


def line_ball(radius: int) -> GraphBall:
    return build_ball(0, lambda n: (n - 1, n + 1), radius, encode=str)


def grid_ball(radius: int) -> GraphBall:
    def nbrs(p):
        x, y = p
        return [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]

    return build_ball((0, 0), nbrs, radius, encode=lambda p: f"{p[0]},{p[1]}")


def rooted_canonical_form(ball: GraphBall) -> str:
    """AHU encoding of a tree ball rooted at its center."""
    if not ball.is_tree():
        raise NotATree("rooted canonical form needs a tree")
    forms: dict[int, str] = {}
    for i in sorted(range(len(ball)), key=lambda i: -ball.dist[i]):
        kids = sorted(forms[j] for j in ball.adj[i] if ball.dist[j] == ball.dist[i] + 1)
        forms[i] = "(" + "".join(kids) + ")"
    return forms[ball.center]


def rooted_isomorphic(b1: GraphBall, b2: GraphBall) -> bool:
    return b1.radius == b2.radius and rooted_canonical_form(b1) == rooted_canonical_form(b2)


# --------------------------------------------------------------------------
# growth and ends


@dataclass
class GrowthTable:
    a: list[int]
    exact: bool = True

    def rate_at_least(self, n: int, base: int, num: int, den: int) -> bool:
        """Exact test of ``a_n**(1/n) >= base**(num/den)``."""
        return self.a[n] ** den >= base ** (num * n)

    def rendering(self, n: int) -> str:
        with localcontext() as ctx:
            ctx.prec = 12
            return str(round((Decimal(self.a[n]).ln() / n).exp(), 6))

    def to_dict(self) -> dict:
        return {
            "a": list(self.a),
            "exact": self.exact,
            "rates": [{"n": n, "a_n": self.a[n], "display": self.rendering(n)} for n in range(1, len(self.a))],
        }


def growth_sequence(ball: GraphBall, N: int) -> GrowthTable:
    if N >= ball.radius:
        raise RadiusTooSmall(f"growth to n={N} needs a ball of radius > {N}, have {ball.radius}")
    counts = [0] * (N + 1)
    for d in ball.dist:
        if d <= N:
            counts[d] += 1
    a, total = [], 0
    for c in counts:
        total += c
        a.append(total)
    return GrowthTable(a)


@dataclass
class EndReport:
    r: int
    R: int
    count: int
    component_sizes: list[int]
    method: str = "annulus components touching the outer sphere (truncation heuristic)"

    def to_dict(self) -> dict:
        return {"r": self.r, "R": self.R, "ends": self.count, "component_sizes": self.component_sizes, "method": self.method}


def ends_at_truncation(ball: GraphBall, r: int) -> EndReport:
    """Components of ``{v : r <= d(v) <= R}`` that reach the radius-``R`` sphere."""
    R = ball.radius
    if not 1 <= r <= R - 2:
        raise RadiusTooSmall(f"need 1 <= r <= R-2, got r={r}, R={R}")
    inside = [d >= r for d in ball.dist]
    seen = [False] * len(ball)
    sizes = []
    for s in range(len(ball)):
        if not inside[s] or seen[s]:
            continue
        comp, touches = 0, False
        queue = deque([s])
        seen[s] = True
        while queue:
            i = queue.popleft()
            comp += 1
            touches |= ball.dist[i] == R
            for j in ball.adj[i]:
                if inside[j] and not seen[j]:
                    seen[j] = True
                    queue.append(j)
        if touches:
            sizes.append(comp)
    return EndReport(r, R, len(sizes), sorted(sizes))


def end_profile(ball: GraphBall) -> dict:
    reports = [ends_at_truncation(ball, r) for r in range(1, ball.radius - 1)]
    counts = [rep.count for rep in reports]
    return {
        "R": ball.radius,
        "counts": [[rep.r, rep.count] for rep in reports],
        "monotone_nondecreasing": all(x <= y for x, y in zip(counts, counts[1:])),
    }


# --------------------------------------------------------------------------
# isoperimetry


def vertex_boundary(ball: GraphBall, F: Iterable[int]) -> set[int]:
    F = set(F)
    return {j for i in F for j in ball.adj[i] if j not in F}


@dataclass
class IsoperimetricReport:
    family: str
    min_ratio: Fraction
    argmin: list[str]
    lower_bound: bool
    explored: int
    backend: str = "python"

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "min_ratio": frac_str(self.min_ratio),
            "min_ratio_display": decimal_rendering(self.min_ratio),
            "argmin": self.argmin,
            "argmin_size": len(self.argmin),
            "lower_bound_for_family": self.lower_bound,
            "explored": self.explored,
            "backend": self.backend,
        }


def _subset_count(n: int, m: int) -> int:
    return sum(math.comb(n, k) for k in range(1, min(n, m) + 1))


def _mask_indices(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def isoperimetric_search(ball: GraphBall, mode: str = "exhaustive", max_size: int = 8,
                         steps: int = 50, budget: int = DEFAULT_SUBSET_BUDGET,
                         threads: int = 1) -> IsoperimetricReport:
    """Minimize ``|dF|/|F|`` over ``F`` inside the radius-(R-1) interior.

    ``exhaustive`` visits every subset of size ``<= max_size`` and so
    certifies the minimum over that family; ``greedy`` grows a set from the
    center and claims nothing.
    """
    cand = ball.interior()
    n = len(cand)
    if mode == "exhaustive":
        total = _subset_count(n, max_size)
        if total > budget:
            raise BudgetExceeded(f"{total} subsets exceed budget {budget}")
        masks = [sum(1 << j for j in ball.adj[i]) for i in range(len(ball))]
        num, den, mask, count = kernels.min_boundary_ratio(masks, n, max_size, threads=threads)
        used = kernels.backend() if len(ball) <= 64 else "python"
        F = _mask_indices(mask)
        return IsoperimetricReport(
            f"all F within radius {ball.radius - 1}, 1 <= |F| <= {max_size}",
            Fraction(num, den), sorted(ball.codes[i] for i in F), True, count, used,
        )
    if mode == "greedy":
        allowed = set(cand)
        F = {ball.center}
        best = (Fraction(len(vertex_boundary(ball, F)), 1), sorted(F))
        explored = 1
        for _ in range(steps):
            options = []
            for j in sorted(vertex_boundary(ball, F) & allowed):
                G = F | {j}
                explored += 1
                options.append((Fraction(len(vertex_boundary(ball, G)), len(G)), ball.codes[j], j))
            if not options:
                break
            ratio, _, j = min(options)
            F.add(j)
            if ratio < best[0]:
                best = (ratio, sorted(F))
        return IsoperimetricReport(
            f"greedy growth from the center, {steps} steps", best[0],
            sorted(ball.codes[i] for i in best[1]), False, explored,
        )
    raise ValueError(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# Folner witnesses


@dataclass
class FolnerWitness:
    points: tuple
    codes: tuple[str, ...]
    displacement: dict[str, int]
    ratios: dict[str, Fraction]
    max_ratio: Fraction
    provenance: str

    @property
    def size(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "found": True,
            "size": self.size,
            "vertices": list(self.codes),
            "displacement": dict(sorted(self.displacement.items())),
            "ratios": {k: frac_str(v) for k, v in sorted(self.ratios.items())},
            "max_ratio": frac_str(self.max_ratio),
            "max_ratio_display": decimal_rendering(self.max_ratio),
            "provenance": self.provenance,
        }


@dataclass
class NotFoundUpToBudget:
    epsilon: Fraction
    explored: int
    best_ratio: Fraction | None
    certified_min: bool
    family: str

    def to_dict(self) -> dict:
        return {
            "found": False,
            "epsilon": frac_str(self.epsilon),
            "explored": self.explored,
            "best_ratio": frac_str(self.best_ratio) if self.best_ratio is not None else None,
            "certified_min_over_family": self.certified_min,
            "family": self.family,
        }


def make_witness(points: Iterable, action, gens: Sequence[str], provenance: str) -> FolnerWitness:
    """Count ``|sF ^ F|`` pointwise for each generator."""
    F = set(points)
    if not F:
        raise ValueError("empty Folner set")
    disp, ratios = {}, {}
    for name in gens:
        g = action.group[name]
        sF = {action.act(g, p) for p in F}
        disp[name] = len(sF ^ F)
        ratios[name] = Fraction(disp[name], len(F))
    enc = action.encode
    ordered = tuple(sorted(F, key=enc))
    return FolnerWitness(ordered, tuple(enc(p) for p in ordered), disp, ratios, max(ratios.values()), provenance)


def validate_witness(w: FolnerWitness, action) -> bool:
    fresh = make_witness(w.points, action, list(w.displacement), w.provenance)
    return (fresh.displacement == w.displacement and fresh.ratios == w.ratios
            and fresh.max_ratio == w.max_ratio and fresh.codes == w.codes)


def koopman_defect_squared(points: Iterable, action, g) -> Fraction:
    """``||pi(g) xi - xi||^2`` for ``xi`` the normalized indicator of ``F``.

    ``(pi(g) xi)(x) = xi(g^-1 x)``; the sum runs over the support ``F u gF``.
    """
    F = set(points)
    ginv = g.inverse()
    support = F | {action.act(g, p) for p in F}
    total = 0
    for x in support:
        diff = (1 if action.act(ginv, x) in F else 0) - (1 if x in F else 0)
        total += diff * diff
    return Fraction(total, len(F))


def _displacement_images(ball: GraphBall, action, gens, n_cand):
    rows = []
    for name in gens:
        g = action.group[name]
        row = []
        for i in range(n_cand):
            j = ball.index.get(action.act(g, ball.points[i]), -1)
            row.append(j if j < n_cand else -1)
        rows.append(row)
    return rows


def folner_search(ball: GraphBall, action, gens: Sequence[str], epsilon, strategy: str = "anneal",
                  seed: int = 0, max_size: int = 9, steps: int = 4000,
                  budget: int = DEFAULT_SUBSET_BUDGET, threads: int = 1):
    """Look for ``F`` in the ball with ``max_s |sF ^ F|/|F| <= epsilon``.

    ``exhaustive`` scans every subset of the radius-(R-1) interior up to
    ``max_size`` and certifies the minimum over that family. ``anneal``
    tries the center balls, then a greedy add/remove descent, then simulated
    annealing driven only by ``random.Random(seed)``. Any witness returned
    has been recounted from scratch.
    """
    epsilon = Fraction(epsilon)
    if strategy == "exhaustive":
        cand = ball.interior()
        n = len(cand)
        total = _subset_count(n, max_size)
        if total > budget:
            raise BudgetExceeded(f"{total} subsets exceed budget {budget}")
        rows = _displacement_images(ball, action, gens, n)
        num, den, mask, count = kernels.min_max_displacement(rows, n, max_size, threads=threads)
        best = Fraction(num, den)
        family = f"all F within radius {ball.radius - 1}, 1 <= |F| <= {max_size}"
        if best <= epsilon:
            w = make_witness([ball.points[i] for i in _mask_indices(mask)], action, gens, "search")
            assert validate_witness(w, action)
            return w
        return NotFoundUpToBudget(epsilon, count, best, True, family)
    if strategy != "anneal":
        raise ValueError(f"unknown strategy {strategy!r}")

    maps = {name: action.group[name] for name in gens}
    img_cache: dict = {}

    def image(name, i):
        key = (name, i)
        if key not in img_cache:
            img_cache[key] = ball.index.get(action.act(maps[name], ball.points[i]), -1)
        return img_cache[key]

    def score(F: frozenset) -> tuple[Fraction, Fraction]:
        worst, tot = 0, 0
        for name in gens:
            out = sum(1 for i in F if image(name, i) not in F)
            worst = max(worst, out)
            tot += out
        return Fraction(2 * worst, len(F)), Fraction(2 * tot, len(F))

    explored = 0

    def key(F):
        return (*score(F), tuple(sorted(ball.codes[i] for i in F)))

    best_F, best_key = None, None

    def consider(F):
        nonlocal best_F, best_key, explored
        explored += 1
        k = key(F)
        if best_key is None or k < best_key:
            best_F, best_key = F, k
        return k

    for r in range(ball.radius):
        consider(frozenset(ball.within(r)))
    if best_key[0] <= epsilon:
        return _finish(best_F, ball, action, gens, "search")

    interior = set(ball.interior())

    def moves(F):
        out = []
        if len(F) > 1:
            out.extend(F - {i} for i in F)
        out.extend(F | {j} for j in vertex_boundary(ball, F) & interior)
        return out

    cur = best_F
    cur_key = best_key
    while True:
        options = [(consider(G), G) for G in moves(cur)]
        if not options:
            break
        k, G = min(options, key=lambda kv: kv[0])
        if k >= cur_key:
            break
        cur, cur_key = G, k
        if cur_key[0] <= epsilon:
            return _finish(cur, ball, action, gens, "search")

    rng = random.Random(seed)
    cur, cur_key = best_F, best_key
    for step in range(steps):
        temp = 0.5 * (1 - step / steps) + 1e-3
        F = set(cur)
        if len(F) > 1 and rng.random() < 0.5:
            F.discard(rng.choice(sorted(F)))
        else:
            bd = sorted(vertex_boundary(ball, F) & interior)
            if not bd:
                continue
            F.add(rng.choice(bd))
        G = frozenset(F)
        k = consider(G)
        delta = float(k[0] - cur_key[0]) + 0.1 * float(k[1] - cur_key[1])
        if delta <= 0 or rng.random() < math.exp(-delta / temp):
            cur, cur_key = G, k
        if best_key[0] <= epsilon:
            return _finish(best_F, ball, action, gens, "search")
    return NotFoundUpToBudget(epsilon, explored, best_key[0], False,
                              f"center balls + greedy + {steps} annealing steps, seed {seed}")


def _finish(F, ball, action, gens, provenance):
    w = make_witness([ball.points[i] for i in F], action, gens, provenance)
    if not validate_witness(w, action):
        raise AssertionError("witness failed its own recount")
    return w


def staircase_points(q: int, n: int):
    """Bass-Serre vertices ``(k, mu mod q**k)``, ``0 <= k <= n``, ``mu`` in ``q**-(n-k) Z``."""
    from .actions import bs_vertex

    for k in range(n + 1):
        for j in range(q**n):
            yield bs_vertex(q, k, Fraction(j, q ** (n - k)))


def staircase_folner(q: int, n: int, limit: int = 200_000) -> FolnerWitness:
    """The horoball slab of BS(1, q): ``|F| = (n+1) q**n``, ratio ``2/(n+1)``."""
    from .actions import bs_tree_action

    if q < 2 or n < 0:
        raise ValueError("need q >= 2 and n >= 0")
    if (n + 1) * q**n > limit:
        raise BudgetExceeded(f"staircase of size {(n + 1) * q ** n} exceeds {limit}")
    return make_witness(staircase_points(q, n), bs_tree_action(q), ["a", "t"], "staircase")


# --------------------------------------------------------------------------
# tree automorphisms, fixed ends, trichotomy


@dataclass
class AutomorphismReport:
    classification: str
    min_displacement: int | None
    translation_length: int | None = None
    fixed_vertices: list[str] = field(default_factory=list)
    axis_segment: list[str] = field(default_factory=list)
    evaluated: int = 0
    axis_start: Any = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "min_displacement": self.min_displacement,
            "translation_length": self.translation_length,
            "fixed_vertices": self.fixed_vertices,
            "axis_segment": self.axis_segment,
            "evaluated_vertices": self.evaluated,
        }


def _image_index(ball, action, g, i):
    try:
        return ball.index.get(action.act(g, ball.points[i]), -1)
    except DepthExceeded:
        return -1


def classify_tree_automorphism(action, g, ball: GraphBall) -> AutomorphismReport:
    if not ball.is_tree():
        raise NotATree("classification needs a tree ball")
    disp = {}
    for i in range(len(ball)):
        j = _image_index(ball, action, g, i)
        if j >= 0:
            disp[i] = (j, ball.tree_distance(i, j))
    if not disp:
        return AutomorphismReport("inconclusive", None)
    ell = min(d for _, d in disp.values())
    if ell == 0:
        fixed = [ball.codes[i] for i, (_, d) in sorted(disp.items()) if d == 0]
        return AutomorphismReport("elliptic", 0, fixed_vertices=fixed[:16], evaluated=len(disp))
    g2 = g * g
    for i in sorted(i for i, (_, d) in disp.items() if d == ell):
        j2 = _image_index(ball, action, g2, i)
        if j2 >= 0 and ball.tree_distance(i, j2) == 2 * ell:
            seg = [ball.codes[k] for k in ball.tree_path(i, j2)]
            return AutomorphismReport("hyperbolic", ell, ell, axis_segment=seg, evaluated=len(disp),
                                      axis_start=ball.points[i])
    if all(d % 2 == 1 for _, d in disp.values()):
        if any(_image_index(ball, action, g2, i) == i for i in range(len(ball))):
            return AutomorphismReport("inversion-suspect", ell, evaluated=len(disp))
    return AutomorphismReport("inconclusive", ell, evaluated=len(disp))


@dataclass
class RayShift:
    generator: str
    ok: bool
    n0: int | None = None
    shift: int | None = None
    checked: int = 0

    def to_dict(self) -> dict:
        return {"generator": self.generator, "ok": self.ok, "n0": self.n0, "shift": self.shift, "checked": self.checked}


def check_ray(ray: Sequence, ball: GraphBall | None = None) -> None:
    if len(set(ray)) != len(ray):
        raise NotARay("ray repeats a vertex")
    if ball is not None:
        for u, v in zip(ray, ray[1:]):
            if not ball.has_edge(u, v):
                raise NotARay(f"{u} and {v} are not adjacent")


def ray_shift(action, ray: Sequence, name: str, g) -> RayShift:
    """Smallest ``n0`` and shift ``delta`` with ``g v_n = v_(n+delta)`` on the tail.

    The tail is ``n0 <= n <= R`` restricted to ``0 <= n + delta <= R``.
    Among shifts with a consistent nonempty tail, the longest tail wins.
    """
    R = len(ray) - 1
    pos = {p: i for i, p in enumerate(ray)}
    shifts = []
    for n, p in enumerate(ray):
        try:
            m = pos.get(action.act(g, p))
        except DepthExceeded:
            m = None
        shifts.append(None if m is None else m - n)
    best = None
    for delta in sorted({s for s in shifts if s is not None}, key=lambda s: (abs(s), s)):
        lo, hi = max(0, -delta), min(R, R - delta)
        if hi < lo or shifts[hi] != delta:
            continue
        n0 = hi
        while n0 - 1 >= lo and shifts[n0 - 1] == delta:
            n0 -= 1
        length = hi - n0 + 1
        if best is None or length > best[2]:
            best = (n0, delta, length)
    if best is None:
        return RayShift(name, False)
    return RayShift(name, True, best[0], best[1], best[2])


def fixed_end_check(action, ray: Sequence, gens: Sequence[str] | None = None,
                    ball: GraphBall | None = None) -> dict:
    check_ray(ray, ball)
    names = list(gens) if gens is not None else action.group.names
    results = [ray_shift(action, ray, name, action.group[name]) for name in names]
    return {
        "ray": [action.encode(p) for p in ray],
        "R": len(ray) - 1,
        "generators": [r.to_dict() for r in results],
        "end_fixed_at_truncation": all(r.ok for r in results),
    }


def _axis_ray(action, g, ball: GraphBall, start: int) -> list:
    """Follow the translation axis of ``g`` from ``ball.points[start]``."""
    ray = [start]
    cur = start
    while True:
        j = _image_index(ball, action, g, cur)
        if j < 0:
            break
        path = ball.tree_path(cur, j)[1:]
        if any(k in ray for k in path):
            break
        ray.extend(path)
        cur = j
    return [ball.points[i] for i in ray]


def invariant_structure_report(action, ball: GraphBall, L: int = 12, extra_points: Sequence = (),
                               rays: Sequence[Sequence] = ()) -> dict:
    """Evidence for each branch of the fixed-set / fixed-end / two-ends trichotomy."""
    from .actions import orbit_ball

    names = action.group.names
    report: dict = {"budget": {"word_length": L, "radius": ball.radius}, "a": [], "b": [], "c": []}
    for p in [ball.points[ball.center], *extra_points]:
        orb = orbit_ball(action, p, L, strict=False)
        if orb.closed:
            report["a"].append({"point": action.encode(p), "orbit_size": len(orb.points), "closed_at_length": orb.closed_at})
    for ray in rays:
        res = fixed_end_check(action, ray, names)
        if res["end_fixed_at_truncation"]:
            report["b"].append(res)
    if ball.is_tree():
        for name in names:
            g = action.group[name]
            cls = classify_tree_automorphism(action, g, ball)
            if cls.classification != "hyperbolic":
                continue
            start = ball.index[cls.axis_start]
            forward = _axis_ray(action, g, ball, start)
            backward = _axis_ray(action, g.inverse(), ball, start)
            fwd = fixed_end_check(action, forward, names)
            bwd = fixed_end_check(action, backward, names)
            if fwd["end_fixed_at_truncation"] and bwd["end_fixed_at_truncation"]:
                report["c"].append({
                    "generator": name,
                    "translation_length": cls.translation_length,
                    "forward_ray": fwd,
                    "backward_ray": bwd,
                })
    report["branches_with_evidence"] = [k for k in "abc" if report[k]]
    return report

