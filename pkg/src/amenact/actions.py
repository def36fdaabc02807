"""Group actions on sets: orbits, stabilizer evidence, coset graphs and chains.

Everything here works at an explicit word-length budget ``L``. Results that
depend on truncation carry that budget and a ``stabilized`` flag instead of
claiming exactness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Sequence

from .errors import (
    CommensurationNotCertified,
    DepthExceeded,
    DepthGuard,
    IndexMismatch,
    NoMembershipOracle,
    NotTwoGroup,
)
from .graphs import GraphBall, build_ball
from .groups import (
    AffineElement,
    MarkedGroup,
    Matrix2,
    QDyadic,
    RootedTreePortrait,
    Word,
    bs_group,
    encode as _encode,
    odometer,
    sanov_group,
)


@dataclass(frozen=True)
class ActionSpec:
    """A marked group together with a point evaluator and a point codec."""

    group: MarkedGroup
    evaluator: Callable[[Any, Any], Any]
    encode: Callable[[Any], str] = _encode
    decode: Callable[[str], Any] | None = None
    name: str = ""
    depth: int | None = None

    def act(self, g, p):
        return self.evaluator(g, p)

    def act_word(self, w: Word | str, p):
        """``w . p`` with the rightmost letter applied first."""
        if isinstance(w, str):
            w = Word.parse(w)
        for name, sign in reversed(w.letters):
            p = self.evaluator(self.group.letter(name, sign), p)
        return p


# --------------------------------------------------------------------------
# word balls and orbits


def word_ball(group: MarkedGroup, L: int) -> list[tuple[Any, Word]]:
    """Distinct elements of length ``<= L`` with one shortest word each, in BFS order."""
    e = group.identity()
    seen = {e: Word()}
    out = [(e, Word())]
    frontier = [e]
    letters = group.letters()
    for _ in range(L):
        nxt = []
        for g in frontier:
            w = seen[g]
            for name, sign in letters:
                h = g * group.letter(name, sign)
                if h not in seen:
                    seen[h] = w + Word.gen(name, sign)
                    out.append((h, seen[h]))
                    nxt.append(h)
        frontier = nxt
    return out


@dataclass
class OrbitBall:
    points: list
    witnesses: dict
    L: int
    closed: bool
    closed_at: int | None

    def __len__(self):
        return len(self.points)

    def to_dict(self, encode=_encode) -> dict:
        return {
            "L": self.L,
            "size": len(self.points),
            "closed": self.closed,
            "closed_at": self.closed_at,
            "points": [{"point": encode(p), "word": str(self.witnesses[p])} for p in self.points],
        }


def orbit_ball(action: ActionSpec, x, L: int, strict: bool = True) -> OrbitBall:
    """``{w.x : |w| <= L}`` with a shortest witness per point, sorted by encoding.

    ``closed`` is set when the breadth-first search ran out of new points
    before the budget, in which case the orbit is exactly the returned set.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    letters = action.group.letters()
    seen = {x: Word()}
    frontier = [x]
    closed_at = None
    for d in range(L):
        nxt = []
        for p in frontier:
            for name, sign in letters:
                try:
                    img = action.act(action.group.letter(name, sign), p)
                except DepthExceeded:
                    if strict:
                        raise
                    continue
                if img not in seen:
                    seen[img] = Word.gen(name, sign) + seen[p]
                    nxt.append(img)
        if not nxt:
            closed_at = d
            break
        frontier = nxt
    points = sorted(seen, key=action.encode)
    return OrbitBall(points, seen, L, closed_at is not None, closed_at)


@dataclass
class StabilizerOrbitProfile:
    x: str
    y: str
    sizes: list[int]
    stabilized_at: int | None

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "L": list(range(len(self.sizes))),
            "sizes": self.sizes,
            "stabilized": self.stabilized,
            "stabilized_at": self.stabilized_at,
            "strictly_increasing": all(a < b for a, b in zip(self.sizes, self.sizes[1:])),
        }


def stabilizer_orbit_profile(action: ActionSpec, x, y, L_max: int) -> StabilizerOrbitProfile:
    """Orbit of ``y`` under ``{g : |g| <= L, g.x = x}`` for ``L = 0..L_max``."""
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    ball = word_ball(action.group, L_max)
    orbit: set = set()
    sizes = []
    idx = 0
    for L in range(L_max + 1):
        while idx < len(ball) and len(ball[idx][1]) <= L:
            g = ball[idx][0]
            if action.act(g, x) == x:
                orbit.add(action.act(g, y))
            idx += 1
        sizes.append(len(orbit))
    stab = next((L for L in range(1, L_max + 1) if sizes[L] == sizes[L - 1]), None)
    return StabilizerOrbitProfile(action.encode(x), action.encode(y), sizes, stab)


# --------------------------------------------------------------------------
# subgroups and coset spaces


@dataclass(frozen=True)
class Subgroup:
    """A subgroup given by a membership oracle.

    ``generators`` (elements of the ambient group) are only needed when the
    subgroup has to act, e.g. for double cosets. ``coset_key`` gives a
    canonical key for ``gH``; without it cosets are told apart by pairwise
    membership tests.
    """

    name: str
    contains: Callable[[Any], bool] | None
    generators: tuple = ()
    coset_key: Callable[[Any], Hashable] | None = None
    key_rep: Callable[[Hashable], Any] | None = None

    def member(self, g) -> bool:
        if self.contains is None:
            raise NoMembershipOracle(f"subgroup {self.name} has no membership oracle")
        return self.contains(g)


@dataclass(frozen=True)
class Coset:
    """The coset ``rep * H``; equality and hashing use ``key`` only."""

    key: Hashable
    rep: Any = field(compare=False, hash=False)


class CosetSpace:
    """The left ``G``-set ``G/H``."""

    def __init__(self, group: MarkedGroup, sub: Subgroup, encode: Callable | None = None):
        if sub.contains is None and sub.coset_key is None:
            raise NoMembershipOracle(f"subgroup {sub.name} has no membership oracle")
        self.group = group
        self.sub = sub
        self._reps: list = []
        self._encode = encode

    def coset(self, g) -> Coset:
        if self.sub.coset_key is not None:
            key = self.sub.coset_key(g)
            rep = self.sub.key_rep(key) if self.sub.key_rep is not None else g
            return Coset(key, rep)
        ginv = g.inverse()
        for i, r in enumerate(self._reps):
            if self.sub.member(ginv * r):
                return Coset(i, r)
        self._reps.append(g)
        return Coset(len(self._reps) - 1, g)

    def base(self) -> Coset:
        return self.coset(self.group.identity())

    def act(self, g, c: Coset) -> Coset:
        return self.coset(g * c.rep)

    def encode(self, c: Coset) -> str:
        if self._encode is not None:
            return self._encode(c)
        if self.sub.coset_key is not None:
            return _encode(c.key)
        return f"#{c.key}"

    def action(self) -> ActionSpec:
        return ActionSpec(self.group, self.act, self.encode, name=f"G/{self.sub.name}")


@dataclass
class DoubleCosetDecomposition:
    generator: str
    reps: list
    codes: list[str]
    L: int
    stabilized: bool

    @property
    def l(self) -> int:
        return len(self.reps)

    def to_dict(self) -> dict:
        return {"generator": self.generator, "l": self.l, "cosets": self.codes, "L": self.L, "stabilized": self.stabilized}


def _sub_orbit(space: CosetSpace, gens: Sequence, start: Coset, L: int) -> tuple[list, list[int]]:
    """Orbit of ``start`` under words of length ``<= L`` in ``gens``; sizes per length."""
    letters = [g for g in gens] + [g.inverse() for g in gens]
    seen = {start: start}
    frontier = [start]
    sizes = [1]
    for _ in range(L):
        nxt = []
        for c in frontier:
            for g in letters:
                img = space.act(g, c)
                if img not in seen:
                    seen[img] = img
                    nxt.append(img)
        frontier = nxt
        sizes.append(len(seen))
    return list(seen), sizes


def double_coset_decomposition(space: CosetSpace, s: str | Any, L: int = 6) -> DoubleCosetDecomposition:
    """Left cosets ``g_i H`` inside ``H s H`` found as the ``H``-orbit of ``sH``."""
    if space.sub.contains is None and space.sub.coset_key is None:
        raise NoMembershipOracle(space.sub.name)
    if isinstance(s, str):
        name, g = s, space.group.evaluate(s)
    else:
        name, g = str(s), s
    start = space.coset(g)
    cosets, sizes = _sub_orbit(space, space.sub.generators, start, L + 1)
    stabilized = sizes[L] == sizes[L + 1]
    cosets.sort(key=space.encode)
    return DoubleCosetDecomposition(name, [c.rep for c in cosets], [space.encode(c) for c in cosets], L, stabilized)


def _labels_for(action: ActionSpec, points: Iterable) -> dict:
    out = {}
    for p in points:
        for name, sign in action.group.letters():
            try:
                out[(p, name, sign)] = action.act(action.group.letter(name, sign), p)
            except DepthExceeded:
                pass
    return out


def _relabel(ball: GraphBall, labels: dict) -> GraphBall:
    ball.labels = {
        (ball.index[p], name, sign): ball.index.get(img, -1)
        for (p, name, sign), img in labels.items()
    }
    return ball


def double_coset_graph(space: CosetSpace, S: Sequence[str], R: int, L: int = 6) -> GraphBall:
    """Ball around ``H`` of the graph with ``fH -- gH`` iff ``g^-1 f`` lies in some ``HsH``.

    Each ``HsH`` is cut into left cosets first; the neighbours of ``fH`` are
    then ``f g_i H``. ``S`` is given as signed words (``"a"``, ``"t^-1"``...)
    and must be symmetric. The ``G``-action is checked to preserve edges
    inside the radius-(R-1) interior.
    """
    words = [Word.parse(s) for s in S]
    if any(len(w) == 0 for w in words):
        raise ValueError("the identity is not allowed in S")
    if {str(w.inverse()) for w in words} != {str(w) for w in words}:
        raise ValueError("S must be symmetric")
    reps = []
    for s in S:
        dec = double_coset_decomposition(space, s, L)
        if not dec.stabilized:
            raise CommensurationNotCertified(f"H{s}H did not stabilize at L={L}")
        reps.extend(dec.reps)

    def nbrs(c: Coset):
        return [space.coset(c.rep * g) for g in reps]

    ball = build_ball(space.base(), nbrs, R, encode=space.encode)
    action = space.action()
    _relabel(ball, _labels_for(action, ball.points))
    _check_automorphisms(ball, action, nbrs)
    return ball


def _check_automorphisms(ball: GraphBall, action: ActionSpec, nbrs) -> None:
    inner = set(ball.within(ball.radius - 1))
    for i, j in ball.edges():
        if i not in inner or j not in inner:
            continue
        u, v = ball.points[i], ball.points[j]
        for name in action.group.names:
            g = action.group[name]
            gu, gv = action.act(g, u), action.act(g, v)
            if gv not in set(nbrs(gu)):
                raise AssertionError(f"{name} does not preserve the edge {ball.codes[i]} -- {ball.codes[j]}")


def _cross_reps(spaces: Sequence[CosetSpace], i: int, j: int, L: int) -> list:
    """Representatives ``h`` (in ``H_i``) of the ``H_i``-orbit of the base coset of ``G/H_j``."""
    cosets, sizes = _sub_orbit(spaces[j], spaces[i].sub.generators, spaces[j].base(), L + 1)
    if sizes[L] != sizes[L + 1]:
        raise CommensurationNotCertified(f"H_{i + 1}-orbit of H_{j + 1} not closed at L={L}")
    return [c.rep for c in sorted(cosets, key=spaces[j].encode)]


def multi_orbit_graph(spaces: Sequence[CosetSpace], S: Sequence[str], R: int, L: int = 6) -> GraphBall:
    """Disjoint union of the coset graphs of ``G/H_1, ..., G/H_k`` plus cross edges.

    ``gH_i`` is joined to ``gH_(i+1)`` for every ``g``; the neighbours of
    ``fH_i`` on the next orbit are ``f h H_(i+1)`` for ``h`` ranging over
    ``H_i``, which is a finite set exactly when the two subgroups are
    commensurate.
    """
    if len(spaces) == 1:
        return double_coset_graph(spaces[0], S, R, L)
    intra = []
    for sp in spaces:
        reps = []
        for s in S:
            dec = double_coset_decomposition(sp, s, L)
            if not dec.stabilized:
                raise CommensurationNotCertified(f"H{s}H did not stabilize at L={L}")
            reps.extend(dec.reps)
        intra.append(reps)
    up = [_cross_reps(spaces, i, i + 1, L) for i in range(len(spaces) - 1)]
    down = [_cross_reps(spaces, i + 1, i, L) for i in range(len(spaces) - 1)]

    def nbrs(v):
        i, c = v
        out = [(i, spaces[i].coset(c.rep * g)) for g in intra[i]]
        if i + 1 < len(spaces):
            out += [(i + 1, spaces[i + 1].coset(c.rep * h)) for h in up[i]]
        if i > 0:
            out += [(i - 1, spaces[i - 1].coset(c.rep * h)) for h in down[i - 1]]
        return out

    def enc(v):
        return f"{v[0] + 1}|{spaces[v[0]].encode(v[1])}"

    return build_ball((0, spaces[0].base()), nbrs, R, encode=enc)


# --------------------------------------------------------------------------
# Schlichting shadows and commensuration


@dataclass
class SchlichtingQuotientReport:
    window: list[str]
    counts: list[int]
    stabilized_at: int | None
    compact: bool
    compact_evidence: dict | None
    discrete: bool
    discrete_evidence: dict | None

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "L": list(range(len(self.counts))),
            "counts": self.counts,
            "stabilized": self.stabilized,
            "stabilized_at": self.stabilized_at,
            "flags": {
                "compact": self.compact,
                "compact_evidence": self.compact_evidence,
                "discrete": self.discrete,
                "discrete_evidence": self.discrete_evidence,
            },
        }


def schlichting_quotient(action: ActionSpec, window: Sequence, L_max: int) -> SchlichtingQuotientReport:
    """Distinct restrictions ``g|_W`` over ``|g| <= L`` for each ``L``.

    Compactness is flagged when the orbit of some window point closes within
    the budget; discreteness when some window point has a stabilizer (among
    the explored elements) that restricts trivially to the whole window.
    Both flags carry the ``(L, W)`` they were read at.
    """
    if not window:
        raise ValueError("window must be non-empty")
    W = sorted(set(window), key=action.encode)
    ball = word_ball(action.group, L_max)
    seen: set = set()
    counts = []
    idx = 0
    restrictions = []
    for L in range(L_max + 1):
        while idx < len(ball) and len(ball[idx][1]) <= L:
            g = ball[idx][0]
            r = tuple(action.act(g, p) for p in W)
            restrictions.append(r)
            seen.add(r)
            idx += 1
        counts.append(len(seen))
    stab = next((L for L in range(1, L_max + 1) if counts[L] == counts[L - 1]), None)

    compact_ev = None
    for p in W:
        orb = orbit_ball(action, p, L_max, strict=False)
        if orb.closed:
            compact_ev = {"point": action.encode(p), "orbit_size": len(orb), "L": L_max}
            break
    identity = tuple(W)
    discrete_ev = None
    for k, p in enumerate(W):
        if all(r == identity for r in restrictions if r[k] == p):
            discrete_ev = {"point": action.encode(p), "L": L_max, "window_size": len(W)}
            break
    return SchlichtingQuotientReport(
        [action.encode(p) for p in W], counts, stab,
        compact_ev is not None, compact_ev, discrete_ev is not None, discrete_ev,
    )


@dataclass
class CommensurationIndex:
    index: int
    L: int
    stabilized: bool
    sizes: list[int]

    def to_dict(self) -> dict:
        return {"index": self.index, "L": self.L, "stabilized": self.stabilized, "sizes": self.sizes}


def commensuration_index(space_K: CosetSpace, H_gens: Sequence, L: int = 12) -> CommensurationIndex:
    """``[H : H n K]`` as the size of the ``H``-orbit of the coset ``K`` in ``G/K``."""
    _, sizes = _sub_orbit(space_K, H_gens, space_K.base(), L)
    return CommensurationIndex(sizes[-1], L, sizes[-1] == sizes[-2] if L >= 1 else False, sizes)


# --------------------------------------------------------------------------
# subgroup chains and coset rooted trees


@dataclass
class SubgroupChain:
    """``Lambda = Lambda_0 > Lambda_1 > ... > Lambda_d`` with transversals.

    ``terms[i]`` tests membership in ``Lambda_i``; ``transversals[i]``
    lists representatives of ``Lambda_i / Lambda_(i+1)`` with the identity
    first.
    """

    ambient: MarkedGroup
    terms: list[Callable[[Any], bool]]
    transversals: list[list]
    info: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.transversals)

    @property
    def indices(self) -> list[int]:
        return [len(t) for t in self.transversals]

    def verify(self) -> bool:
        for i, T in enumerate(self.transversals):
            for r in T:
                if not self.terms[i](r):
                    return False
            for x in range(len(T)):
                for y in range(x + 1, len(T)):
                    if self.terms[i + 1](T[x].inverse() * T[y]):
                        return False
        return True

    def address(self, g, level: int | None = None) -> tuple[int, ...]:
        """Digits of ``g Lambda_n`` read through the transversals."""
        n = self.depth if level is None else level
        if n > self.depth:
            raise DepthExceeded(f"chain has depth {self.depth}, asked for level {n}")
        out = []
        for i in range(n):
            for c, r in enumerate(self.transversals[i]):
                h = r.inverse() * g
                if self.terms[i + 1](h):
                    out.append(c)
                    g = h
                    break
            else:
                raise IndexMismatch(f"no transversal digit at level {i}")
        return tuple(out)

    def rep(self, addr: Sequence[int]):
        g = self.ambient.identity()
        for i, c in enumerate(addr):
            g = g * self.transversals[i][c]
        return g


@dataclass
class CosetRootedTree:
    chain: SubgroupChain
    q: int
    portraits: dict[str, RootedTreePortrait]
    level_transitive: list[bool]
    action: ActionSpec

    @property
    def depth(self) -> int:
        return self.chain.depth

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "depth": self.depth,
            "indices": self.chain.indices,
            "level_transitive": self.level_transitive,
            "portraits": {k: str(v) for k, v in sorted(self.portraits.items())},
        }


def _addresses(q: int, n: int):
    if n == 0:
        yield ()
        return
    for a in _addresses(q, n - 1):
        for c in range(q):
            yield a + (c,)


def coset_rooted_tree(chain: SubgroupChain) -> CosetRootedTree:
    """Rooted ``q``-ary tree on ``Lambda/Lambda_n``, with ``g Lambda_(n+1)`` below ``g Lambda_n``."""
    if chain.depth < 1:
        raise IndexMismatch("chain depth must be >= 1")
    q = chain.indices[0]
    if any(i != q for i in chain.indices):
        raise IndexMismatch(f"indices {chain.indices} are not all equal")
    d = chain.depth

    def evaluator(g, addr):
        addr = tuple(addr)
        if len(addr) > d:
            raise DepthExceeded(f"address {addr} deeper than {d}")
        return chain.address(g * chain.rep(addr), len(addr))

    group = chain.ambient
    portraits = {}
    for name in group.names:
        g = group[name]
        perms = {}
        for n in range(d):
            for u in _addresses(q, n):
                perms[u] = tuple(evaluator(g, u + (c,))[-1] for c in range(q))
        portraits[name] = RootedTreePortrait.from_mapping(q, d, perms)
    level_ok = []
    for n in range(1, d + 1):
        orb = {(0,) * n}
        frontier = list(orb)
        while frontier:
            nxt = []
            for a in frontier:
                for p in portraits.values():
                    for img in (p(a), p.preimage(a)):
                        if img not in orb:
                            orb.add(img)
                            nxt.append(img)
            frontier = nxt
        level_ok.append(len(orb) == q**n)
    action = ActionSpec(group, evaluator, encode=_encode, name="coset-tree", depth=d)
    return CosetRootedTree(chain, q, portraits, level_ok, action)


def _sorted_q(elems: Iterable[Matrix2]) -> list[Matrix2]:
    return sorted(elems, key=lambda m: m.entries())


def _closure(gens: Iterable[Matrix2], identity: Matrix2) -> frozenset:
    out = {identity}
    frontier = [identity]
    gens = list(gens)
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = x * g
                if y not in out:
                    out.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(out)


def _is_identity_mod(m: Matrix2, modulus: int) -> bool:
    return (m.a - 1) % modulus == 0 and m.b % modulus == 0 and m.c % modulus == 0 and (m.d - 1) % modulus == 0


MAX_CHAIN_DEPTH = 3


def congruence_two_chain(n: int) -> SubgroupChain:
    """An index-2 chain through the congruence kernels of ``<A, B>`` mod ``2**n``.

    ``Q_n`` is enumerated by closing ``{A, B}`` mod ``2**n``. Each step
    passes from ``K`` to the kernel of a character ``K -> Z/2`` that is
    trivial on squares, commutators and the next congruence kernel ``N``;
    characters are written as value vectors on the greedy basis of ``K / M``
    over sorted elements, and the least nonzero one, ``(0, ..., 0, 1)``, is
    taken. Terms are pulled back to integer
    matrices by reduction.
    """
    if n > MAX_CHAIN_DEPTH:
        raise DepthGuard(f"n={n} exceeds the enumeration guard {MAX_CHAIN_DEPTH}")
    if n < 1:
        raise ValueError("n must be >= 1")
    mod = 2**n
    F2 = sanov_group()
    ident = Matrix2(1, 0, 0, 1, mod)
    # BFS closure with shortest words
    words = {ident: Word()}
    frontier = [ident]
    while frontier:
        nxt = []
        for x in frontier:
            for name, sign in F2.letters():
                y = x * F2.letter(name, sign).reduce(mod)
                if y not in words:
                    words[y] = words[x] + Word.gen(name, sign)
                    nxt.append(y)
        frontier = nxt
    Q = frozenset(words)
    if len(Q) & (len(Q) - 1):
        raise NotTwoGroup(f"|Q_{n}| = {len(Q)} is not a power of 2")
    kernels = [frozenset(g for g in Q if _is_identity_mod(g, 2**m)) for m in range(1, n + 1)]
    if kernels[0] != Q:
        raise NotTwoGroup("generators are not congruent to I mod 2")
    terms_q: list[frozenset] = [Q]
    K = Q
    for N in kernels[1:]:
        while K != N:
            gens = [x * x for x in K] + [x * y * x.inverse() * y.inverse() for x in K for y in K] + list(N)
            M = _closure(set(gens), ident)
            basis: list[Matrix2] = []
            span = M
            for g in _sorted_q(K):
                if g not in span:
                    basis.append(g)
                    span = _closure(set(M) | set(basis), ident)
            if not basis:
                raise NotTwoGroup("trivial Frattini quotient")
            K2 = _closure(set(M) | set(basis[:-1]), ident)
            if 2 * len(K2) != len(K):
                raise NotTwoGroup("character kernel has index != 2")
            terms_q.append(K2)
            K = K2
    transversals = []
    for i in range(len(terms_q) - 1):
        least = _sorted_q(terms_q[i] - terms_q[i + 1])[0]
        transversals.append([F2.identity(), F2.evaluate(words[least])])

    def member(S):
        return lambda g: g.reduce(mod) in S

    chain = SubgroupChain(F2, [member(S) for S in terms_q], transversals)
    chain.info = {
        "n": n,
        "order_Q": len(Q),
        "term_orders": [len(S) for S in terms_q],
        "kernel_positions": [terms_q.index(Kn) for Kn in kernels],
        "transversal_words": [str(words[_sorted_q(terms_q[i] - terms_q[i + 1])[0]]) for i in range(len(terms_q) - 1)],
    }
    return chain


def integer_chain(q: int, d: int) -> SubgroupChain:
    """``Z > qZ > q^2 Z > ...`` for the translation group ``<a>``."""
    Z = z_group()
    terms = [(lambda g, m=q**i: _z_value(g) % m == 0) for i in range(d + 1)]
    transversals = [[Z.evaluate(f"a^{c * q ** i}") if c else Z.identity() for c in range(q)] for i in range(d)]
    return SubgroupChain(Z, terms, transversals)


# --------------------------------------------------------------------------
# stock actions


def z_group() -> MarkedGroup:
    """Z as the translations ``x -> x + n`` (base 2 affine carrier)."""
    return MarkedGroup.of({"a": AffineElement(0, QDyadic(1, 0, 2), 2)})


def _z_value(g: AffineElement) -> int:
    if g.k != 0 or not g.mu.is_integer():
        raise ValueError(f"{g} is not an integer translation")
    return g.mu.num


def z_subgroup(n: int) -> Subgroup:
    Z = z_group()
    return Subgroup(
        f"{n}Z",
        lambda g: _z_value(g) % n == 0 if n else _z_value(g) == 0,
        (Z.evaluate(f"a^{n}"),) if n else (),
        lambda g: _z_value(g) % n if n else _z_value(g),
        lambda key: Z.evaluate(f"a^{key}") if key else Z.identity(),
    )


def line_action() -> ActionSpec:
    return ActionSpec(z_group(), lambda g, n: n + _z_value(g), encode=str, name="Z on Z")


def _z_component_encode(p) -> str:
    n, i = p
    return f"Z:{i}" if n == 0 else f"Z/{n}:{i}"


def z_components_action(moduli: Sequence[int]) -> ActionSpec:
    """Z acting on a disjoint union of cyclic sets ``Z/n`` (``n = 0`` for Z itself)."""
    def ev(g, p):
        n, i = p
        j = i + _z_value(g)
        return (n, j % n if n else j)

    return ActionSpec(z_group(), ev, encode=_z_component_encode, name="Z on " + " + ".join(
        "Z" if n == 0 else f"Z/{n}" for n in moduli))


def z_components_points(moduli: Sequence[int]) -> list:
    return [(n, i) for n in moduli if n for i in range(n)]


def odometer_action(q: int, d: int) -> ActionSpec:
    """Z acting on depth-``d`` addresses through the odometer."""
    group = MarkedGroup.of({"a": odometer(q, d)})

    def ev(g, addr):
        return g(tuple(addr))

    return ActionSpec(group, ev, encode=_encode, name=f"odometer(q={q},d={d})", depth=d)


def bs_real_action(q: int) -> ActionSpec:
    """BS(1, q) on Z[1/q] by affine maps."""
    return ActionSpec(bs_group(q), lambda g, x: g(x), encode=str, name=f"BS(1,{q}) on Z[1/{q}]")


def _bs_key(g: AffineElement):
    return (g.k, g.mu.mod_power(g.k))


def bs_vertex(q: int, k: int, mu) -> Coset:
    """The coset ``g<a>`` with ``g = (k, mu)``, i.e. ``x -> q^k x + mu``."""
    g = AffineElement(k, mu if isinstance(mu, QDyadic) else QDyadic.from_fraction(Fraction(mu), q), q)
    k, m = _bs_key(g)
    return Coset((k, m), AffineElement(k, m, q))


def bs_subgroup(q: int) -> Subgroup:
    """``H = <a>`` in BS(1, q), with cosets keyed by ``(k, mu mod q^k)``."""
    G = bs_group(q)
    return Subgroup(
        "<a>",
        lambda g: g.k == 0 and g.mu.is_integer(),
        (G["a"],),
        _bs_key,
        lambda key: AffineElement(key[0], key[1], q),
    )


def bs_vertex_encode(c: Coset) -> str:
    k, mu = c.key
    return f"[{k};{mu}]"


def bs_coset_space(q: int) -> CosetSpace:
    return CosetSpace(bs_group(q), bs_subgroup(q), encode=bs_vertex_encode)


def bs_tree_action(q: int) -> ActionSpec:
    """BS(1, q) on the vertices ``G/<a>`` of its Bass-Serre tree.

    The translations fixing ``x_n = t^n <a>`` are exactly ``x -> x + c`` with
    ``c`` in ``q**-n * Z``.
    """
    return bs_coset_space(q).action()


def bs_ray(q: int, R: int) -> list[Coset]:
    """``x_n = t^n <a>`` for ``n = 0..R``."""
    return [bs_vertex(q, -n, 0) for n in range(R + 1)]


def bs_tree_neighbors(q: int):
    def nbrs(c: Coset):
        k, mu = c.key
        out = [bs_vertex(q, k - 1, mu)]
        step = Fraction(q) ** k
        out.extend(bs_vertex(q, k + 1, mu.to_fraction() + s * step) for s in range(q))
        return out

    return nbrs


def bs_tree_ball(q: int, R: int) -> GraphBall:
    """Bass-Serre tree ball of BS(1, q) around ``x_0`` in the affine coset model."""
    ball = build_ball(bs_vertex(q, 0, 0), bs_tree_neighbors(q), R, encode=bs_vertex_encode)
    return _relabel(ball, _labels_for(bs_tree_action(q), ball.points))


def sanov_A_subgroup() -> Subgroup:
    """``<A>`` in ``<A, B>``: upper unitriangular with even corner; cosets keyed by first column."""
    F2 = sanov_group()
    return Subgroup(
        "<A>",
        lambda m: m.a == 1 and m.c == 0 and m.d == 1,
        (F2["A"],),
        lambda m: (m.a, m.c),
        None,
    )


def free_coset_space() -> CosetSpace:
    return CosetSpace(sanov_group(), sanov_A_subgroup(), encode=lambda c: f"({c.key[0]},{c.key[1]})")


def left_regular_action(group: MarkedGroup) -> ActionSpec:
    return ActionSpec(group, lambda g, h: g * h, encode=_encode, name="left-regular")
