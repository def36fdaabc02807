"""Ascending HNN extensions ``<H, t | t^-1 h t = alpha(h)>`` and their trees.

Elements are kept in the normal form ``t^n h t^-m`` (``n, m >= 0``), reduced
so that ``h`` is not in ``alpha(H)`` whenever both exponents are positive.
Vertices of the Bass-Serre tree ``G/H`` are encoded by the triple
``(n, m, digits)`` where the digits expand ``h`` modulo ``alpha^m(H)`` over a
fixed transversal of ``alpha(H)`` in ``H``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Any, Sequence

from .actions import ActionSpec, Coset, bs_vertex, orbit_ball
from .errors import (
    BudgetExceeded,
    DepthExceeded,
    NotLevelTransitive,
    TransversalIncomplete,
    TransversalRedundant,
)
from .graphs import GraphBall, build_ball, fixed_end_check, ray_shift
from .groups import (
    AffineAlpha,
    AffineElement,
    HeisenbergAlpha,
    HeisenbergElement,
    MarkedGroup,
    QDyadic,
    RootedTreePortrait,
    Word,
    heisenberg_group,
)

_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class AscendingHNN:
    name: str
    base: MarkedGroup
    alpha: Any
    transversal: tuple
    t: str = "t"
    certificate: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def q(self) -> int:
        return len(self.transversal)

    @property
    def e(self):
        return self.base.identity()

    def alpha_power(self, h, j: int):
        for _ in range(j):
            h = self.alpha.apply(h)
        return h

    def digit(self, h) -> int:
        for i, s in enumerate(self.transversal):
            if self.alpha.in_image(s.inverse() * h):
                return i
        raise TransversalIncomplete(f"{h} lies in no transversal coset")

    def digits(self, h, m: int) -> tuple[int, ...]:
        """``h = d_0 alpha(d_1) ... alpha^(m-1)(d_(m-1))`` modulo ``alpha^m(H)``."""
        out = []
        for _ in range(m):
            d = self.digit(h)
            out.append(d)
            h = self.alpha.preimage(self.transversal[d].inverse() * h)
        return tuple(out)

    def from_digits(self, digits: Sequence[int]):
        h = self.e
        for d in reversed(digits):
            h = self.transversal[d] * self.alpha.apply(h)
        return h

    # elements -------------------------------------------------------------

    def element(self, n: int, h, m: int) -> "HNNElement":
        return HNNElement(n, h, m, self).reduce()

    def identity(self) -> "HNNElement":
        return HNNElement(0, self.e, 0, self)

    def gen(self, name: str) -> "HNNElement":
        if name == self.t:
            return HNNElement(1, self.e, 0, self)
        return HNNElement(0, self.base[name], 0, self)

    def marked(self) -> MarkedGroup:
        gens = {name: self.gen(name) for name in self.base.names}
        gens[self.t] = self.gen(self.t)
        return MarkedGroup.of(gens, identity=self.identity())

    def normal_form(self, w: Word | str) -> "HNNElement":
        if isinstance(w, str):
            w = Word.parse(w)
        g = self.identity()
        for name, sign in w.letters:
            x = self.gen(name)
            g = g * (x if sign > 0 else x.inverse())
        return g

    # vertices -------------------------------------------------------------

    def vertex(self, g: "HNNElement") -> "CosetVertex":
        n, m, digits = g.n, g.m, self.digits(g.h, g.m)
        while n >= 1 and m >= 1 and digits[0] == 0:
            n, m, digits = n - 1, m - 1, digits[1:]
        return CosetVertex(n, m, digits)

    def rep(self, v: "CosetVertex") -> "HNNElement":
        return HNNElement(v.n, self.from_digits(v.digits), v.m, self)

    def act(self, g: "HNNElement", v: "CosetVertex") -> "CosetVertex":
        return self.vertex(g * self.rep(v))

    def x(self, n: int) -> "CosetVertex":
        """``x_n = t^n H``."""
        if n >= 0:
            return CosetVertex(n, 0, ())
        return CosetVertex(0, -n, (0,) * (-n))

    def neighbors(self, v: "CosetVertex") -> list["CosetVertex"]:
        g = self.rep(v)
        tg = self.gen(self.t)
        out = [self.vertex(g * tg)]
        tinv = tg.inverse()
        for s in self.transversal:
            out.append(self.vertex(g * HNNElement(0, s, 0, self) * tinv))
        return out

    def action(self) -> ActionSpec:
        return ActionSpec(self.marked(), self.act, encode=str, name=f"{self.name} on G/H")


@dataclass(frozen=True)
class HNNElement:
    """``t^n h t^-m``."""

    n: int
    h: Any
    m: int
    hnn: AscendingHNN = field(compare=False, hash=False, repr=False)

    kind = "hnn"

    def reduce(self) -> "HNNElement":
        n, h, m = self.n, self.h, self.m
        alpha = self.hnn.alpha
        while n >= 1 and m >= 1 and alpha.in_image(h):
            h = alpha.preimage(h)
            n, m = n - 1, m - 1
        return HNNElement(n, h, m, self.hnn)

    def __mul__(self, o: "HNNElement") -> "HNNElement":
        H = self.hnn
        if self.m <= o.n:
            j = o.n - self.m
            return HNNElement(self.n + j, H.alpha_power(self.h, j) * o.h, o.m, H).reduce()
        j = self.m - o.n
        return HNNElement(self.n, self.h * H.alpha_power(o.h, j), o.m + j, H).reduce()

    def inverse(self) -> "HNNElement":
        return HNNElement(self.m, self.h.inverse(), self.n, self.hnn).reduce()

    def identity(self) -> "HNNElement":
        return self.hnn.identity()

    def is_identity(self) -> bool:
        return self.n == 0 and self.m == 0 and self.h.is_identity()

    @property
    def theta(self) -> int:
        return self.n - self.m

    def __call__(self, v):
        return self.hnn.act(self, v)

    def __str__(self):
        return f"t^{self.n}*{self.h}*t^-{self.m}"

    def to_dict(self) -> dict:
        return {"n": self.n, "h": str(self.h), "m": self.m}


@dataclass(frozen=True, order=True)
class CosetVertex:
    n: int
    m: int
    digits: tuple[int, ...]

    @property
    def end_level(self) -> int:
        return self.n - self.m

    def __str__(self):
        return f"{self.n}:{self.m}:{''.join(_DIGITS[d] for d in self.digits)}"

    @classmethod
    def parse(cls, text: str) -> "CosetVertex":
        n, m, ds = text.split(":")
        return cls(int(n), int(m), tuple(int(c, 36) for c in ds))


# --------------------------------------------------------------------------
# builders


def build_bs(q: int) -> AscendingHNN:
    """BS(1, q) over ``H = <a>`` with ``alpha(a) = a^q`` and transversal ``{a^i}``."""
    if q < 2:
        raise ValueError("q must be >= 2")
    a = AffineElement(0, QDyadic(1, 0, q), q)
    base = MarkedGroup.of({"a": a})
    trans = [a.identity()]
    for _ in range(q - 1):
        trans.append(trans[-1] * a)
    return AscendingHNN(f"bs(1,{q})", base, AffineAlpha(q), tuple(trans))


HEIS_BOX = 8


@lru_cache(maxsize=None)
def heisenberg_transversal(box: int = HEIS_BOX) -> tuple[tuple[HeisenbergElement, ...], dict]:
    """Cosets of ``alpha(H)`` in ``H`` by union-find on a box.

    Points of ``|x|, |z|, |y| <= box`` are joined when they differ by right
    multiplication with ``alpha(A)``, ``alpha(B)`` or ``alpha([A, B])``. Each
    component's representative minimizes ``(|x| + |z| + |y|, (x, z, y))``.
    """
    rng = range(-box, box + 1)
    pts = list(product(rng, rng, rng))
    index = {p: i for i, p in enumerate(pts)}
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    alpha = HeisenbergAlpha()
    steps = [alpha.apply(HeisenbergElement(1, 0, 0)), alpha.apply(HeisenbergElement(0, 0, 1)),
             alpha.apply(HeisenbergElement(0, 1, 0))]
    steps += [s.inverse() for s in steps]
    for p in pts:
        g = HeisenbergElement(*p)
        for s in steps:
            h = g * s
            j = index.get((h.x, h.z, h.y))
            if j is not None:
                a, b = find(index[p]), find(j)
                if a != b:
                    parent[a] = b
    comps: dict[int, tuple] = {}
    for p in pts:
        r = find(index[p])
        key = (sum(map(abs, p)), p)
        if r not in comps or key < comps[r]:
            comps[r] = key
    reps = sorted(comps.values())
    trans = tuple(HeisenbergElement(*p) for _, p in reps)
    cert = {"box": box, "points": len(pts), "components": len(reps)}
    return trans, cert


def build_heisenberg_hnn() -> AscendingHNN:
    trans, cert = heisenberg_transversal()
    return AscendingHNN("heis", heisenberg_group(), HeisenbergAlpha(), trans, certificate=dict(cert))


# --------------------------------------------------------------------------
# balls, theta, index checks


@dataclass
class BassSerreBall:
    ball: GraphBall
    ray: list

    def to_dict(self) -> dict:
        return {**self.ball.to_dict(), "ray": [str(v) for v in self.ray]}


def tree_size(q: int, R: int) -> int:
    return 1 + (q + 1) * sum(q**i for i in range(R))


def bass_serre_ball(hnn: AscendingHNN, R: int, budget: int = 200_000) -> BassSerreBall:
    if R < 0:
        raise ValueError("R must be >= 0")
    size = tree_size(hnn.q, R)
    if size > budget:
        raise BudgetExceeded(f"ball of {size} vertices exceeds budget {budget}")
    ball = build_ball(hnn.x(0), hnn.neighbors, R, encode=str)
    G = hnn.marked()
    labels = {}
    for v in ball.points:
        for name, sign in G.letters():
            labels[(v, name, sign)] = hnn.act(G.letter(name, sign), v)
    ball.labels = {(ball.index[v], n, s): ball.index.get(img, -1) for (v, n, s), img in labels.items()}
    return BassSerreBall(ball, [hnn.x(n) for n in range(R + 1)])


def vertex_action(hnn: AscendingHNN, w: Word | str, v: CosetVertex) -> CosetVertex:
    return hnn.act(hnn.normal_form(w), v)


def theta(hnn: AscendingHNN, w: Word | str) -> int:
    return hnn.normal_form(w).theta


@dataclass
class ThetaReport:
    word: str
    exponent_sum: int
    normal_form: dict
    normal_form_theta: int
    ray_shift: int | None
    ray_n0: int | None

    @property
    def agree(self) -> bool:
        return self.exponent_sum == self.normal_form_theta == self.ray_shift

    def to_dict(self) -> dict:
        return {
            "word": self.word,
            "exponent_sum": self.exponent_sum,
            "normal_form": self.normal_form,
            "normal_form_theta": self.normal_form_theta,
            "ray_shift": self.ray_shift,
            "ray_n0": self.ray_n0,
            "agree": self.agree,
        }


def theta_report(hnn: AscendingHNN, w: Word | str, R: int = 14) -> ThetaReport:
    """Three independent readings of theta: letters, normal form, ray shift."""
    if isinstance(w, str):
        w = Word.parse(w)
    g = hnn.normal_form(w)
    ray = [hnn.x(n) for n in range(R + 1)]
    word_action = ActionSpec(hnn.marked(), lambda _, v: _act_word(hnn, w, v), encode=str)
    rs = ray_shift(word_action, ray, str(w), None)
    return ThetaReport(str(w), w.exponent_sum(hnn.t), g.to_dict(), g.theta, rs.shift, rs.n0)


def _act_word(hnn: AscendingHNN, w: Word, v: CosetVertex) -> CosetVertex:
    """Apply the letters of ``w`` one at a time, rightmost first."""
    for name, sign in reversed(w.letters):
        x = hnn.gen(name)
        v = hnn.act(x if sign > 0 else x.inverse(), v)
    return v


@dataclass
class IndexCertificate:
    q: int
    pairs_checked: int
    sample_size: int
    coverage: dict

    def to_dict(self) -> dict:
        return {"q": self.q, "pairs_checked": self.pairs_checked, "sample_size": self.sample_size, "coverage": self.coverage}


def verify_index(hnn: AscendingHNN, sample_size: int = 500, seed: int = 0, max_len: int = 10) -> IndexCertificate:
    """Check the transversal: pairwise inequivalent and covering a random sample."""
    T = hnn.transversal
    if len(T) < 2:
        raise TransversalIncomplete("index 1: alpha is onto, the extension is not properly ascending")
    pairs = 0
    for i in range(len(T)):
        for j in range(i + 1, len(T)):
            pairs += 1
            if hnn.alpha.in_image(T[i].inverse() * T[j]):
                raise TransversalRedundant(f"{T[i]} and {T[j]} share an alpha(H)-coset")
    rng = random.Random(seed)
    hits = [0] * len(T)
    for _ in range(sample_size):
        h = hnn.base.evaluate(hnn.base.random_word(rng, max_len))
        hits[hnn.digit(h)] += 1
    return IndexCertificate(len(T), pairs, sample_size, {str(T[i]): hits[i] for i in range(len(T))})


def core_triviality_evidence(hnn: AscendingHNN, sample: Sequence, N: int = 8) -> dict:
    """Least ``n <= N`` with ``h`` outside ``alpha^n(H)`` for each nontrivial sample element."""
    rows = []
    for h in sample:
        if h.is_identity():
            continue
        exit_level = next((n for n in range(1, N + 1) if not hnn.alpha.in_image_power(h, n)), None)
        rows.append({"element": str(h), "exit_level": exit_level, "inconclusive": exit_level is None})
    return {"N": N, "rows": rows, "all_exit": all(not r["inconclusive"] for r in rows)}


def to_affine(g: HNNElement) -> AffineElement:
    """Image of a BS(1, q) normal form in the affine model."""
    q = g.h.q
    t = AffineElement(-1, QDyadic(0, 0, q), q)
    return _power(t, g.n) * g.h * _power(t.inverse(), g.m)


def _power(x, k):
    out = x.identity()
    for _ in range(k):
        out = out * x
    return out


def to_affine_coset(v: CosetVertex, q: int) -> Coset:
    """Affine-model coset ``(m - n, s q^-n mod q^(m-n))`` with ``s = sum d_i q^i``."""
    s = sum(d * q**i for i, d in enumerate(v.digits))
    return bs_vertex(q, v.m - v.n, Fraction(s, q**v.n))


# --------------------------------------------------------------------------
# glued trees


@dataclass(frozen=True)
class GlueWord:
    """Element of the group generated by ``t`` and portrait syllables.

    Syllables are ``("t", +-1)`` or ``("L", portrait)``; adjacent portraits
    are multiplied out, identity portraits dropped and ``t t^-1`` cancelled,
    so the stored word is reduced with respect to the realization.
    """

    syllables: tuple = ()

    kind = "glue"

    @staticmethod
    def normalize(sylls) -> tuple:
        out: list = []
        for s in sylls:
            out.append(s)
            while out:
                top = out[-1]
                if top[0] == "L" and top[1].is_identity():
                    out.pop()
                elif len(out) >= 2 and top[0] == "L" and out[-2][0] == "L":
                    out[-2:] = [("L", out[-2][1] * top[1])]
                elif len(out) >= 2 and top[0] == "t" and out[-2] == ("t", -top[1]):
                    del out[-2:]
                else:
                    break
        return tuple(out)

    def __mul__(self, o: "GlueWord") -> "GlueWord":
        return GlueWord(GlueWord.normalize(self.syllables + o.syllables))

    def inverse(self) -> "GlueWord":
        return GlueWord(tuple(("t", -s[1]) if s[0] == "t" else ("L", s[1].inverse()) for s in reversed(self.syllables)))

    def identity(self) -> "GlueWord":
        return GlueWord()

    def is_identity(self) -> bool:
        return not self.syllables

    def __len__(self):
        return len(self.syllables)

    def __call__(self, v):
        for kind, x in reversed(self.syllables):
            v = _glue_t(v, x) if kind == "t" else _glue_portrait(x, v)
        return v

    def __str__(self):
        parts = [("t" if x > 0 else "t^-1") if k == "t" else str(x) for k, x in self.syllables]
        return ".".join(parts) or "e"


def _glue_t(v, sign):
    j, path = v
    return (j + sign, path)


def _glue_portrait(p: RootedTreePortrait, v):
    j, path = v
    if j >= 1:
        return v
    addr = (0,) * (-j) + tuple(path)
    img = p(addr)
    z = 0
    while z < len(img) and img[z] == 0:
        z += 1
    return (-z, tuple(img[z:]))


def glue_encode(v) -> str:
    j, path = v
    return f"{j}:{''.join(_DIGITS[c] for c in path)}"


def glue_neighbors(q: int):
    def nbrs(v):
        j, path = v
        if not path:
            return [(j - 1, ()), (j + 1, ())] + [(j, (c,)) for c in range(1, q)]
        return [(j, path[:-1])] + [(j, path + (c,)) for c in range(q)]

    return nbrs


@dataclass
class GlueSpec:
    q: int
    depth: int
    generators: dict[str, RootedTreePortrait]
    label: str = ""


@dataclass
class GlueResult:
    spec: GlueSpec
    action: ActionSpec
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def ball(self, R: int) -> GraphBall:
        return glue_ball(self.spec.q, R)

    def to_dict(self) -> dict:
        return {
            "label": self.spec.label,
            "q": self.spec.q,
            "depth": self.spec.depth,
            "generators": {k: str(v) for k, v in sorted(self.spec.generators.items())},
            "checks": self.checks,
            "passed": self.passed,
        }


def glue_ball(q: int, R: int) -> GraphBall:
    return build_ball((0, ()), glue_neighbors(q), R, encode=glue_encode)


def _level_orbits(q: int, d: int, gens: Sequence[RootedTreePortrait]) -> list[int]:
    sizes = []
    for n in range(1, d + 1):
        start = (0,) * n
        orb = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for a in frontier:
                for p in gens:
                    for img in (p(a), p.preimage(a)):
                        if img not in orb:
                            orb.add(img)
                            nxt.append(img)
            frontier = nxt
        sizes.append(len(orb))
    return sizes


def glue_construction(spec: GlueSpec, faithful_len: int = 4) -> GlueResult:
    """The group generated by the translation ``t`` and ``Lambda`` on ``T_q``.

    Vertices are ``(j, path)``: ``j`` indexes the axis vertex ``x_j`` and
    ``path`` the descent into an off-axis subtree (first step in
    ``1..q-1``). The half ``j <= 0`` is the rooted tree hanging from ``x_0``
    along its leftmost ray, where ``Lambda`` acts by portraits; ``Lambda``
    is trivial on ``j >= 1``. ``t`` shifts ``j`` by one and keeps paths.
    """
    q, d = spec.q, spec.depth
    if d < 2:
        raise DepthExceeded("glue construction needs depth >= 2")
    gens = dict(sorted(spec.generators.items()))
    for p in gens.values():
        if p.q != q or p.depth != d:
            raise DepthExceeded(f"portrait {p} does not match q={q}, d={d}")
    sizes = _level_orbits(q, d, list(gens.values()))
    for n, size in enumerate(sizes, start=1):
        if size != q**n:
            raise NotLevelTransitive(f"level {n}: orbit of size {size}, expected {q ** n}")

    marked = {"t": GlueWord((("t", 1),))}
    for name, p in gens.items():
        marked[name] = GlueWord(GlueWord.normalize([("L", p)]))
    group = MarkedGroup.of(marked, identity=GlueWord())
    action = ActionSpec(group, lambda g, v: g(v), encode=glue_encode, name=spec.label or "glue", depth=d)
    checks = {"level_transitive": {"passed": True, "orbit_sizes": sizes}}

    R = 2 * d
    ray = [(n, ()) for n in range(R + 1)]
    fe = fixed_end_check(action, ray, group.names, ball=glue_ball(q, R + 1))
    checks["fixed_end"] = {"passed": fe["end_fixed_at_truncation"], **fe}

    r = d // 2
    target = glue_ball(q, r)
    orb = orbit_ball(action, (0, ()), 4 * d, strict=False)
    missing = [target.codes[i] for i, p in enumerate(target.points) if p not in orb.witnesses]
    checks["ball_transitive"] = {"passed": not missing, "radius": r, "word_length": 4 * d, "missing": missing}

    checks["faithful_evidence"] = _faithfulness(group, q, d, faithful_len)
    return GlueResult(spec, action, checks)


def _faithfulness(group: MarkedGroup, q: int, d: int, max_len: int) -> dict:
    """Every realization-reduced nontrivial word of length ``<= max_len`` moves a vertex.

    Vertices are drawn from the radius ``d + max_len`` ball; a vertex counts
    for a word only if the word can be evaluated there without reading
    portraits below depth ``d``.
    """
    ball = glue_ball(q, d + max_len)
    letters = group.letters()
    words: dict = {}
    for L in range(1, max_len + 1):
        for combo in product(letters, repeat=L):
            if any(combo[i] == (combo[i + 1][0], -combo[i + 1][1]) for i in range(L - 1)):
                continue
            g = GlueWord()
            for name, sign in combo:
                g = g * group.letter(name, sign)
            if not g.is_identity() and g not in words:
                words[g] = ".".join(n if s > 0 else f"{n}^-1" for n, s in combo)
    failures = []
    for g, w in words.items():
        moved = False
        for v in ball.points:
            try:
                if g(v) != v:
                    moved = True
                    break
            except DepthExceeded:
                continue
        if not moved:
            failures.append(w)
    failures.sort()
    return {"passed": not failures, "max_word_length": max_len, "radius": d + max_len,
            "distinct_elements": len(words), "fixing_words": failures[:20]}


def odometer_glue(q: int, d: int) -> GlueSpec:
    from .groups import odometer

    return GlueSpec(q, d, {"a": odometer(q, d)}, label=f"glue(odometer:{q},{d})")


def f2_chain_glue(n: int) -> GlueSpec:
    from .actions import congruence_two_chain, coset_rooted_tree

    tree = coset_rooted_tree(congruence_two_chain(n))
    return GlueSpec(tree.q, tree.depth, dict(tree.portraits), label=f"glue(f2chain:{n})")
