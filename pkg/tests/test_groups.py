from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amenact.errors import DepthExceeded, KindMismatch, NotInImage, UnknownGenerator
from amenact.groups import (
    AffineAlpha,
    AffineElement,
    HeisenbergAlpha,
    HeisenbergElement,
    Matrix2,
    QDyadic,
    RootedTreePortrait,
    Word,
    act,
    alpha_apply,
    alpha_preimage,
    bs_group,
    compose,
    heisenberg_group,
    invert,
    odometer,
    sanov_group,
)

GROUPS = {
    "bs2": bs_group(2),
    "bs3": bs_group(3),
    "heis": heisenberg_group(),
    "f2": sanov_group(),
    "f2mod8": sanov_group(8),
}


def words(group, max_len=8):
    letters = group.letters()
    return st.lists(st.sampled_from(letters), max_size=max_len).map(lambda ls: Word(tuple(ls)))


def brute_heis(*factors):
    # independent 3x3 upper unitriangular matrix product
    def mat(h):
        return [[1, h.x, h.z], [0, 1, h.y], [0, 0, 1]]

    out = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    for h in factors:
        m = mat(h)
        out = [[sum(out[i][k] * m[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    return HeisenbergElement(out[0][1], out[0][2], out[1][2])


class TestExamples:
    def test_heisenberg_product(self):
        assert HeisenbergElement(1, 0, 0) * HeisenbergElement(0, 0, 1) == HeisenbergElement(1, 1, 1)

    def test_affine_identity_left(self):
        g = AffineElement(3, Fraction(5, 8), 2)
        assert compose(g.identity(), g) == g

    def test_relation_t_inverse_a_t(self):
        G = bs_group(2)
        assert G.evaluate("t^-1.a.t") == AffineElement(0, 2, 2)
        assert G.evaluate("t^-1.a.t") == G.evaluate("a^2")

    def test_empty_word(self):
        for G in GROUPS.values():
            assert G.evaluate(Word()).is_identity()
            assert G.evaluate("").is_identity()

    def test_heisenberg_commutator(self):
        A, B = HeisenbergElement(1, 0, 0), HeisenbergElement(0, 0, 1)
        w = heisenberg_group().evaluate("A.B.A^-1.B^-1")
        assert w == HeisenbergElement(0, 1, 0)
        assert w == brute_heis(A, B, A.inverse(), B.inverse())

    def test_affine_actions(self):
        G = bs_group(2)
        assert act(G["a"], 0).to_fraction() == 1
        assert act(G["t"], 1).to_fraction() == Fraction(1, 2)

    def test_odometer_carry(self):
        od = odometer(2, 3)
        assert od((1, 1, 1)) == (0, 0, 0)
        assert od("111") == "000"
        # add one with carry, least significant digit first
        for n in range(8):
            bits = tuple((n >> i) & 1 for i in range(3))
            nxt = tuple(((n + 1) % 8 >> i) & 1 for i in range(3))
            assert od(bits) == nxt

    def test_heisenberg_alpha(self):
        al = HeisenbergAlpha()
        assert alpha_apply(al, HeisenbergElement(1, 1, 1)) == HeisenbergElement(2, 4, 2)
        assert alpha_preimage(al, HeisenbergElement(2, 4, 2)) == HeisenbergElement(1, 1, 1)
        assert not al.in_image(HeisenbergElement(1, 0, 0))
        with pytest.raises(NotInImage):
            al.preimage(HeisenbergElement(1, 0, 0))

    @pytest.mark.parametrize("q", [2, 3, 5])
    def test_defining_relation(self, q):
        G = bs_group(q)
        assert G.evaluate("t^-1.a.t") == G.evaluate(f"a^{q}")


class TestErrors:
    def test_kind_mismatch(self):
        with pytest.raises(KindMismatch):
            compose(HeisenbergElement(1, 0, 0), AffineElement(0, 1, 2))
        with pytest.raises(KindMismatch):
            AffineElement(0, 1, 2) * AffineElement(0, 1, 3)

    def test_unknown_generator(self):
        with pytest.raises(UnknownGenerator):
            bs_group(2).evaluate("b")

    def test_portrait_depth(self):
        od = odometer(2, 3)
        with pytest.raises(DepthExceeded):
            od((0, 0, 0, 0))
        with pytest.raises(DepthExceeded):
            od * odometer(2, 4)

    def test_not_dyadic(self):
        with pytest.raises(ValueError):
            QDyadic.from_fraction(Fraction(1, 3), 2)


class TestParsing:
    def test_roundtrips(self):
        g = AffineElement(-2, Fraction(3, 4), 2)
        assert AffineElement.parse(str(g)) == g
        h = HeisenbergElement(-1, 5, 2)
        assert HeisenbergElement.parse(str(h)) == h
        assert QDyadic.parse(str(QDyadic(7, 3, 3)), 3) == QDyadic(7, 3, 3)

    def test_word_parse(self):
        assert Word.parse("a^3.t^-1") == Word((("a", 1),) * 3 + (("t", -1),))
        assert Word.parse("a.a^-1.t").reduced() == Word.gen("t")
        assert Word.parse("t.a.t^-2").exponent_sum("t") == -1


# properties


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(sorted(GROUPS)), st.data())
def test_associativity_and_inverse(name, data):
    G = GROUPS[name]
    g, h, k = (G.evaluate(data.draw(words(G))) for _ in range(3))
    assert compose(compose(g, h), k) == compose(g, compose(h, k))
    assert compose(g, invert(g)).is_identity()
    assert compose(invert(g), g).is_identity()


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from([2, 3]), st.data(), st.integers(-1000, 1000))
def test_affine_action_law(q, data, x):
    G = bs_group(q)
    g, h = (G.evaluate(data.draw(words(G))) for _ in range(2))
    p = QDyadic(x, data.draw(st.integers(0, 4)), q)
    assert act(g * h, p) == act(g, act(h, p))


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_portrait_action_law(data):
    q, d = data.draw(st.sampled_from([(2, 3), (3, 2), (2, 4)]))
    perms = st.permutations(list(range(q))).map(tuple)
    addrs = st.lists(st.integers(0, q - 1), max_size=d - 1).map(tuple)

    def portrait():
        return RootedTreePortrait.from_mapping(q, d, data.draw(st.dictionaries(addrs, perms, max_size=5)))

    g, h = portrait(), portrait()
    v = tuple(data.draw(st.lists(st.integers(0, q - 1), min_size=d, max_size=d)))
    assert act(g * h, v) == act(g, act(h, v))
    assert g.preimage(g(v)) == v
    assert (g * g.inverse()).is_identity()


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(-10**6, 10**6), st.integers(0, 12),
       st.integers(-10**6, 10**6), st.integers(0, 12))
def test_qdyadic_matches_fraction(q, n1, e1, n2, e2):
    x, y = QDyadic(n1, e1, q), QDyadic(n2, e2, q)
    # unreduced cross-multiplication oracle
    num_sum = n1 * q**e2 + n2 * q**e1
    den = q ** (e1 + e2)
    assert (x + y).to_fraction() * den == num_sum
    assert (x * y).to_fraction() * den == n1 * n2
    assert (x - y).to_fraction() * den == n1 * q**e2 - n2 * q**e1
    m = (x.mod_power(2)).to_fraction()
    assert 0 <= m < q**2 and (x.to_fraction() - m) % q**2 == 0


@settings(max_examples=1000, deadline=None)
@given(*(st.integers(-50, 50) for _ in range(6)))
def test_heisenberg_alpha_endomorphism(a, b, c, d, e, f):
    al = HeisenbergAlpha()
    g, h = HeisenbergElement(a, b, c), HeisenbergElement(d, e, f)
    assert al.apply(g * h) == al.apply(g) * al.apply(h)
    assert al.preimage(al.apply(g)) == g


@pytest.mark.parametrize("q", [2, 3])
def test_affine_alpha_endomorphism_exhaustive(q):
    al = AffineAlpha(q)
    a = bs_group(q)["a"]
    G = bs_group(q)
    for i in range(-20, 21):
        for j in range(-20, 21):
            gi, gj = G.evaluate(f"a^{i}"), G.evaluate(f"a^{j}")
            assert al.apply(gi * gj) == al.apply(gi) * al.apply(gj)
            # alpha is conjugation by t^-1
            assert al.apply(gi) == G["t"].inverse() * gi * G["t"]
    assert al.in_image(G.evaluate(f"a^{q}")) and not al.in_image(a)


def test_sanov_generators_free_at_small_length():
    # distinct reduced words of length <= 6 give distinct matrices
    G = sanov_group()
    rng = random.Random(3)
    seen = {}
    for _ in range(2000):
        w = G.random_word(rng, 6).reduced()
        m = G.evaluate(w)
        assert seen.setdefault(m, w) == w
    assert Matrix2(1, 2, 0, 1) == G["A"]
