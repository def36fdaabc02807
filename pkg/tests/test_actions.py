from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amenact.actions import (
    ActionSpec,
    CosetSpace,
    Subgroup,
    bs_coset_space,
    bs_real_action,
    bs_tree_action,
    bs_vertex,
    commensuration_index,
    congruence_two_chain,
    coset_rooted_tree,
    double_coset_decomposition,
    double_coset_graph,
    free_coset_space,
    integer_chain,
    left_regular_action,
    multi_orbit_graph,
    odometer_action,
    orbit_ball,
    schlichting_quotient,
    stabilizer_orbit_profile,
    word_ball,
    z_components_action,
    z_components_points,
    z_group,
    z_subgroup,
)
from amenact.errors import DepthGuard, NoMembershipOracle
from amenact.graphs import rooted_isomorphic
from amenact.groups import (
    AffineElement,
    HeisenbergAlpha,
    MarkedGroup,
    QDyadic,
    heisenberg_group,
    odometer,
    sanov_group,
)
from amenact.hnn import bass_serre_ball, build_bs

S_BS = ["a", "a^-1", "t", "t^-1"]


def z_space(n):
    return CosetSpace(z_group(), z_subgroup(n), encode=lambda c: str(c.key))


class TestOrbits:
    def test_bs_real_line(self):
        orb = orbit_ball(bs_real_action(2), QDyadic(0, 0, 2), 1)
        assert sorted(p.to_fraction() for p in orb.points) == [-1, 0, 1]

    def test_zero_budget(self):
        for action, x in [(bs_real_action(3), QDyadic(5, 1, 3)), (odometer_action(2, 3), (0, 1, 1))]:
            assert orbit_ball(action, x, 0).points == [x]

    def test_odometer_orbit(self):
        orb = orbit_ball(odometer_action(2, 3), (0, 0, 0), 8)
        assert sorted(orb.points) == sorted(itertools.product(range(2), repeat=3))
        assert orb.closed

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 5), st.integers(-4, 4))
    def test_orbit_monotone(self, L, x):
        action = bs_real_action(2)
        small = set(orbit_ball(action, QDyadic(x, 0, 2), L).points)
        big = set(orbit_ball(action, QDyadic(x, 0, 2), L + 1).points)
        assert small <= big


class TestStabilizerProfiles:
    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("n", [-2, -1, 0, 1, 2])
    def test_translation_stabilizer(self, q, n):
        # translations fixing x_n = t^n <a> form q^-n Z
        act = bs_tree_action(q)
        x = bs_vertex(q, -n, 0)
        for j in range(-4, 5):
            for c in (1, q - 1) if q > 2 else (1,):
                shift = AffineElement(0, QDyadic(c, -j, q), q)
                assert (act.act(shift, x) == x) == (j >= -n)

    @pytest.mark.parametrize("q", [2, 3])
    def test_bs_level_one(self, q):
        prof = stabilizer_orbit_profile(bs_tree_action(q), bs_vertex(q, 0, 0), bs_vertex(q, 1, 0), 6)
        assert prof.stabilized and prof.sizes[-1] == q
        # explicit orbit for q = 2: (1, 0) and (1, 1)
        if q == 2:
            assert prof.sizes[1] == 2

    def test_bs_level_two(self):
        prof = stabilizer_orbit_profile(bs_tree_action(2), bs_vertex(2, 0, 0), bs_vertex(2, 2, 0), 8)
        assert prof.sizes[-1] == 4

    def test_free_regular(self):
        G = sanov_group()
        prof = stabilizer_orbit_profile(left_regular_action(G), G.identity(), G["B"], 4)
        assert prof.sizes == [1] * 5

    def test_free_coset_space_grows(self):
        sp = free_coset_space()
        prof = stabilizer_orbit_profile(sp.action(), sp.base(), sp.coset(sanov_group()["B"]), 8)
        assert all(x < y for x, y in zip(prof.sizes, prof.sizes[1:]))
        assert not prof.stabilized

    def test_nondecreasing(self):
        prof = stabilizer_orbit_profile(bs_tree_action(3), bs_vertex(3, 0, 0), bs_vertex(3, 2, Fraction(1, 3)), 7)
        assert prof.sizes == sorted(prof.sizes)


class TestDoubleCosets:
    def test_t_inverse(self):
        dec = double_coset_decomposition(bs_coset_space(2), "t^-1")
        assert dec.l == 2 and dec.stabilized

    def test_t(self):
        assert double_coset_decomposition(bs_coset_space(2), "t").l == 1

    def test_in_subgroup(self):
        dec = double_coset_decomposition(bs_coset_space(2), "a^3")
        assert dec.l == 1 and dec.codes == [bs_coset_space(2).encode(bs_coset_space(2).base())]

    def test_q3(self):
        assert double_coset_decomposition(bs_coset_space(3), "t^-1").l == 3

    def test_no_oracle(self):
        with pytest.raises(NoMembershipOracle):
            CosetSpace(z_group(), Subgroup("?", None))


class TestDoubleCosetGraph:
    def test_radius_one(self):
        ball = double_coset_graph(bs_coset_space(2), S_BS, 1)
        assert len(ball) == 4 and ball.degree(0) == 3

    def test_radius_zero(self):
        ball = double_coset_graph(bs_coset_space(2), S_BS, 0)
        assert len(ball) == 1 and ball.edges() == []

    @pytest.mark.parametrize("q,R", [(2, 4), (2, 5), (3, 3)])
    def test_matches_hnn_tree(self, q, R):
        ball = double_coset_graph(bs_coset_space(q), S_BS, R)
        assert rooted_isomorphic(ball, bass_serre_ball(build_bs(q), R).ball)
        assert all(ball.degree(i) == q + 1 for i in ball.interior())

    def test_symmetric_edges(self):
        space = bs_coset_space(2)
        ball = double_coset_graph(space, S_BS, 3)
        reps = [g for s in S_BS for g in double_coset_decomposition(space, s).reps]

        def rule(c):
            # HaH = H contributes loops, which a simple graph drops
            return {space.coset(c.rep * g) for g in reps} - {c}

        for i in ball.within(2):
            c = ball.points[i]
            assert {ball.points[j] for j in ball.adj[i]} == rule(c)
            for j in ball.adj[i]:
                if ball.dist[j] <= 2:
                    assert c in rule(ball.points[j])

    def test_asymmetric_generators_rejected(self):
        with pytest.raises(ValueError):
            double_coset_graph(bs_coset_space(2), ["a", "t"], 2)


class TestMultiOrbit:
    def test_two_and_three(self):
        ball = multi_orbit_graph([z_space(2), z_space(3)], ["a", "a^-1"], 2)
        cross = [ball.codes[j] for j in ball.adj[0] if ball.codes[j].startswith("2|")]
        assert sorted(cross) == ["2|0", "2|1", "2|2"]

    def test_equal_subgroups_match(self):
        ball = multi_orbit_graph([z_space(2), z_space(2)], ["a", "a^-1"], 3)
        for i, code in enumerate(ball.codes):
            side, key = code.split("|")
            partners = [ball.codes[j] for j in ball.adj[i] if not ball.codes[j].startswith(side + "|")]
            assert partners == [f"{3 - int(side)}|{key}"]

    def test_single_orbit(self):
        a = multi_orbit_graph([bs_coset_space(2)], S_BS, 3)
        b = double_coset_graph(bs_coset_space(2), S_BS, 3)
        assert a.to_dict() == b.to_dict()


class TestSchlichting:
    def test_odometer_depth_three(self):
        pts = list(itertools.product(range(2), repeat=3))
        rep = schlichting_quotient(odometer_action(2, 3), pts, 8)
        assert rep.counts[-1] == 8 and rep.stabilized

    def test_trivial_group(self):
        T = MarkedGroup.of({}, identity=AffineElement(0, 0, 2))
        rep = schlichting_quotient(ActionSpec(T, lambda g, p: g(p)), [QDyadic(0, 0, 2)], 4)
        assert rep.counts == [1] * 5

    def test_finite_orbits(self):
        rep = schlichting_quotient(z_components_action([2, 3]), z_components_points([2, 3]), 8)
        assert rep.compact and rep.counts[-1] == 6 and rep.stabilized

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_counts_match_direct_images(self, d):
        # image of the length-L ball: translations by -L..L, acting through k mod 2^d
        pts = list(itertools.product(range(2), repeat=d))
        L = 2**d + 2
        rep = schlichting_quotient(odometer_action(2, d), pts, L)
        od = odometer(2, d)
        for ell in range(L + 1):
            images = set()
            for k in range(-ell, ell + 1):
                g = od.identity()
                for _ in range(k % 2**d):
                    g = od * g
                images.add(tuple(g(p) for p in sorted(pts)))
            assert rep.counts[ell] == len(images)


class TestCommensuration:
    @pytest.mark.parametrize("q", [2, 3, 5])
    def test_z(self, q):
        assert commensuration_index(z_space(q), [z_group()["a"]]).index == q

    def test_bs_conjugate(self):
        def even(g):
            return g.k == 0 and g.mu.is_integer() and g.mu.num % 2 == 0

        from amenact.groups import bs_group

        G = bs_group(2)
        sp = CosetSpace(G, Subgroup("<a^2>", even))
        ci = commensuration_index(sp, [G["a"]])
        assert ci.index == 2 and ci.stabilized

    def test_heisenberg(self):
        H = heisenberg_group()
        sp = CosetSpace(H, Subgroup("alpha(H)", HeisenbergAlpha().in_image))
        ci = commensuration_index(sp, [H["A"], H["B"]])
        assert ci.index == 16 and ci.stabilized


class TestChains:
    def test_integer_chain_is_odometer(self):
        tree = coset_rooted_tree(integer_chain(2, 3))
        assert tree.portraits["a"] == odometer(2, 3)
        for p in itertools.product(range(2), repeat=3):
            assert tree.action.act(z_group()["a"], p) == odometer(2, 3)(p)

    def test_depth_one(self):
        tree = coset_rooted_tree(integer_chain(3, 1))
        assert tree.portraits["a"]((0,)) == (1,)
        assert tree.level_transitive == [True]

    def test_f2_level_transitive(self):
        tree = coset_rooted_tree(congruence_two_chain(2))
        assert all(tree.level_transitive)

    def test_n_one_empty(self):
        ch = congruence_two_chain(1)
        assert ch.indices == [] and ch.info["order_Q"] == 1

    @pytest.mark.parametrize("n", [2, 3])
    def test_chain_indices(self, n):
        ch = congruence_two_chain(n)
        assert all(i == 2 for i in ch.indices)
        prod = 1
        for i in ch.indices:
            prod *= i
        assert prod == ch.info["order_Q"]
        assert ch.verify()

    def test_q2_enumeration(self):
        # close {A, B} mod 4 by brute force
        gens = [m.reduce(4) for m in (sanov_group()["A"], sanov_group()["B"])]
        seen = {gens[0].identity()}
        frontier = list(seen)
        while frontier:
            frontier = [x * g for x in frontier for g in gens if x * g not in seen]
            seen.update(frontier)
        ch = congruence_two_chain(2)
        assert ch.info["order_Q"] == len(seen) == 4 and len(ch.indices) == 2

    def test_trivial_intersection(self):
        ch = congruence_two_chain(3)
        mod = 8
        F2 = sanov_group()
        for g, _ in word_ball(F2, 6):
            if all(term(g) for term in ch.terms):
                assert g.reduce(mod).is_identity()

    def test_guard(self):
        with pytest.raises(DepthGuard):
            congruence_two_chain(4)
