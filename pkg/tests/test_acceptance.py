"""Acceptance gate: one test per criterion, each printed as a pass/fail line."""

from __future__ import annotations

import io
import itertools
import json
import random
import subprocess
import sys
from collections import deque
from contextlib import redirect_stdout
from fractions import Fraction

from amenact.actions import (
    ActionSpec,
    CosetSpace,
    Subgroup,
    bs_coset_space,
    bs_tree_action,
    bs_vertex,
    commensuration_index,
    congruence_two_chain,
    double_coset_graph,
    free_coset_space,
    left_regular_action,
    line_action,
    odometer_action,
    schlichting_quotient,
    stabilizer_orbit_profile,
    z_components_action,
    z_components_points,
)
from amenact.cli import run
from amenact.graphs import (
    FolnerWitness,
    NotFoundUpToBudget,
    cayley_ball,
    classify_tree_automorphism,
    ends_at_truncation,
    fixed_end_check,
    folner_search,
    grid_ball,
    growth_sequence,
    invariant_structure_report,
    isoperimetric_search,
    line_ball,
    rooted_isomorphic,
    schreier_ball,
    staircase_folner,
    staircase_points,
    tree_ball,
)
from amenact.groups import HeisenbergAlpha, MarkedGroup, bs_group, heisenberg_group, sanov_group
from amenact.hnn import (
    bass_serre_ball,
    build_bs,
    build_heisenberg_hnn,
    f2_chain_glue,
    glue_construction,
    odometer_glue,
    theta_report,
    verify_index,
)

S_BS = ["a", "a^-1", "t", "t^-1"]


def criterion(number):
    def mark(fn):
        fn.criterion = number
        return fn

    return mark


def bfs_counts(center, nbrs, R):
    dist = {center: 0}
    queue = deque([center])
    while queue:
        v = queue.popleft()
        if dist[v] < R:
            for w in nbrs(v):
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
    return [sum(1 for d in dist.values() if d <= n) for n in range(R + 1)]


@criterion(1)
def test_criterion_01_defining_relation():
    """defining relation t^-1 a t = a^q in the affine model, q in {2,3,5}"""
    for q in (2, 3, 5):
        G = bs_group(q)
        assert G["t"].inverse() * G["a"] * G["t"] == G.evaluate(f"a^{q}")


@criterion(2)
def test_criterion_02_bass_serre_geometry():
    """Bass-Serre balls: degrees q+1, closed-form sizes, a_n = 3*2^n - 2 for q = 2"""
    for q in (2, 3):
        hnn = build_bs(q)
        R = 6
        ball = bass_serre_ball(hnn, R).ball
        assert all(ball.degree(i) == q + 1 for i in ball.interior())
        oracle = bfs_counts(hnn.x(0), hnn.neighbors, R)
        for n in range(R + 1):
            closed = 1 + (q + 1) * (q**n - 1) // (q - 1)
            assert len(ball.within(n)) == closed == oracle[n]
            if q == 2:
                assert closed == 3 * 2**n - 2


@criterion(3)
def test_criterion_03_graph_construction_equivalence():
    """double-coset graph of BS(1,2) over <a> is rooted-isomorphic to the HNN tree, R <= 5"""
    space = bs_coset_space(2)
    hnn = build_bs(2)
    for R in range(6):
        assert rooted_isomorphic(double_coset_graph(space, S_BS, R), bass_serre_ball(hnn, R).ball)


@criterion(4)
def test_criterion_04_staircase_folner():
    """staircase sets: |F| = (n+1)q^n, a-displacement 0, t-displacement 2q^n, ratio 2/(n+1)"""
    for q in (2, 3):
        act = bs_tree_action(q)
        G = act.group
        for n in range(9):
            w = staircase_folner(q, n, limit=10**6)
            assert w.size == (n + 1) * q**n
            assert w.displacement == {"a": 0, "t": 2 * q**n}
            assert w.max_ratio == Fraction(2, n + 1)
            # pointwise recount on the materialized set
            F = set(staircase_points(q, n))
            assert len(F) == w.size
            for name, expected in (("a", 0), ("t", 2 * q**n)):
                assert len({act.act(G[name], p) for p in F} ^ F) == expected


@criterion(5)
def test_criterion_05_free_group_contrast():
    """free group: exhaustive min |dF|/|F| >= 2 and no 0.9-Folner set; BS(1,2) has a 1/2 witness"""
    G = sanov_group()
    ball = cayley_ball(G, 3)
    size = len(ball.interior())
    iso = isoperimetric_search(ball, "exhaustive", max_size=size, budget=10**6)
    assert iso.lower_bound and iso.explored == 2**size - 1
    assert iso.min_ratio >= 2
    res = folner_search(ball, left_regular_action(G), ["A", "B"], Fraction(9, 10), strategy="exhaustive",
                        max_size=size, budget=10**6)
    assert isinstance(res, NotFoundUpToBudget) and res.certified_min
    w = staircase_folner(2, 3)
    assert isinstance(w, FolnerWitness) and w.max_ratio <= Fraction(1, 2)


@criterion(6)
def test_criterion_06_theta_cross_check():
    """theta = t-exponent sum = normal-form n-m = ray shift on 100 random words"""
    hnn = build_bs(2)
    G = hnn.marked()
    rng = random.Random(2024)
    R = 14
    ray = [hnn.x(n) for n in range(R + 1)]
    for u, v in zip(ray, ray[1:]):
        assert v in hnn.neighbors(u)
    for _ in range(100):
        w = G.random_word(rng, 10)
        g = hnn.normal_form(w)
        single = MarkedGroup.of({"w": g}, identity=hnn.identity())
        action = ActionSpec(single, hnn.act, encode=str)
        shift = fixed_end_check(action, ray, ["w"])["generators"][0]["shift"]
        rep = theta_report(hnn, w, R)
        assert w.exponent_sum("t") == g.n - g.m == shift == rep.ray_shift


@criterion(7)
def test_criterion_07_heisenberg_index():
    """Heisenberg: [H : alpha(H)] = 16, verified transversal, interior degree 17"""
    H = heisenberg_group()
    sp = CosetSpace(H, Subgroup("alpha(H)", HeisenbergAlpha().in_image))
    ci = commensuration_index(sp, [H["A"], H["B"]])
    assert ci.index == 16 and ci.stabilized
    hnn = build_heisenberg_hnn()
    assert hnn.certificate["box"] == 8 and hnn.certificate["components"] == 16
    assert verify_index(hnn).q == 16
    ball = bass_serre_ball(hnn, 2).ball
    assert all(ball.degree(i) == 17 for i in ball.interior())


@criterion(8)
def test_criterion_08_schlichting_shadow():
    """odometer restriction counts stabilize at 2^n; Z on Z/2 + Z/3 stabilizes at 6, compact"""
    for n in range(1, 7):
        window = list(itertools.product(range(2), repeat=n))
        rep = schlichting_quotient(odometer_action(2, n), window, 2 ** (n - 1) + 2)
        assert rep.counts[-1] == 2**n and rep.stabilized
    rep = schlichting_quotient(z_components_action([2, 3]), z_components_points([2, 3]), 8)
    assert rep.counts[-1] == 6 and rep.stabilized and rep.compact


@criterion(9)
def test_criterion_09_growth_bound():
    """BS(1,2) Cayley growth: a_n^4 >= 2^n exactly for 8 <= n <= 12"""
    table = growth_sequence(cayley_ball(bs_group(2), 13), 12)
    for n in range(8, 13):
        assert table.a[n] ** 4 >= 2**n
        assert table.rate_at_least(n, 2, 1, 4)


@criterion(10)
def test_criterion_10_fso_contrast():
    """stabilizer orbits: size q for BS(1,q), strictly increasing through L = 8 for F2 / <a>"""
    for q in (2, 3):
        prof = stabilizer_orbit_profile(bs_tree_action(q), bs_vertex(q, 0, 0), bs_vertex(q, 1, 0), 8)
        assert prof.stabilized and prof.sizes[-1] == q
    sp = free_coset_space()
    prof = stabilizer_orbit_profile(sp.action(), sp.base(), sp.coset(sanov_group()["B"]), 8)
    assert all(x < y for x, y in zip(prof.sizes, prof.sizes[1:])) and not prof.stabilized


@criterion(11)
def test_criterion_11_ends():
    """ends: line 2, degree-3 tree 3*2^(r-1) for r <= 4 at R = 7, grid 1 at r = 2, R = 8"""
    line = line_ball(8)
    assert all(ends_at_truncation(line, r).count == 2 for r in range(1, 7))
    tree = tree_ball(2, 7)
    for r in range(1, 5):
        assert ends_at_truncation(tree, r).count == 3 * 2 ** (r - 1)
    assert ends_at_truncation(grid_ball(8), 2).count == 1


@criterion(12)
def test_criterion_12_trichotomy_fixtures():
    """a elliptic, t hyperbolic of length 1, fixed end (a: 0, t: 1), branches (a) and (c)"""
    hnn = build_bs(2)
    bb = bass_serre_ball(hnn, 5)
    action = hnn.action()
    rep_a = classify_tree_automorphism(action, hnn.gen("a"), bb.ball)
    assert rep_a.classification == "elliptic" and str(hnn.x(0)) in rep_a.fixed_vertices
    rep_t = classify_tree_automorphism(action, hnn.gen("t"), bb.ball)
    assert rep_t.classification == "hyperbolic" and rep_t.translation_length == 1
    fe = fixed_end_check(action, bb.ray, ["a", "t"], bb.ball)
    assert fe["end_fixed_at_truncation"]
    assert {r["generator"]: r["shift"] for r in fe["generators"]} == {"a": 0, "t": 1}

    act = z_components_action([5, 0])
    rep = invariant_structure_report(act, schreier_ball(act, (0, 0), 6), extra_points=[(5, 0)])
    assert "a" in rep["branches_with_evidence"] and rep["a"][0]["orbit_size"] == 5
    rep = invariant_structure_report(line_action(), line_ball(8))
    assert "c" in rep["branches_with_evidence"]


@criterion(13)
def test_criterion_13_glue_construction():
    """glued actions pass all four checks; congruence chain indices are 2 with product |Q_n|"""
    for spec in (odometer_glue(2, 4), f2_chain_glue(2)):
        res = glue_construction(spec)
        for name in ("level_transitive", "ball_transitive", "fixed_end", "faithful_evidence"):
            assert res.checks[name]["passed"], (spec.label, name)
    for n in (1, 2, 3):
        ch = congruence_two_chain(n)
        prod = 1
        for i in ch.indices:
            assert i == 2
            prod *= i
        assert prod == ch.info["order_Q"]


DETERMINISM_RUNS = [
    ["tree", "--graph", "bass-serre:bs(1,2)", "--radius", "3", "--full"],
    ["growth", "--graph", "cayley:bs(1,2)", "--n", "6"],
    ["ends", "--graph", "tree:q=2", "--radius", "6"],
    ["iso", "--graph", "cayley:f2", "--radius", "3", "--max-size", "9"],
    ["folner", "--graph", "bass-serre:bs(1,2)", "--radius", "5", "--seed", "7"],
    ["folner", "--graph", "cayley:f2", "--radius", "3", "--mode", "exhaustive", "--epsilon", "9/10"],
    ["staircase", "--q", "3", "--n", "3"],
    ["schreier", "--pair", "bs(1,2)", "--radius", "3", "--full"],
    ["schlichting", "--action", "odometer:2,3", "--L", "8"],
    ["fso", "--action", "f2", "--L", "6"],
    ["theta", "--random", "20", "--seed", "3"],
    ["classify", "--graph", "bass-serre:bs(1,2)", "--element", "t"],
    ["glue", "--spec", "glue(f2chain:2)"],
    ["chain", "--n", "3"],
]


def _in_process(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(argv)
    return code, buf.getvalue()


@criterion(14)
def test_criterion_14_determinism():
    """CLI output is byte-identical across repeated runs and thread counts"""
    for argv in DETERMINISM_RUNS:
        outputs = set()
        for threads in ("1", "2", "4"):
            for _ in range(2):
                code, out = _in_process(argv + ["--threads", threads])
                assert code == 0, argv
                outputs.add(out)
        assert len(outputs) == 1, argv
        assert json.loads(outputs.pop())["config"]["command"] == argv[0]
    argv = [sys.executable, "-m", "amenact", "folner", "--graph", "bass-serre:bs(1,2)", "--radius", "5", "--seed", "7"]
    fresh = subprocess.run(argv, capture_output=True, check=True).stdout.decode()
    assert fresh == _in_process(DETERMINISM_RUNS[4] + ["--threads", "3"])[1]
