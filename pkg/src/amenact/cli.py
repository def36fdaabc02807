"""Command-line front end.

Every run writes one JSON report (stdout unless ``--out`` is given) and, for
commands that produce a graph, optionally a DOT file. Exit codes: 0 success,
1 usage error, 2 an ``--expect`` clause failed, 3 a budget or depth limit was
hit.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable

from . import __version__
from .actions import (
    CosetSpace,
    bs_coset_space,
    bs_tree_action,
    bs_vertex,
    congruence_two_chain,
    coset_rooted_tree,
    double_coset_decomposition,
    double_coset_graph,
    free_coset_space,
    left_regular_action,
    line_action,
    multi_orbit_graph,
    odometer_action,
    schlichting_quotient,
    stabilizer_orbit_profile,
    z_components_action,
    z_components_points,
    z_group,
    z_subgroup,
)
from .errors import (
    AmenactError,
    BudgetExceeded,
    DepthExceeded,
    DepthGuard,
    RadiusTooSmall,
    UnknownSpec,
)
from .graphs import (
    GraphBall,
    cayley_ball,
    classify_tree_automorphism,
    end_profile,
    ends_at_truncation,
    folner_search,
    frac_str,
    grid_ball,
    growth_sequence,
    isoperimetric_search,
    line_ball,
    staircase_folner,
    tree_ball,
)
from .groups import Word, bs_group, sanov_group
from .hnn import (
    AscendingHNN,
    bass_serre_ball,
    build_bs,
    build_heisenberg_hnn,
    f2_chain_glue,
    glue_ball,
    glue_construction,
    odometer_glue,
    theta_report,
)

SCHEMA = 1
LIMIT_ERRORS = (BudgetExceeded, DepthExceeded, DepthGuard, RadiusTooSmall)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


# --------------------------------------------------------------------------
# graph specs


@dataclass
class GraphSpec:
    text: str
    build: Callable[[int], GraphBall]
    action: Any = None
    gens: tuple = ()
    ray: Callable[[int], list] | None = None
    hnn: AscendingHNN | None = None


_BS = re.compile(r"bs\(1,(\d+)\)")


def _bs_q(text: str) -> int:
    m = _BS.fullmatch(text)
    if not m or int(m.group(1)) < 2:
        raise UnknownSpec(f"expected bs(1,q) with q >= 2, got {text!r}")
    return int(m.group(1))


def parse_graph_spec(s: str) -> GraphSpec:
    s = s.strip().replace(" ", "")
    if s.startswith("tree:"):
        m = re.fullmatch(r"tree:q=(\d+)", s)
        if not m or int(m.group(1)) < 1:
            raise UnknownSpec(s)
        q = int(m.group(1))
        return GraphSpec(s, lambda R: tree_ball(q, R))
    if s == "line":
        return GraphSpec(s, line_ball, line_action(), ("a",), lambda R: list(range(R + 1)))
    if s == "grid2":
        return GraphSpec(s, grid_ball)
    if s == "cayley:f2":
        G = sanov_group()
        return GraphSpec(s, lambda R: cayley_ball(G, R), left_regular_action(G), ("A", "B"))
    if s.startswith("cayley:"):
        q = _bs_q(s[len("cayley:"):])
        G = bs_group(q)
        return GraphSpec(s, lambda R: cayley_ball(G, R), left_regular_action(G), ("a", "t"))
    if s.startswith("bass-serre:"):
        rest = s[len("bass-serre:"):]
        hnn = build_heisenberg_hnn() if rest == "heis" else build_bs(_bs_q(rest))
        gens = tuple(hnn.marked().names)
        return GraphSpec(s, lambda R: bass_serre_ball(hnn, R).ball, hnn.action(), gens,
                         lambda R: [hnn.x(n) for n in range(R + 1)], hnn)
    m = re.fullmatch(r"glue\((odometer:(\d+),(\d+)|f2chain:(\d+))\)", s)
    if m:
        spec = odometer_glue(int(m.group(2)), int(m.group(3))) if m.group(2) else f2_chain_glue(int(m.group(4)))
        res = glue_construction(spec)
        return GraphSpec(s, lambda R: glue_ball(spec.q, R), res.action, tuple(res.action.group.names),
                         lambda R: [(n, ()) for n in range(R + 1)])
    raise UnknownSpec(f"unknown graph spec {s!r}")


def parse_rational(text: str) -> Fraction:
    m = re.fullmatch(r"\s*([+-]?\d+)(?:/(\d+))?\s*", text)
    if not m or (m.group(2) is not None and int(m.group(2)) == 0):
        raise UsageError(f"expected a rational p/q, got {text!r}")
    return Fraction(int(m.group(1)), int(m.group(2) or 1))


# --------------------------------------------------------------------------
# expectations


_RATE = re.compile(r"min-rate>=(\d+)\^\((\d+)/(\d+)\)")
_CMP = re.compile(r"([a-z-]+)(<=|>=|==)(.+)")


def _compare(lhs: Fraction, op: str, rhs: Fraction) -> bool:
    return {"<=": lhs <= rhs, ">=": lhs >= rhs, "==": lhs == rhs}[op]


def evaluate_expect(clause: str, values: dict) -> dict:
    """Evaluate one ``--expect`` clause against exact values from a result."""
    text = clause.replace(" ", "")
    m = _RATE.fullmatch(text)
    if m:
        if "growth" not in values:
            raise UsageError(f"{clause!r} only applies to growth")
        table, lo, hi = values["growth"]
        base, num, den = int(m.group(1)), int(m.group(2)), int(m.group(3))
        ok = all(table.rate_at_least(n, base, num, den) for n in range(lo, hi + 1))
        return {"clause": clause, "holds": ok, "range": [lo, hi]}
    m = _CMP.fullmatch(text)
    if not m or m.group(1) not in values:
        raise UsageError(f"cannot evaluate {clause!r}; known quantities: {sorted(k for k in values if k != 'growth')}")
    lhs = values[m.group(1)]
    if lhs is None:
        return {"clause": clause, "holds": False, "value": None}
    ok = _compare(Fraction(lhs), m.group(2), parse_rational(m.group(3)))
    return {"clause": clause, "holds": ok, "value": frac_str(Fraction(lhs))}


# --------------------------------------------------------------------------
# commands


def _ball_summary(ball: GraphBall) -> dict:
    degs: dict[int, int] = {}
    for i in ball.interior():
        k = ball.degree(i)
        degs[k] = degs.get(k, 0) + 1
    return {
        "vertices": len(ball),
        "edges": len(ball.edges()),
        "radius": ball.radius,
        "is_tree": ball.is_tree(),
        "interior_degrees": {str(k): v for k, v in sorted(degs.items())},
    }


def cmd_tree(args):
    spec = parse_graph_spec(args.graph)
    ball = spec.build(args.radius)
    res = {"summary": _ball_summary(ball)}
    if args.full:
        res["ball"] = ball.to_dict()
    ray = spec.ray(args.radius) if spec.ray else None
    return res, {"vertices": len(ball)}, (ball, ray)


def cmd_growth(args):
    spec = parse_graph_spec(args.graph)
    ball = spec.build(args.n + 1)
    table = growth_sequence(ball, args.n)
    lo = args.rate_from if args.rate_from is not None else 1
    return table.to_dict(), {"growth": (table, lo, args.n), "a-n": table.a[-1]}, None


def cmd_ends(args):
    spec = parse_graph_spec(args.graph)
    ball = spec.build(args.radius)
    if args.r is not None:
        rep = ends_at_truncation(ball, args.r)
        return rep.to_dict(), {"ends": rep.count}, None
    prof = end_profile(ball)
    return prof, {"ends": prof["counts"][-1][1] if prof["counts"] else None}, None


def cmd_iso(args):
    spec = parse_graph_spec(args.graph)
    ball = spec.build(args.radius)
    rep = isoperimetric_search(ball, args.mode, max_size=args.max_size, steps=args.steps,
                               budget=args.budget, threads=args.threads)
    out = rep.to_dict()
    out.pop("backend")
    return out, {"min-ratio": rep.min_ratio}, (ball, None)


def cmd_folner(args):
    if args.mode == "staircase":
        q = _bs_q(args.graph.split(":", 1)[1]) if args.graph.startswith("bass-serre:") else None
        if q is None:
            raise UsageError("staircase mode needs --graph bass-serre:bs(1,q)")
        w = staircase_folner(q, args.n, limit=args.budget)
        return w.to_dict(), {"max-ratio": w.max_ratio, "size": w.size}, None
    spec = parse_graph_spec(args.graph)
    if spec.action is None:
        raise UsageError(f"graph {args.graph!r} carries no group action")
    ball = spec.build(args.radius)
    action = spec.action
    if spec.hnn is not None and spec.hnn.name.startswith("bs("):
        # search in the affine coset model, where the staircase lives
        q = spec.hnn.q
        from .actions import bs_tree_ball

        ball, action = bs_tree_ball(q, args.radius), bs_tree_action(q)
    strategy = "exhaustive" if args.mode == "exhaustive" else "anneal"
    res = folner_search(ball, action, list(spec.gens), parse_rational(args.epsilon), strategy=strategy,
                        seed=args.seed, max_size=args.max_size, steps=args.steps, budget=args.budget,
                        threads=args.threads)
    d = res.to_dict()
    ratio = getattr(res, "max_ratio", None)
    return d, {"max-ratio": ratio, "best-ratio": getattr(res, "best_ratio", ratio), "found": int(d["found"])}, (ball, None)


def cmd_staircase(args):
    w = staircase_folner(args.q, args.n, limit=args.budget)
    return w.to_dict(), {"max-ratio": w.max_ratio, "size": w.size}, None


def _pair(text: str):
    text = text.replace(" ", "")
    if text.startswith("bs("):
        q = _bs_q(text)
        return [bs_coset_space(q)], ["a", "a^-1", "t", "t^-1"]
    if text == "f2":
        return [free_coset_space()], ["A", "A^-1", "B", "B^-1"]
    m = re.fullmatch(r"z:(\d+(?:,\d+)*)", text)
    if m:
        ns = [int(x) for x in m.group(1).split(",")]
        if any(n < 1 for n in ns):
            raise UnknownSpec(text)
        return [CosetSpace(z_group(), z_subgroup(n), encode=lambda c: str(c.key)) for n in ns], ["a", "a^-1"]
    raise UnknownSpec(f"unknown pair {text!r}")


def cmd_schreier(args):
    spaces, S = _pair(args.pair)
    decs = [double_coset_decomposition(spaces[0], s, args.L).to_dict() for s in S]
    if len(spaces) == 1:
        ball = double_coset_graph(spaces[0], S, args.radius, args.L)
    else:
        ball = multi_orbit_graph(spaces, S, args.radius, args.L)
    res = {"decompositions": decs, "summary": _ball_summary(ball)}
    if args.full:
        res["ball"] = ball.to_dict()
    return res, {"vertices": len(ball)}, (ball, None)


def _schlichting_action(text: str):
    text = text.replace(" ", "")
    m = re.fullmatch(r"odometer:(\d+),(\d+)", text)
    if m:
        q, d = int(m.group(1)), int(m.group(2))
        from itertools import product

        return odometer_action(q, d), [tuple(a) for a in product(range(q), repeat=d)]
    m = re.fullmatch(r"zmod:(\d+(?:,\d+)*)", text)
    if m:
        ns = [int(x) for x in m.group(1).split(",")]
        return z_components_action(ns), z_components_points(ns)
    raise UnknownSpec(f"unknown action {text!r}")


def cmd_schlichting(args):
    action, window = _schlichting_action(args.action)
    rep = schlichting_quotient(action, window, args.L)
    d = rep.to_dict()
    return d, {"count": rep.counts[-1], "compact": int(rep.compact), "stabilized": int(rep.stabilized)}, None


def cmd_fso(args):
    text = args.action.replace(" ", "")
    if text == "f2":
        sp = free_coset_space()
        prof = stabilizer_orbit_profile(sp.action(), sp.base(), sp.coset(sanov_group()["B"]), args.L)
    else:
        q = _bs_q(text)
        prof = stabilizer_orbit_profile(bs_tree_action(q), bs_vertex(q, 0, 0), bs_vertex(q, args.level, 0), args.L)
    return prof.to_dict(), {"size": prof.sizes[-1], "stabilized": int(prof.stabilized)}, None


def _hnn(text: str) -> AscendingHNN:
    text = text.replace(" ", "")
    return build_heisenberg_hnn() if text == "heis" else build_bs(_bs_q(text))


def cmd_theta(args):
    hnn = _hnn(args.group)
    if args.word is not None:
        words = [Word.parse(args.word)]
    else:
        rng = random.Random(args.seed)
        G = hnn.marked()
        words = [G.random_word(rng, args.max_len) for _ in range(args.random)]
    reports = [theta_report(hnn, w, args.radius).to_dict() for w in words]
    agree = all(r["agree"] for r in reports)
    return {"R": args.radius, "words": reports, "all_agree": agree}, {"agree": int(agree)}, None


def cmd_classify(args):
    spec = parse_graph_spec(args.graph)
    if spec.action is None:
        raise UsageError(f"graph {args.graph!r} carries no group action")
    ball = spec.build(args.radius)
    g = spec.action.group.evaluate(args.element)
    rep = classify_tree_automorphism(spec.action, g, ball)
    out = rep.to_dict()
    out["element"] = args.element
    return out, {"translation-length": rep.translation_length, "min-displacement": rep.min_displacement}, (ball, None)


def cmd_glue(args):
    m = re.fullmatch(r"glue\((odometer:(\d+),(\d+)|f2chain:(\d+))\)", args.spec.replace(" ", ""))
    if not m:
        raise UnknownSpec(f"unknown glue spec {args.spec!r}")
    spec = odometer_glue(int(m.group(2)), int(m.group(3))) if m.group(2) else f2_chain_glue(int(m.group(4)))
    res = glue_construction(spec)
    ball = glue_ball(spec.q, args.radius)
    return res.to_dict(), {"passed": int(res.passed)}, (ball, [(n, ()) for n in range(args.radius + 1)])


def cmd_chain(args):
    chain = congruence_two_chain(args.n)
    out = {"indices": chain.indices, "product": math.prod(chain.indices), **chain.info, "verified": chain.verify()}
    if chain.depth >= 1:
        out["coset_tree"] = coset_rooted_tree(chain).to_dict()
    return out, {"order": chain.info["order_Q"], "depth": chain.depth}, None


COMMANDS = {
    "tree": cmd_tree,
    "growth": cmd_growth,
    "ends": cmd_ends,
    "iso": cmd_iso,
    "folner": cmd_folner,
    "staircase": cmd_staircase,
    "schreier": cmd_schreier,
    "schlichting": cmd_schlichting,
    "fso": cmd_fso,
    "theta": cmd_theta,
    "classify": cmd_classify,
    "glue": cmd_glue,
    "chain": cmd_chain,
}

# flags that never change the payload and are left out of the config echo
_NOT_ECHOED = {"out", "dot", "threads", "func"}

PROVENANCE = {
    "tree": "materialized BFS ball",
    "growth": "exact counts from a ball of radius n+1",
    "ends": "annulus components touching the outer sphere (truncation heuristic)",
    "iso": "exhaustive: certified minimum over the stated family; greedy: no bound claimed",
    "folner": "witness recounted pointwise; failure records carry the explored budget",
    "staircase": "closed-form family, recounted pointwise",
    "schreier": "double cosets found as H-orbits at word length L, stabilization checked at L+1",
    "schlichting": "restriction counts over the word ball; flags read at (L, window)",
    "fso": "approximate stabilizers {|w| <= L, w.x = x}",
    "theta": "letter count, normal form and ray shift computed independently",
    "classify": "displacement over the evaluable ball vertices",
    "glue": "checks evaluated at the portrait depth",
    "chain": "full enumeration of the finite quotient",
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="amenact", description="Exact evidence for amenable actions on graphs.")
    p.add_argument("--version", action="version", version=f"amenact {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, graph=False):
        sp.add_argument("--out", help="write JSON here instead of stdout")
        sp.add_argument("--dot", help="write a DOT graph here (graph-producing commands)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--expect", action="append", default=[], help='e.g. "max-ratio<=1/2"')
        if graph:
            sp.add_argument("--graph", required=True, help='e.g. "tree:q=2", "cayley:bs(1,2)"')

    sp = sub.add_parser("tree", help="materialize a ball")
    common(sp, graph=True)
    sp.add_argument("--radius", type=int, default=3)
    sp.add_argument("--full", action="store_true", help="include every vertex and edge")

    sp = sub.add_parser("growth", help="growth sequence a_n")
    common(sp, graph=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--rate-from", type=int, default=None, help="first n checked by min-rate clauses")

    sp = sub.add_parser("ends", help="end counts at truncation")
    common(sp, graph=True)
    sp.add_argument("--radius", type=int, default=6)
    sp.add_argument("--r", type=int, default=None)

    sp = sub.add_parser("iso", help="isoperimetric search")
    common(sp, graph=True)
    sp.add_argument("--radius", type=int, default=3)
    sp.add_argument("--mode", choices=["exhaustive", "greedy"], default="exhaustive")
    sp.add_argument("--max-size", type=int, default=8)
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--budget", type=int, default=5_000_000)

    sp = sub.add_parser("folner", help="Folner witness search")
    common(sp, graph=True)
    sp.add_argument("--mode", choices=["search", "exhaustive", "staircase"], default="search")
    sp.add_argument("--epsilon", default="1/2")
    sp.add_argument("--radius", type=int, default=5)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--max-size", type=int, default=9)
    sp.add_argument("--steps", type=int, default=4000)
    sp.add_argument("--budget", type=int, default=5_000_000)

    sp = sub.add_parser("staircase", help="staircase Folner sets of BS(1,q)")
    common(sp)
    sp.add_argument("--q", type=int, default=2)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--budget", type=int, default=200_000)

    sp = sub.add_parser("schreier", help="double-coset / multi-orbit graphs")
    common(sp)
    sp.add_argument("--pair", required=True, help='"bs(1,q)", "f2" or "z:2,3"')
    sp.add_argument("--radius", type=int, default=3)
    sp.add_argument("--L", type=int, default=6)
    sp.add_argument("--full", action="store_true")

    sp = sub.add_parser("schlichting", help="finite shadows of the Schlichting completion")
    common(sp)
    sp.add_argument("--action", required=True, help='"odometer:q,d" or "zmod:2,3"')
    sp.add_argument("--L", type=int, default=8)

    sp = sub.add_parser("fso", help="stabilizer orbit profile")
    common(sp)
    sp.add_argument("--action", required=True, help='"bs(1,q)" or "f2"')
    sp.add_argument("--L", type=int, default=8)
    sp.add_argument("--level", type=int, default=1)

    sp = sub.add_parser("theta", help="theta cross-check on HNN words")
    common(sp)
    sp.add_argument("--group", default="bs(1,2)")
    sp.add_argument("--word", default=None, help='dot-separated, e.g. "t^-1.x.t"')
    sp.add_argument("--random", type=int, default=100)
    sp.add_argument("--max-len", type=int, default=10)
    sp.add_argument("--radius", type=int, default=14)

    sp = sub.add_parser("classify", help="classify a tree automorphism")
    common(sp, graph=True)
    sp.add_argument("--element", required=True)
    sp.add_argument("--radius", type=int, default=5)

    sp = sub.add_parser("glue", help="glued-tree construction checks")
    common(sp)
    sp.add_argument("--spec", required=True, help='"glue(odometer:2,4)" or "glue(f2chain:2)"')
    sp.add_argument("--radius", type=int, default=3)

    sp = sub.add_parser("chain", help="congruence 2-chain of <A,B> mod 2^n")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    return p


def _exactify(x):
    if isinstance(x, Fraction):
        return frac_str(x)
    if isinstance(x, float):
        raise TypeError("floating point value in report")
    if isinstance(x, dict):
        return {str(k): _exactify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_exactify(v) for v in x]
    return x


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    try:
        result, values, graph = COMMANDS[args.command](args)
        checks = [evaluate_expect(c, values) for c in args.expect]
    except LIMIT_ERRORS as exc:
        print(f"amenact: limit reached: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (UsageError, UnknownSpec) as exc:
        print(f"amenact: error: {exc}", file=sys.stderr)
        return 1
    except (AmenactError, ValueError) as exc:
        print(f"amenact: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report = {
        "schema": SCHEMA,
        "tool": "amenact",
        "version": __version__,
        "config": config,
        "result": result,
        "provenance": {"method": PROVENANCE[args.command], "expect": checks},
    }
    text = json.dumps(_exactify(report), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.dot:
        if graph is None:
            print("amenact: this command produces no graph; --dot ignored", file=sys.stderr)
        else:
            ball, ray = graph
            with open(args.dot, "w", encoding="utf-8") as fh:
                fh.write(ball.to_dot(ray=ray))
    if any(not c["holds"] for c in checks):
        failed = ", ".join(c["clause"] for c in checks if not c["holds"])
        print(f"amenact: expectation failed: {failed}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
