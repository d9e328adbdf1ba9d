"""Command line interface.

Subcommands: generate, spectrum, simulate, verify, metastable, csl,
experiment.  JSON outputs carry a "version" field and the resolved
configuration.  Exit codes: 0 pass, 1 assertion failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analysis, csl as csl_mod, dynamics, graph as graph_mod, harness, spectral
from .dynamics import RngContext, StopCriteria
from .rng import derive_seed

VERSION = harness.OUTPUT_VERSION


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _load(path: str) -> graph_mod.ClusteredRegularGraph:
    return graph_mod.load_graph(path)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    g = graph_mod.generate_clustered_regular(
        args.n, args.a, args.b, args.seed, method=args.method
    )
    if args.out:
        graph_mod.save_graph(g, args.out)
    report = graph_mod.validate(g)
    structure = graph_mod.structure_report(g)
    _emit(
        {
            "version": VERSION,
            "config": {"n": args.n, "a": args.a, "b": args.b, "seed": args.seed, "method": args.method, "out": args.out},
            "valid": report.ok,
            "violations": report.violations,
            "connected": structure.connected,
            "community_connected": list(structure.community_connected),
            "community_nonbipartite": list(structure.community_nonbipartite),
        }
    )
    return 0 if report.ok else 1


def _cmd_spectrum(args) -> int:
    g = _load(args.graph)
    report = spectral.check_hypotheses(g, tol=args.tol, max_iter=args.max_iter)
    report["version"] = VERSION
    report["config"] = {"graph": args.graph, "tol": args.tol, "max_iter": args.max_iter}
    _emit(report)
    return 0


def _cmd_simulate(args) -> int:
    g = _load(args.graph)
    if args.s1 is not None or args.s2 is not None:
        if args.s1 is None or args.s2 is None:
            raise SystemExit("seeded start needs both --s1 and --s2")
        c0 = dynamics.seeded_init(g, args.s1, args.s2)
    else:
        c0 = dynamics.random_init(g, args.seed, run=args.run)
    stop = StopCriteria(
        max_rounds=args.rounds,
        stop_on_monochromatic=args.stop in ("mono", "any"),
        stop_on_almost_clustered=args.stop in ("clustered", "any"),
        kappa=args.kappa,
    )
    traj = dynamics.run(g, c0, rule=args.rule, stop=stop, ctx=RngContext(args.seed, run=args.run))
    if args.out:
        traj.save_csv(args.out)
    s1, s2 = traj.final_biases()
    _emit(
        {
            "version": VERSION,
            "config": {
                "graph": args.graph,
                "rule": args.rule,
                "seed": args.seed,
                "run": args.run,
                "rounds": args.rounds,
                "stop": args.stop,
                "kappa": args.kappa,
                "s1": args.s1,
                "s2": args.s2,
                "out": args.out,
            },
            "rounds_executed": traj.rounds_executed,
            "final_s1": s1,
            "final_s2": s2,
            "terminal": traj.terminal,
        }
    )
    return 0


def _cmd_metastable(args) -> int:
    g = _load(args.graph)
    s1 = args.s1 if args.s1 is not None else g.n
    s2 = args.s2 if args.s2 is not None else -g.n
    c0 = dynamics.seeded_init(g, s1, s2)
    window = analysis.metastability_window(
        g, c0, args.rounds, args.kappa, RngContext(args.seed, run=args.run)
    )
    _emit(
        {
            "version": VERSION,
            "config": {
                "graph": args.graph,
                "rounds": args.rounds,
                "kappa": args.kappa,
                "seed": args.seed,
                "run": args.run,
                "s1": s1,
                "s2": s2,
            },
            "max_minority": list(window.max_minority),
            "first_violation": window.first_violation,
            "first_sign_flip": window.first_sign_flip,
            "threshold": window.threshold,
            "rounds_executed": window.rounds_executed,
            "ok": window.ok,
        }
    )
    return 0 if window.ok else 1


def _cmd_csl(args) -> int:
    g = _load(args.graph)
    ell = args.ell if args.ell is not None else csl_mod.default_ell(g)
    rounds = args.rounds if args.rounds is not None else csl_mod.default_snapshot_rounds(g)
    labels = csl_mod.csl_run(g, ell, rounds, args.seed)
    score = csl_mod.csl_score(g, labels, pair_budget=args.pair_budget, seed=args.seed)
    if args.matrix_out:
        header = "node," + ",".join(f"c{k}" for k in range(ell))
        with open(args.matrix_out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for u in range(g.num_nodes):
                fh.write(str(u) + "," + ",".join(str(int(x)) for x in labels[u]) + "\n")
    payload = {
        "version": VERSION,
        "config": {
            "graph": args.graph,
            "ell": ell,
            "rounds": rounds,
            "seed": args.seed,
            "pair_budget": args.pair_budget,
            "out": args.out,
            "matrix_out": args.matrix_out,
        },
        "intra_equal_rate": score.intra_equal_rate,
        "inter_diff_rate": score.inter_diff_rate,
        "accuracy": score.accuracy,
        "outlier_pairs": score.outlier_pairs,
        "pairs_evaluated": score.pairs_evaluated,
    }
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _emit(payload)
    return 0


def _cmd_experiment(args) -> int:
    cfg = harness.config_from_sources(args.config, args.override)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if args.workers:
        cfg.workers = args.workers
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    summary, code = harness.run_experiment(cfg)
    _emit(summary)
    return code


def _cmd_verify(args) -> int:
    records = run_verification_battery(
        n=args.n, a=args.a, b=args.b, seed=args.seed, trials=args.trials
    )
    ok = True
    for rec in records:
        rec["version"] = VERSION
        print(json.dumps(rec, sort_keys=True))
        ok = ok and rec["pass"]
    return 0 if ok else 1


def run_verification_battery(n=100, a=16, b=1, seed=0, trials=20000):
    """Built-in oracle checks; one record per check."""
    records = []
    g = graph_mod.generate_clustered_regular(n, a, b, derive_seed(seed, 0, tag=11))
    lam = max(spectral.dense_community_lambda(g, 1), spectral.dense_community_lambda(g, 2))
    consts = spectral.hypothesis_constants(g.n, g.d, g.b, lam)

    # expectation bound dominance over random configurations
    worst = -math.inf
    violations = 0
    checked = 0
    for idx in range(40):
        colors = dynamics.random_init(g, seed, run=idx)
        for community in (1, 2):
            for color in (dynamics.BLUE, dynamics.RED):
                cnt_in = int((colors[g.community_slice(community)] == color).sum())
                cnt_out = int(
                    (colors[g.community_slice(2 if community == 1 else 1)] == color).sum()
                )
                if cnt_in < 1:
                    continue
                exact = analysis.exact_expected_color_count(g, colors, community, color)
                bound = analysis.expected_minority_bound(n, cnt_in, cnt_out, consts.c1, consts.c2)
                worst = max(worst, exact - bound)
                violations += int(exact >= bound)
                checked += 1
    records.append(
        {
            "check": "expected_minority_bound_dominance",
            "params": {"n": n, "a": a, "b": b, "configs": 40, "classes": checked},
            "observed": worst,
            "bound": 0.0,
            "pass": violations == 0,
        }
    )

    # Poisson approximation error of near-clustered minority laws
    rng = np.random.default_rng(derive_seed(seed, 1, tag=11))
    worst_excess = -math.inf
    for k in range(1, 26):
        colors = np.empty(g.num_nodes, dtype=np.uint8)
        colors[:n] = dynamics.RED
        colors[rng.choice(n, size=k, replace=False)] = dynamics.BLUE
        colors[n:] = dynamics.BLUE
        profile = analysis.minority_flip_profile(g, colors, 1)
        pmf = analysis.poisson_binomial_pmf(profile.p)
        tv = analysis.poisson_total_variation(pmf, profile.sum_p)
        worst_excess = max(worst_excess, tv - 2.0 * profile.sum_p_sq)
    records.append(
        {
            "check": "poisson_approximation_error",
            "params": {"n": n, "profiles": 25},
            "observed": worst_excess,
            "bound": 0.0,
            "pass": worst_excess <= 0.0,
        }
    )

    # Monte-Carlo one-step mean against the exact oracle
    colors = dynamics.random_init(g, seed, run=999)
    color = analysis.minority_color(g, colors, 1)
    exact = analysis.exact_expected_color_count(g, colors, 1, color)
    profile = analysis.minority_flip_profile(g, colors, 1, color=color)
    sigma = math.sqrt(float((profile.p * (1 - profile.p)).sum()) / trials)
    samples = analysis.one_step_color_count_samples(g, colors, 1, color, trials, derive_seed(seed, 2, tag=11))
    gap = abs(float(samples.mean()) - exact)
    records.append(
        {
            "check": "one_step_expectation_oracle",
            "params": {"n": n, "replays": trials},
            "observed": gap,
            "bound": 3.0 * sigma,
            "pass": gap <= 3.0 * sigma,
        }
    )

    # Poisson tail against the explicit factorial-decay chain bound
    worst_excess = -math.inf
    for nn in (10 ** 3, 10 ** 4, 10 ** 5):
        for c in (1, 2):
            t = c * math.log(nn) / math.log(math.log(nn))
            tail = analysis.poisson_tail(1.0, t)
            chain = (math.e / t) ** t * math.exp(-1.0)
            worst_excess = max(worst_excess, tail - chain)
    records.append(
        {
            "check": "poisson_tail_decay",
            "params": {"lambda": 1.0, "n_values": [1000, 10000, 100000]},
            "observed": worst_excess,
            "bound": 0.0,
            "pass": worst_excess <= 0.0,
        }
    )

    # Gaussian tail symmetry
    xs = np.linspace(-6, 6, 61)
    sym_err = max(
        abs(analysis.normal_upper_tail(-x) + analysis.normal_upper_tail(x) - 1.0) for x in xs
    )
    records.append(
        {
            "check": "normal_tail_symmetry",
            "params": {"grid": 61},
            "observed": sym_err,
            "bound": 1e-12,
            "pass": sym_err <= 1e-12,
        }
    )

    # flip-rate total against the explicit almost-clustered cap
    kmin = math.floor(math.log(n))
    cap = 1.0 + 2.0 * math.log(n) ** 2 / math.sqrt(n) + 3.0 * math.log(n) / math.sqrt(n)
    worst_sum = -math.inf
    for idx in range(20):
        rng2 = np.random.default_rng(derive_seed(seed, 100 + idx, tag=11))
        colors = np.empty(g.num_nodes, dtype=np.uint8)
        colors[:n] = dynamics.RED
        colors[rng2.choice(n, size=kmin, replace=False)] = dynamics.BLUE
        colors[n:] = dynamics.BLUE
        colors[n + rng2.choice(n, size=kmin, replace=False)] = dynamics.RED
        for community in (1, 2):
            profile = analysis.minority_flip_profile(g, colors, community)
            worst_sum = max(worst_sum, profile.sum_p)
    records.append(
        {
            "check": "flip_rate_cap",
            "params": {"n": n, "minority": kmin, "configs": 20},
            "observed": worst_sum,
            "bound": cap,
            "pass": worst_sum <= cap,
        }
    )
    return records


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twochoices",
        description="Simulate and verify two-choices dynamics on clustered regular graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a clustered regular graph")
    p.add_argument("--n", type=int, required=True, help="nodes per community")
    p.add_argument("--a", type=int, required=True, help="intra-community degree")
    p.add_argument("--b", type=int, required=True, help="cross-community degree")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("pairing", "circulant"), default="pairing")
    p.add_argument("--out", help="write the graph file here")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("spectrum", help="estimate lambda and the derived constants")
    p.add_argument("--graph", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("simulate", help="run one trajectory")
    p.add_argument("--graph", required=True)
    p.add_argument("--rule", choices=(dynamics.TWO_CHOICES, dynamics.VOTER), default=dynamics.TWO_CHOICES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--stop", choices=("none", "mono", "clustered", "any"), default="none")
    p.add_argument("--kappa", type=float, default=8.0)
    p.add_argument("--s1", type=int, help="seeded start bias for community 1")
    p.add_argument("--s2", type=int, help="seeded start bias for community 2")
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="run the built-in oracle checks")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--a", type=int, default=16)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20000)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("metastable", help="watch minority counts over a long window")
    p.add_argument("--graph", required=True)
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--s1", type=int)
    p.add_argument("--s2", type=int)
    p.set_defaults(func=_cmd_metastable)

    p = sub.add_parser("csl", help="community-sensitive labeling run and score")
    p.add_argument("--graph", required=True)
    p.add_argument("--ell", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pair-budget", type=int, default=200_000)
    p.add_argument("--out", help="score JSON path")
    p.add_argument("--matrix-out", help="label matrix CSV path")
    p.set_defaults(func=_cmd_csl)

    p = sub.add_parser("experiment", help="run a configured experiment")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("override", nargs="*", help="key=value overrides")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, graph_mod.GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
