"""Experiment configuration and batch orchestration.

Every experiment kind maps a config to a JSON summary plus a CSV with
one row per trial.  A trial's row is a pure function of (config, trial
index), and rows are written sorted by trial index after an
order-independent aggregation, so the artifacts are byte-identical for
any worker count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis, csl, dynamics, graph as graph_mod, spectral
from .dynamics import RngContext, StopCriteria
from .rng import derive_seed

OUTPUT_VERSION = "1"

KINDS = (
    "outcome_frequency",
    "growth",
    "convergence",
    "metastability",
    "init_tail",
    "bound_scan",
    "poisson_scan",
    "csl_accuracy",
)


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    trials: int = 100
    workers: int = 1
    out_dir: str = "."
    label: Optional[str] = None
    # graph source: either a file or generation parameters
    graph_path: Optional[str] = None
    n: Optional[int] = None
    a: Optional[int] = None
    b: Optional[int] = None
    method: str = "pairing"
    graph_seed: Optional[int] = None
    # dynamics
    rule: str = dynamics.TWO_CHOICES
    rounds: int = 200
    kappa: float = 8.0
    s1: Optional[int] = None
    s2: Optional[int] = None
    # csl
    ell: Optional[int] = None
    snapshot_rounds: Optional[int] = None
    pair_budget: int = 200_000
    # scans
    configs_per_graph: int = 100
    minority_max: int = 40
    kappas: str = "0.5,1,2"
    # assertion thresholds
    freq_low: float = 0.05
    freq_high: float = 0.95
    mono_min: float = 0.05
    accuracy_threshold: float = 0.99
    min_successes: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved_label(self) -> str:
        return self.label or self.kind


_COERCIONS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(key: str, value: str):
    if key not in _COERCIONS:
        raise ValueError(f"unknown config key {key!r}")
    text = value.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            continue
    return text


def parse_config_file(path) -> Dict[str, object]:
    """Flat key=value lines; '#' starts a comment."""
    out: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = _coerce(key.strip(), value)
    return out


def config_from_sources(
    file_path: Optional[str], overrides: Sequence[str]
) -> ExperimentConfig:
    data: Dict[str, object] = {}
    if file_path:
        data.update(parse_config_file(file_path))
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        data[key.strip()] = _coerce(key.strip(), value)
    if "kind" not in data:
        raise ValueError("config must set 'kind'")
    return ExperimentConfig(**data)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# graph resolution (cached per process so worker pools stay cheap)
# ---------------------------------------------------------------------------

_GRAPH_CACHE: Dict[tuple, graph_mod.ClusteredRegularGraph] = {}


def resolve_graph(cfg: ExperimentConfig) -> graph_mod.ClusteredRegularGraph:
    if cfg.graph_path:
        key = ("path", os.path.abspath(cfg.graph_path))
        if key not in _GRAPH_CACHE:
            _GRAPH_CACHE[key] = graph_mod.load_graph(cfg.graph_path)
        return _GRAPH_CACHE[key]
    if cfg.n is None or cfg.a is None or cfg.b is None:
        raise ValueError("config needs either graph_path or (n, a, b)")
    gseed = cfg.graph_seed if cfg.graph_seed is not None else derive_seed(cfg.seed, 0, tag=99)
    key = ("params", cfg.n, cfg.a, cfg.b, cfg.method, gseed)
    if key not in _GRAPH_CACHE:
        _GRAPH_CACHE[key] = graph_mod.generate_clustered_regular(
            cfg.n, cfg.a, cfg.b, gseed, method=cfg.method
        )
    return _GRAPH_CACHE[key]


# ---------------------------------------------------------------------------
# per-trial evaluation (module level so worker processes can unpickle it)
# ---------------------------------------------------------------------------


def _trial_rows(cfg: ExperimentConfig, trial: int) -> List[tuple]:
    kind = cfg.kind
    if kind == "outcome_frequency":
        g = resolve_graph(cfg)
        c0 = dynamics.random_init(g, cfg.seed, run=trial)
        stop = StopCriteria(
            max_rounds=cfg.rounds,
            stop_on_monochromatic=True,
            stop_on_almost_clustered=True,
            kappa=cfg.kappa,
        )
        traj = dynamics.run(g, c0, rule=cfg.rule, stop=stop, ctx=RngContext(cfg.seed, run=trial))
        s1, s2 = traj.final_biases()
        m1, m2 = int(traj.records[-1, 3]), int(traj.records[-1, 4])
        return [(trial, traj.rounds_executed, s1, s2, m1, m2, traj.terminal)]

    if kind == "growth":
        g = resolve_graph(cfg)
        s1 = _planted_bias(cfg, g)
        s2 = cfg.s2 if cfg.s2 is not None else -s1
        c0 = dynamics.seeded_init(g, s1, s2)
        after = dynamics.step_two_choices(g, c0, RngContext(cfg.seed, run=trial, round_index=0))
        ns1, ns2 = dynamics.biases(g, after)
        grew = (16 * ns1 >= 17 * s1) and (16 * ns2 <= 17 * s2)
        return [(trial, s1, s2, ns1, ns2, int(grew))]

    if kind == "convergence":
        g = resolve_graph(cfg)
        s1 = _planted_bias(cfg, g)
        s2 = cfg.s2 if cfg.s2 is not None else -s1
        c0 = dynamics.seeded_init(g, s1, s2)
        target = math.ceil(g.n - math.log(g.n))
        colors = np.array(c0, dtype=np.uint8)
        from . import _kernels
        from .rng import base_key

        tau1, tau2, flip, executed = _kernels.convergence_rounds(
            g.adjacency, colors, np.uint64(base_key(cfg.seed, trial)), 0, cfg.rounds, target
        )
        success = int(tau1 >= 0 and tau2 >= 0 and flip < 0)
        return [(trial, int(tau1), int(tau2), int(flip), int(executed), success)]

    if kind == "metastability":
        g = resolve_graph(cfg)
        c0 = dynamics.seeded_init(g, g.n, -g.n)
        window = analysis.metastability_window(
            g, c0, cfg.rounds, cfg.kappa, RngContext(cfg.seed, run=trial)
        )
        success = int(window.ok)
        return [
            (
                trial,
                window.max_minority[0],
                window.max_minority[1],
                -1 if window.first_violation is None else window.first_violation,
                -1 if window.first_sign_flip is None else window.first_sign_flip,
                window.threshold,
                success,
            )
        ]

    if kind == "init_tail":
        g = resolve_graph(cfg)
        c0 = dynamics.random_init(g, cfg.seed, run=trial)
        s1, _ = dynamics.biases(g, c0)
        return [(trial, s1)]

    if kind == "bound_scan":
        return _bound_scan_rows(cfg, trial)

    if kind == "poisson_scan":
        return _poisson_scan_rows(cfg, trial)

    if kind == "csl_accuracy":
        g = resolve_graph(cfg)
        ell = cfg.ell if cfg.ell is not None else csl.default_ell(g)
        rounds = (
            cfg.snapshot_rounds
            if cfg.snapshot_rounds is not None
            else csl.default_snapshot_rounds(g)
        )
        labels = csl.csl_run(g, ell, rounds, derive_seed(cfg.seed, trial, tag=5))
        score = csl.csl_score(g, labels, pair_budget=cfg.pair_budget, seed=derive_seed(cfg.seed, trial, tag=6))
        success = int(score.accuracy >= cfg.accuracy_threshold)
        return [
            (
                trial,
                f"{score.intra_equal_rate:.8f}",
                f"{score.inter_diff_rate:.8f}",
                f"{score.accuracy:.8f}",
                score.outlier_pairs,
                score.pairs_evaluated,
                success,
            )
        ]

    raise AssertionError(f"unhandled kind {kind}")


def _planted_bias(cfg: ExperimentConfig, g: graph_mod.ClusteredRegularGraph) -> int:
    if cfg.s1 is not None:
        return cfg.s1
    s1 = math.ceil(math.sqrt(g.n) * math.log(g.n))
    if (g.n - s1) % 2 != 0:
        s1 += 1  # respect the exact-bias parity constraint
    return s1


def _bound_scan_rows(cfg: ExperimentConfig, trial: int) -> List[tuple]:
    """One trial = one generated graph, scanned over random configurations
    and all four (community, color) class choices."""
    if cfg.n is None or cfg.a is None or cfg.b is None:
        raise ValueError("bound_scan needs explicit (n, a, b)")
    gseed = derive_seed(cfg.seed, trial, tag=7)
    g = graph_mod.generate_clustered_regular(cfg.n, cfg.a, cfg.b, gseed, method=cfg.method)
    if g.n <= 512:
        lam = max(spectral.dense_community_lambda(g, 1), spectral.dense_community_lambda(g, 2))
    else:
        lam = spectral.spectral_report(g).lam
    consts = spectral.hypothesis_constants(g.n, g.d, g.b, lam)
    rows: List[tuple] = []
    for cfg_idx in range(cfg.configs_per_graph):
        colors = dynamics.random_init(g, gseed, run=cfg_idx)
        for community in (1, 2):
            other = 2 if community == 1 else 1
            for color in (dynamics.BLUE, dynamics.RED):
                sl = g.community_slice(community)
                osl = g.community_slice(other)
                b1 = int((colors[sl] == color).sum())
                b2 = int((colors[osl] == color).sum())
                if b1 < 1:
                    continue
                exact = analysis.exact_expected_color_count(g, colors, community, color)
                bound = analysis.expected_minority_bound(g.n, b1, b2, consts.c1, consts.c2)
                rows.append(
                    (
                        trial,
                        cfg_idx,
                        community,
                        color,
                        b1,
                        b2,
                        f"{exact:.10g}",
                        f"{bound:.10g}",
                        int(exact < bound),
                    )
                )
    return rows


def _poisson_scan_rows(cfg: ExperimentConfig, trial: int) -> List[tuple]:
    """One trial = one near-clustered configuration; checks the Poisson
    approximation error of the minority-count law against twice the sum
    of squared flip probabilities."""
    g = resolve_graph(cfg)
    rng = np.random.default_rng(derive_seed(cfg.seed, trial, tag=8))
    k1 = int(rng.integers(1, cfg.minority_max + 1))
    k2 = int(rng.integers(0, cfg.minority_max + 1))
    colors = np.empty(g.num_nodes, dtype=np.uint8)
    colors[: g.n] = dynamics.RED
    colors[rng.choice(g.n, size=k1, replace=False)] = dynamics.BLUE
    colors[g.n :] = dynamics.BLUE
    if k2:
        colors[g.n + rng.choice(g.n, size=k2, replace=False)] = dynamics.RED
    community = 1 if trial % 2 == 0 else 2
    profile = analysis.minority_flip_profile(g, colors, community)
    pmf = analysis.poisson_binomial_pmf(profile.p)
    tv = analysis.poisson_total_variation(pmf, profile.sum_p)
    bound = 2.0 * profile.sum_p_sq
    return [
        (
            trial,
            community,
            k1 if community == 1 else k2,
            f"{profile.sum_p:.10g}",
            f"{profile.sum_p_sq:.10g}",
            f"{tv:.10g}",
            f"{bound:.10g}",
            int(tv <= bound),
        )
    ]


_CSV_HEADERS = {
    "outcome_frequency": "trial,rounds_executed,s1,s2,minority1,minority2,terminal",
    "growth": "trial,s1,s2,s1_after,s2_after,event",
    "convergence": "trial,tau1,tau2,first_sign_flip,rounds_executed,success",
    "metastability": "trial,max_minority1,max_minority2,first_violation,first_sign_flip,threshold,success",
    "init_tail": "trial,s1",
    "bound_scan": "trial,config,community,color,count_in,count_other,exact,bound,ok",
    "poisson_scan": "trial,community,minority_planted,sum_p,sum_p_sq,tv,bound,ok",
    "csl_accuracy": "trial,intra_equal_rate,inter_diff_rate,accuracy,outlier_pairs,pairs_evaluated,success",
}


def _worker_chunk(payload) -> List[tuple]:
    cfg_dict, trial_indices = payload
    cfg = ExperimentConfig(**cfg_dict)
    rows: List[tuple] = []
    for t in trial_indices:
        rows.extend(_trial_rows(cfg, t))
    return rows


def _collect_rows(cfg: ExperimentConfig) -> List[tuple]:
    trials = list(range(cfg.trials))
    if cfg.workers == 1:
        rows: List[tuple] = []
        for t in trials:
            rows.extend(_trial_rows(cfg, t))
    else:
        chunk_count = min(len(trials), cfg.workers * 4)
        chunks = [
            (asdict(cfg), trials[i::chunk_count]) for i in range(chunk_count)
        ]
        rows = []
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_worker_chunk, chunks):
                rows.extend(part)
    rows.sort(key=lambda r: (r[0],) + tuple(str(x) for x in r[1:]))
    return rows


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def _summarize(cfg: ExperimentConfig, rows: List[tuple]) -> dict:
    kind = cfg.kind
    if kind == "outcome_frequency":
        terminals = [r[6] for r in rows]
        clustered = terminals.count(dynamics.ALMOST_CLUSTERED)
        mono = terminals.count(dynamics.MONOCHROMATIC)
        mixed = terminals.count(dynamics.MIXED)
        est = analysis.make_event_estimate(clustered, cfg.trials)
        freq_clustered = clustered / cfg.trials
        freq_mono = mono / cfg.trials
        ok = (cfg.freq_low <= freq_clustered <= cfg.freq_high) and freq_mono >= cfg.mono_min
        return {
            "freq_clustered": freq_clustered,
            "freq_mono": freq_mono,
            "freq_mixed": mixed / cfg.trials,
            "wilson_low": est.wilson_low,
            "wilson_high": est.wilson_high,
            "pass": ok,
        }

    if kind == "growth":
        g = resolve_graph(cfg)
        s1 = rows[0][1]
        successes = sum(r[5] for r in rows)
        est = analysis.make_event_estimate(successes, cfg.trials)
        bound = 1.0 - math.exp(-2.0 * s1 * s1 / (32.0 ** 2 * g.n))
        ok = est.estimate >= bound - est.half_width
        return {
            "planted_s1": s1,
            "frequency": est.estimate,
            "wilson_low": est.wilson_low,
            "wilson_high": est.wilson_high,
            "lower_bound": bound,
            "pass": ok,
        }

    if kind == "convergence":
        successes = sum(r[5] for r in rows)
        need = cfg.min_successes if cfg.min_successes is not None else math.ceil(0.95 * cfg.trials)
        taus = [max(r[1], r[2]) for r in rows if r[5]]
        return {
            "successes": successes,
            "required": need,
            "median_rounds_to_target": float(np.median(taus)) if taus else None,
            "pass": successes >= need,
        }

    if kind == "metastability":
        successes = sum(r[6] for r in rows)
        need = cfg.min_successes if cfg.min_successes is not None else math.ceil(0.99 * cfg.trials)
        return {
            "successes": successes,
            "required": need,
            "threshold": rows[0][5],
            "max_minority_overall": max(max(r[1], r[2]) for r in rows),
            "pass": successes >= need,
        }

    if kind == "init_tail":
        g = resolve_graph(cfg)
        s1 = np.array([r[1] for r in rows], dtype=np.int64)
        out = []
        ok = True
        for kap in (float(x) for x in cfg.kappas.split(",")):
            emp = float((s1 >= kap * math.sqrt(g.n)).mean())
            phibar = analysis.normal_upper_tail(kap)
            sampling = math.sqrt(max(emp * (1.0 - emp), 1e-12) / cfg.trials)
            slack = 0.5 / math.sqrt(g.n) + 3.0 * sampling
            within = abs(emp - phibar) <= slack
            ok = ok and within
            out.append(
                {
                    "kappa": kap,
                    "empirical": emp,
                    "normal_tail": phibar,
                    "slack": slack,
                    "pass": within,
                }
            )
        return {"tails": out, "pass": ok}

    if kind in ("bound_scan", "poisson_scan"):
        okcol = 8 if kind == "bound_scan" else 7
        checked = len(rows)
        violations = sum(1 for r in rows if not r[okcol])
        return {"checked": checked, "violations": violations, "pass": violations == 0}

    if kind == "csl_accuracy":
        successes = sum(r[6] for r in rows)
        need = cfg.min_successes if cfg.min_successes is not None else math.ceil(0.9 * cfg.trials)
        accs = np.array([float(r[3]) for r in rows])
        return {
            "successes": successes,
            "required": need,
            "threshold": cfg.accuracy_threshold,
            "median_accuracy": float(np.median(accs)),
            "min_accuracy": float(accs.min()),
            "pass": successes >= need,
        }

    raise AssertionError(f"unhandled kind {kind}")


def run_experiment(cfg: ExperimentConfig) -> Tuple[dict, int]:
    """Execute the experiment, write summary JSON + per-trial CSV, and
    return (summary, exit_code).  Exit code 1 means the experiment's
    acceptance assertion failed, 0 that it passed."""
    rows = _collect_rows(cfg)
    results = _summarize(cfg, rows)
    summary = {
        "version": OUTPUT_VERSION,
        "kind": cfg.kind,
        "config": asdict(cfg),
        "results": results,
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    label = cfg.resolved_label()
    csv_path = os.path.join(cfg.out_dir, f"{label}.trials.csv")
    with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_CSV_HEADERS[cfg.kind] + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    json_path = os.path.join(cfg.out_dir, f"{label}.summary.json")
    with open(json_path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary, 0 if results.get("pass", True) else 1
