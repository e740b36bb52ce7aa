"""Scenario runners behind the CLI.

Every trial draws its own random deployment and initial estimates from
counter-based streams keyed on ``(config.seed, trial)``, so results do not
depend on worker count or execution order. Trials are merged in index
order before anything is written.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .. import counter, engine, metrics, oracle
from ..engine import RaisingConfig
from ..functions import SpreadingFunction, for_graph, hazard as hazard_fn
from ..graph import GeometricConfig, Graph, generate_geometric, shrunken
from ..perturb import PerturbationModel, PerturbedEdges
from .config import ExperimentConfig

log = logging.getLogger(__name__)

STREAM_GRAPH = 1
STREAM_INITIAL = 2
STREAM_DOSE = 3
STREAM_NOISE = 4
STREAM_SMALL = 5

BOUND_SLACK = 1e-9


class CheckFailure(RuntimeError):
    pass


@dataclass
class Trial:
    index: int
    graph: Graph
    f: SpreadingFunction
    analysis: oracle.StationaryAnalysis
    initial: np.ndarray
    eps: float | None = None


def trial_seed(cfg: ExperimentConfig, index: int, stream: int = STREAM_GRAPH) -> int:
    return int(counter.hash_keys(cfg.seed, stream, index))


def make_graph(cfg: ExperimentConfig, index: int) -> Graph:
    gs = cfg.graph
    pinned = {0: gs.source_position} if gs.source_position is not None else {}
    geo = GeometricConfig(gs.width, gs.height, gs.radius, gs.node_count,
                          seed=trial_seed(cfg, index), pinned=pinned)
    return generate_geometric(geo, {0: 0.0})


def make_initial(cfg: ExperimentConfig, index: int, n: int) -> np.ndarray:
    u = counter.uniform(cfg.seed, STREAM_INITIAL, index, np.arange(n))
    return cfg.initial.low + (cfg.initial_high - cfg.initial.low) * u


def resolve_eps(cfg: ExperimentConfig, g: Graph) -> float | None:
    p = cfg.perturbation
    if p is None:
        return None
    eps = p.eps_abs if p.eps_abs is not None else p.eps_fraction * g.e_min
    if eps >= g.e_min:
        raise CheckFailure(f"eps={eps} is not below this deployment's e_min={g.e_min}")
    return eps


def make_trial(cfg: ExperimentConfig, index: int) -> Trial:
    g = make_graph(cfg, index)
    f = for_graph(cfg.function, g)
    return Trial(index, g, f, oracle.stationary(g, f), make_initial(cfg, index, g.node_count),
                 resolve_eps(cfg, g))


def noise_model(cfg: ExperimentConfig, eps: float, index: int) -> PerturbationModel:
    p = cfg.perturbation
    return PerturbationModel(p.kind, eps, seed=int(counter.hash_keys(p.seed, STREAM_NOISE, index)))


@dataclass
class RunResult:
    plus: list[float]
    minus: list[float]
    conv_plus: int | None
    conv_minus: int | None
    conv: int | None
    extra: dict[str, Any] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)


def run_unperturbed(trial: Trial, raising: RaisingConfig, max_rounds: int) -> RunResult:
    """One noise-free run checked against the convergence-time bound."""
    series = metrics.ErrorSeries(trial.analysis.x)
    engine.run(trial.graph, trial.f, raising, trial.initial, max_rounds,
               observers=[series], record_every=0, stop_when_stationary=True)
    conv = metrics.convergence_round(series)
    bound = oracle.convergence_time_bound(trial.analysis, trial.graph, trial.f, raising, trial.initial)
    res = RunResult(series.delta_plus, series.delta_minus,
                    metrics.component_convergence_round(series.delta_plus),
                    metrics.component_convergence_round(series.delta_minus), conv,
                    extra={"bound": bound})
    if conv is None and bound < len(series.delta_plus) - 1:
        res.violations.append(f"trial {trial.index}: not converged by round {len(series.delta_plus) - 1} "
                              f"although the bound is {bound}")
    elif conv is not None and conv > bound:
        res.violations.append(f"trial {trial.index}: converged at {conv} after the bound {bound}")
    return res


def run_perturbed(trial: Trial, raising: RaisingConfig, model: PerturbationModel,
                  ub: oracle.UltimateBound, horizon: int) -> RunResult:
    """One noisy run; checked against the ultimate bound when the dead zone allows."""
    series = metrics.ErrorSeries(trial.analysis.x)
    engine.run(trial.graph, trial.f, raising, trial.initial, horizon,
               edge_view=PerturbedEdges(model, trial.graph), observers=[series], record_every=0)
    tail = max(1, len(series.delta_plus) // 10)
    res = RunResult(series.delta_plus, series.delta_minus,
                    metrics.time_below(series.delta_plus, ub.bound_plus, sustained=True),
                    metrics.time_below(series.delta_minus, ub.bound_minus, sustained=True),
                    metrics.time_below(series.max_abs, ub.bound, sustained=True))
    res.extra = {
        "floor_plus": float(np.mean(series.delta_plus[-tail:])),
        "floor_minus": float(np.mean(series.delta_minus[-tail:])),
        "time_bound": ub.time_bound,
        "exceeds_plus_after_time_bound": bool(
            np.any(np.asarray(series.delta_plus[ub.time_bound:]) > ub.bound_plus)),
    }
    if raising.deadzone >= ub.min_deadzone and ub.time_bound < len(series.max_abs):
        worst = float(np.max(series.max_abs[ub.time_bound:]))
        if worst > ub.bound + BOUND_SLACK:
            res.violations.append(f"trial {trial.index}: error {worst} exceeds ultimate bound {ub.bound} "
                                  f"after round {ub.time_bound} (D={raising.deadzone})")
    return res


def plain_for(f: SpreadingFunction) -> RaisingConfig:
    return RaisingConfig(M=0.0, delta=max(1.0, f.sigma), deadzone=math.inf)


# ---------------------------------------------------------------- sweeps

def _sweep_values(cfg: ExperimentConfig) -> list[tuple[str, float]]:
    s = cfg.sweep
    if cfg.scenario == "sweep-delta":
        return [("delta_over_M", v) for v in s.delta_over_M]
    if cfg.scenario == "sweep-m":
        return [("M", v) for v in s.M]
    return [("deadzone_over_K", v) for v in s.deadzone_over_K]


def _sweep_raising(cfg: ExperimentConfig, key: str, value: float, K: float | None) -> RaisingConfig:
    r = cfg.raising
    if key == "delta_over_M":
        return RaisingConfig(r.M, value * r.M, r.deadzone)
    if key == "M":
        return RaisingConfig(value, value if r.delta is None else r.delta, r.deadzone)
    delta = r.M if r.delta is None else r.delta
    return RaisingConfig(r.M, delta, value * K)


def sweep_trial(cfg: ExperimentConfig, index: int) -> dict:
    trial = make_trial(cfg, index)
    K = None
    info: dict[str, Any] = {"diameter": trial.analysis.effective_diameter, "e_min": trial.graph.e_min}
    if cfg.scenario == "sweep-deadzone":
        ub = oracle.ultimate_bound(trial.graph, trial.f, trial.eps, analysis=trial.analysis)
        K = ub.min_deadzone
        info.update(eps=trial.eps, K=K, shrunken_diameter=ub.shrunken_diameter)
    runs = [run_unperturbed(trial, _sweep_raising(cfg, key, v, K), cfg.max_rounds)
            for key, v in _sweep_values(cfg)]
    return {"info": info, "runs": runs}


def perturbation_trial(cfg: ExperimentConfig, index: int) -> dict:
    trial = make_trial(cfg, index)
    r = cfg.raising
    delta = r.M if r.delta is None else r.delta
    base = RaisingConfig(r.M, delta, 0.0)
    ub = oracle.ultimate_bound(trial.graph, trial.f, trial.eps, base, trial.initial, trial.analysis)
    model = noise_model(cfg, trial.eps, index)
    runs = [run_perturbed(trial, RaisingConfig(r.M, delta, v * ub.min_deadzone), model, ub, cfg.max_rounds)
            for _, v in _sweep_values(cfg)]
    if cfg.include_plain:
        plain = plain_for(trial.f)
        ub_plain = oracle.ultimate_bound(trial.graph, trial.f, trial.eps, plain, trial.initial, trial.analysis)
        runs.append(run_perturbed(trial, plain, model, ub_plain, cfg.max_rounds))
    info = {"diameter": ub.diameter, "shrunken_diameter": ub.shrunken_diameter, "eps": trial.eps,
            "e_min": trial.graph.e_min, "K": ub.min_deadzone, "bound_plus": ub.bound_plus,
            "bound_minus": ub.bound_minus, "time_bound": ub.time_bound}
    return {"info": info, "runs": runs}


# ---------------------------------------------------------------- hazard

def zone_members(g: Graph, center, size) -> frozenset[int]:
    lo = np.asarray(center) - np.asarray(size) / 2
    hi = np.asarray(center) + np.asarray(size) / 2
    inside = np.all((g.positions >= lo) & (g.positions <= hi), axis=1)
    return frozenset(int(i) for i in np.flatnonzero(inside))


def clean_reachable(g: Graph, zone: frozenset[int]) -> np.ndarray:
    """Nodes with a path to a finite-maximum node avoiding the zone entirely."""
    ok = np.zeros(g.node_count, dtype=bool)
    frontier = [i for i in g.finite_sources if i not in zone]
    for i in frontier:
        ok[i] = True
    while frontier:
        i = frontier.pop()
        for k, _ in g.neighbors(i):
            if not ok[k] and k not in zone:
                ok[k] = True
                frontier.append(k)
    return ok


def _through_zone(zone: np.ndarray, constraining: np.ndarray) -> np.ndarray:
    """Whether each node's constraining chain visits the zone."""
    hit = zone.copy()
    for _ in range(len(zone)):
        nxt = zone | hit[constraining]
        if np.array_equal(nxt, hit):
            break
        hit = nxt
    return hit


class Contamination:
    """Observer recording per-round dose; radioactivity spreads by constraining-node adoption.

    A crossing is a round in which a node outside the zone that has a clean
    path adopts a constraining node whose current chain runs through the zone.
    """

    def __init__(self, zone_mask: np.ndarray, safe: np.ndarray, seed: int, hot: tuple, cold: tuple):
        self.zone = zone_mask
        self.safe = safe
        self.radioactive = zone_mask.copy()
        self.seed = seed
        self.hot = hot
        self.cold = cold
        self.crossings = 0
        self.doses: list[np.ndarray] = []

    def __call__(self, state: engine.SimulationState) -> None:
        if state.t == 0:
            return
        c = state.constraining
        adopted = c != np.arange(len(c))
        bad = adopted & ~self.zone & self.safe & _through_zone(self.zone, c)[c]
        self.crossings += int(bad.sum())
        self.radioactive |= self.radioactive[c]
        u = counter.uniform(self.seed, STREAM_DOSE, state.t, np.arange(len(c)))
        lo = np.where(self.radioactive, self.hot[0], self.cold[0])
        hi = np.where(self.radioactive, self.hot[1], self.cold[1])
        self.doses.append(lo + (hi - lo) * u)

    def dose_until(self, rounds: int) -> np.ndarray:
        """Per-node dose summed over rounds ``1..rounds``."""
        if rounds == 0:
            return np.zeros(len(self.zone))
        return np.sum(self.doses[:rounds], axis=0)


def hazard_trial(cfg: ExperimentConfig, index: int) -> dict:
    """Plain and general block on one deployment.

    Dose accrues from round 1 until the block converges to the stationary
    routes (or until ``max_rounds``), so a faster block collects less.
    """
    h = cfg.hazard
    g = make_graph(cfg, index)
    zone = zone_members(g, h.zone_center, h.zone_size) - g.finite_sources
    f = hazard_fn(zone, g.e_min, scale=h.scale, exponent=h.exponent)
    analysis = oracle.stationary(g, f)
    initial = make_initial(cfg, index, g.node_count)
    M = cfg.raising.M_over_xmax * analysis.x_max
    general = RaisingConfig(M, M, cfg.raising.deadzone)
    zone_mask = np.zeros(g.node_count, dtype=bool)
    zone_mask[list(zone)] = True
    safe = clean_reachable(g, frozenset(zone))
    dose_seed = trial_seed(cfg, index, STREAM_DOSE)
    out: dict[str, Any] = {"zone_size": len(zone), "x_max": analysis.x_max, "M": M,
                           "diameter": analysis.effective_diameter}
    for label, raising in (("plain", plain_for(f)), ("general", general)):
        tracker = Contamination(zone_mask, safe, dose_seed, h.dose_radioactive, h.dose_clean)
        series = metrics.ErrorSeries(analysis.x)
        engine.run(g, f, raising, initial, cfg.max_rounds, observers=[tracker, series], record_every=0,
                   stop_when_stationary=True)
        conv = metrics.convergence_round(series)
        dose = tracker.dose_until(cfg.max_rounds if conv is None else conv)
        out[label] = {
            "dose": dose,
            "total": float(dose.sum()),
            "radioactive": int(tracker.radioactive.sum()),
            "crossings": tracker.crossings,
            "converged_round": conv,
        }
    out["positions"] = g.positions
    out["zone_mask"] = zone_mask
    return out


# ---------------------------------------------------------------- oracle check

def random_small_graph(rng: np.random.Generator, n: int, probability_weights: bool = False) -> Graph:
    """Connected random graph on ``n`` nodes with random maxima and weights."""
    while True:
        p = rng.uniform(0.3, 0.9)
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p:
                    w = rng.uniform(0.05, 0.95) if probability_weights else rng.uniform(0.1, 3.0)
                    edges.append((i, j, float(w)))
        s = [math.inf] * n
        count = rng.integers(1, max(2, n // 2) + 1)
        for i in rng.choice(n, size=count, replace=False):
            s[int(i)] = float(rng.uniform(0.0, 0.5)) if probability_weights else float(rng.uniform(0.0, 4.0))
        g = Graph.from_edges(n, edges, s)
        if g.is_connected():
            return g


def small_function(name: str, g: Graph, rng: np.random.Generator) -> SpreadingFunction:
    if name == "hazard":
        zone = [i for i in range(g.node_count) if rng.random() < 0.4]
        return hazard_fn(zone, g.e_min, scale=10.0)
    if name == "hazard-empty":
        return hazard_fn((), g.e_min)
    return for_graph(name, g)


def oracle_check_trial(cfg: ExperimentConfig, index: int) -> dict:
    oc = cfg.oracle_check
    names = oc.functions if oc is not None else ["abf", "mpp", "hazard", "hazard-empty"]
    max_nodes = oc.max_nodes if oc is not None else 8
    rng = np.random.default_rng(trial_seed(cfg, index, STREAM_SMALL))
    failures: list[str] = []
    worst = 0.0
    for name in names:
        n = int(rng.integers(2, max_nodes + 1))
        g = random_small_graph(rng, n, probability_weights=(name == "mpp"))
        f = small_function(name, g, rng)
        failures += [f"trial {index} {name}: {p}" for p in check_instance(g, f, rng)]
        a = oracle.stationary_values(g, f)
        worst = max(worst, float(np.max(np.abs(a - oracle.stationary_bruteforce(g, f)))))
    return {"failures": failures, "worst_difference": worst}


def check_instance(g: Graph, f: SpreadingFunction, rng: np.random.Generator, tol: float = 1e-9) -> list[str]:
    """Invariant battery for one small instance; returns failure messages."""
    out = []
    fast = oracle.stationary_values(g, f)
    brute = oracle.stationary_bruteforce(g, f)
    sweep = oracle.stationary_sweep(g, f)
    if np.max(np.abs(fast - brute)) > tol:
        out.append(f"label-setting {fast} != brute force {brute}")
    if np.max(np.abs(fast - sweep)) > tol:
        out.append(f"label-setting {fast} != fixpoint sweep {sweep}")
    if oracle.fixpoint_residual(g, f, fast) > tol:
        out.append("fixpoint residual above tolerance")
    a = oracle.analyze(g, f, fast)
    state = engine.init(g, fast)
    if not np.array_equal(engine.step(state, g, f, engine.PLAIN).estimates, fast):
        out.append("one plain round moves the stationary point")
    covered = sorted(i for layer in a.layers for i in layer)
    if covered != list(range(g.node_count)) or any(not layer for layer in a.layers):
        out.append("layers do not partition the nodes into nonempty sets")
    if not (g.s_min_set <= a.layers[0] <= a.s_infinity) or not a.s_infinity:
        out.append("expected S_min within F_0 within S_inf, S_inf nonempty")
    for i in range(g.node_count):
        if i not in a.s_infinity and any(fast[k] >= fast[i] for k in a.true_constraining[i]):
            out.append(f"constraining relation not strictly decreasing at node {i}")
    if g.e_min > 0:
        eps = float(rng.uniform(0.0, g.e_min)) * 0.999
        lower = oracle.stationary(shrunken(g, eps), f)
        low = lower.x
        slack = oracle.geometric_sum(f.L2, lower.effective_diameter - 1) * f.L1 * eps
        if np.any(fast > low + slack + tol):
            out.append("stationary point exceeds shrunken value plus slack")
        if f.monotone_second and np.any(low > fast + tol):
            out.append("shrunken stationary point exceeds the original")
    return out


# ---------------------------------------------------------------- orchestration

TRIAL_FUNCS: dict[str, Callable[[ExperimentConfig, int], dict]] = {
    "sweep-delta": sweep_trial,
    "sweep-deadzone": sweep_trial,
    "sweep-m": sweep_trial,
    "perturbation": perturbation_trial,
    "hazard": hazard_trial,
    "oracle-check": oracle_check_trial,
}


def _call(args):
    cfg, index = args
    return TRIAL_FUNCS[cfg.scenario](cfg, index)


def run_trials(cfg: ExperimentConfig) -> list[dict]:
    jobs = [(cfg, j) for j in range(cfg.trials)]
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_call, jobs))
    return [_call(job) for job in jobs]


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _fmt(v: float) -> str:
    return f"{v:g}"


def _stride(values, stride: int):
    return values[::stride] if stride > 1 else values


def summarize_sweep(cfg: ExperimentConfig, results: list[dict], out: Path) -> dict:
    labels = _sweep_values(cfg)
    if cfg.scenario == "perturbation" and cfg.include_plain:
        labels = labels + [("plain", math.inf)]
    entries = []
    violations = []
    for j, (key, value) in enumerate(labels):
        runs = [r["runs"][j] for r in results]
        plus = metrics.envelope([_stride(r.plus, cfg.record_stride) for r in runs])
        minus = metrics.envelope([_stride(r.minus, cfg.record_stride) for r in runs])
        name = f"{cfg.scenario}_{j}_{key}_{_fmt(value)}.csv" if key != "plain" else f"{cfg.scenario}_{j}_plain.csv"
        metrics.write_envelope_csv(out / name, plus, minus)
        entry: dict[str, Any] = {"key": key, "value": value if math.isfinite(value) else "plain", "csv": name}
        if cfg.scenario == "perturbation":
            entry.update(
                mean_time_below_plus=_mean(r.conv_plus for r in runs),
                mean_time_below_minus=_mean(r.conv_minus for r in runs),
                mean_time_below_both=_mean(r.conv for r in runs),
                never_bounded_plus=sum(r.conv_plus is None for r in runs),
                never_bounded_minus=sum(r.conv_minus is None for r in runs),
                mean_floor_plus=_mean(r.extra["floor_plus"] for r in runs),
                mean_floor_minus=_mean(r.extra["floor_minus"] for r in runs),
                trials_exceeding_plus_after_time_bound=sum(r.extra["exceeds_plus_after_time_bound"] for r in runs),
            )
        else:
            entry.update(
                mean_convergence_plus=_mean(r.conv_plus for r in runs),
                mean_convergence_minus=_mean(r.conv_minus for r in runs),
                mean_convergence=_mean(r.conv for r in runs),
                unconverged=sum(r.conv is None for r in runs),
                mean_bound=_mean(r.extra["bound"] for r in runs),
            )
        for r in runs:
            violations += r.violations
        entries.append(entry)
    info_keys = sorted(results[0]["info"])
    summary = {
        "scenario": cfg.scenario,
        "trials": cfg.trials,
        "means": {k: _mean(r["info"][k] for r in results) for k in info_keys},
        "sweep": entries,
        "violations": violations,
    }
    return summary


def summarize_hazard(cfg: ExperimentConfig, results: list[dict], out: Path) -> dict:
    import csv

    trials = []
    for j, r in enumerate(results):
        name = f"hazard_trial{j}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "x", "y", "in_zone", "dose_plain", "dose_general"])
            for i in range(len(r["zone_mask"])):
                w.writerow([i, repr(float(r["positions"][i, 0])), repr(float(r["positions"][i, 1])),
                            int(r["zone_mask"][i]), repr(float(r["plain"]["dose"][i])),
                            repr(float(r["general"]["dose"][i]))])
        trials.append({
            "csv": name,
            "zone_size": r["zone_size"],
            "x_max": r["x_max"],
            "M": r["M"],
            **{f"{lab}_{k}": r[lab][k] for lab in ("plain", "general")
               for k in ("total", "radioactive", "crossings", "converged_round")},
        })
    violations = [f"trial {j}: general total {t['general_total']} not below plain total {t['plain_total']}"
                  for j, t in enumerate(trials) if not t["general_total"] < t["plain_total"]]
    violations += [f"trial {j}: {t[lab + '_crossings']} zone adoptions by nodes with a clean path ({lab})"
                   for j, t in enumerate(trials) for lab in ("plain", "general") if t[lab + "_crossings"]]
    return {"scenario": "hazard", "trials": trials, "violations": violations}


def summarize_oracle(cfg: ExperimentConfig, results: list[dict], out: Path) -> dict:
    failures = [msg for r in results for msg in r["failures"]]
    return {"scenario": "oracle-check", "trials": cfg.trials,
            "worst_difference": max(r["worst_difference"] for r in results),
            "violations": failures}


def execute(cfg: ExperimentConfig, out: str | Path) -> dict:
    """Run a scenario, write CSV files and ``summary.json`` under ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s with %d trials", cfg.scenario, cfg.trials)
    results = run_trials(cfg)
    if cfg.scenario == "hazard":
        summary = summarize_hazard(cfg, results, out)
    elif cfg.scenario == "oracle-check":
        summary = summarize_oracle(cfg, results, out)
    else:
        summary = summarize_sweep(cfg, results, out)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
