"""Frequentist campaign runner.

A campaign runs every configured algorithm on every (function, repetition)
pair.  All randomness comes from ``numpy.random.SeedSequence`` streams keyed
by ``(seed, stream, function_id, ...)``:

* stream 0 draws the target functions,
* stream 1 draws the initial safe input of a repetition,
* stream 2 draws the observation noise (shared by all algorithms, so the
  t-th query of every algorithm sees the same noise draw),
* stream 3 drives algorithm-internal randomness (multistart, random search).

Runs are independent; they execute inline or in a process pool whose size is
read from ``SAFEBO_WORKERS``.  Records are sorted before aggregation, so the
output does not depend on completion order.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import gp as gpmod
from ..bounds import BoundSpec
from ..grid import LOSBO, SAFEOPT, STUCK, GridProblem, GridSafeBO
from ..kernels import Kernel, pairwise_distances
from ..los_gp_ucb import LoSGPUCB, SafeRegion, add_observation
from ..rkhs import load_function, sample_pre_rkhs, sample_se_onb
from .benchmarks import GAUSSIAN10_START_LEVEL, get_benchmark, gaussian10_level_radius
from .config import ZERO_VIOLATION_TYPES, worker_count
from .problem import InstanceRejected, compute_threshold, prepare_instance

__all__ = [
    "RunRecord",
    "StepRow",
    "CampaignResult",
    "BenchmarkInstance",
    "build_instances",
    "run_campaign",
    "run_single",
    "random_search_step",
    "sample_in_region",
    "write_steps_csv",
    "write_summary_csv",
    "summarize",
    "read_steps_csv",
    "STEP_COLUMNS",
    "SUMMARY_COLUMNS",
]

FUNCTION_STREAM, INITIAL_STREAM, NOISE_STREAM, ALGORITHM_STREAM = 0, 1, 2, 3
_MAX_REGENERATIONS = 100
# Gaussian10 is started on the level 0.4; its threshold is not given, 0.2 sits
# halfway between that level and zero
GAUSSIAN10_THRESHOLD = 0.2
BENCHMARK_NOISE_VARIANCE = 0.01
BENCHMARK_PRIOR_MEAN = 0.5

STEP_COLUMNS = ["function_id", "rep", "step", "algorithm", "x", "y", "f_x", "metric",
                "safe_set_size", "beta", "violation", "status"]
SUMMARY_COLUMNS = ["algorithm", "runs", "failed", "not_started_pct", "stuck_pct", "violation_pct",
                   "worst_case_violation_pct", "final_performance_pct", "final_performance_sd_pct"]


def _seed(*key):
    return np.random.SeedSequence([int(k) for k in key])


def _rng(*key):
    return np.random.default_rng(_seed(*key))


@dataclass
class StepRow:
    step: int
    x: tuple
    y: float
    f_x: float
    metric: float
    safe_set_size: int
    beta: float
    violation: bool
    status: str


@dataclass
class RunRecord:
    """Outcome of one algorithm on one (function, repetition) pair."""

    algorithm: str
    function_id: int
    rep: int
    seed: tuple
    steps: list = field(default_factory=list)
    safety_violation_count: int = 0
    not_started: bool = False
    stuck: bool = False
    final_metric: float = float("nan")
    failed: bool = False
    error: str = ""

    @property
    def key(self):
        return (self.function_id, self.rep, self.algorithm)


@dataclass
class BenchmarkInstance:
    """Continuous-domain benchmark with its threshold and Lipschitz bound."""

    name: str
    target: object
    domain: object
    threshold: float
    lipschitz: float
    noise_margin: float
    noise: object
    f_star: float = 1.0
    rkhs_norm: float | None = None

    def draw_initial_point(self, rng):
        if self.name == "gaussian10":
            d = self.domain.dimension
            u = rng.standard_normal(d)
            return u / np.linalg.norm(u) * gaussian10_level_radius(GAUSSIAN10_START_LEVEL)
        level = self.threshold + self.noise_margin
        for _ in range(100_000):
            x = self.domain.uniform(rng, 1)[0]
            if float(self.target(x[None, :])[0]) >= level:
                return x
        raise InstanceRejected(f"no initial point with f >= h + E found for {self.name}")


# ---------------------------------------------------------------- instances

def _generate_function(fspec, seed, function_id):
    domain = fspec.domain_obj
    for attempt in range(_MAX_REGENERATIONS):
        rng = _rng(seed, FUNCTION_STREAM, function_id, attempt)
        if fspec.kind == "se_onb":
            f = sample_se_onb(fspec.length_scale, domain, fspec.num_terms, fspec.norm, rng)
        else:
            f = sample_pre_rkhs(fspec.generation_kernel, domain, fspec.num_centers, fspec.norm, rng)
        yield f


def _instance_from_function(f, cfg):
    return prepare_instance(f, cfg.functions.domain_obj, cfg.noise, cfg.noise_margin,
                            cfg.grid_size, cfg.fine_grid_size, rkhs_norm=f.rkhs_norm)


def build_instances(cfg):
    """Problem instances of the campaign, in function-id order."""
    fspec = cfg.functions
    if fspec.source == "benchmark":
        bench = get_benchmark(fspec.benchmark)
        if fspec.threshold is not None:
            h = fspec.threshold
        elif bench.name == "gaussian10":
            h = GAUSSIAN10_THRESHOLD
        else:
            h = compute_threshold(bench, bench.domain)
        return [BenchmarkInstance(bench.name, bench, bench.domain, h, bench.lipschitz,
                                  cfg.noise_margin, cfg.noise, bench.optimum)
                for _ in range(fspec.count)]
    instances = []
    if fspec.source == "files":
        for path in fspec.files:
            instances.append(_instance_from_function(load_function(path), cfg))
        return instances
    for fid in range(fspec.count):
        for f in _generate_function(fspec, cfg.seed, fid):
            try:
                instances.append(_instance_from_function(f, cfg))
                break
            except InstanceRejected:
                continue
        else:
            raise InstanceRejected(f"function {fid}: no valid instance after {_MAX_REGENERATIONS} draws")
    return instances


# ---------------------------------------------------------------- algorithm setup

def _gp_config(alg, inst):
    m = alg.model
    if isinstance(inst, BenchmarkInstance):
        family = m.family or "se"
        base_ls = 1.0 / inst.lipschitz
        prior = BENCHMARK_PRIOR_MEAN if m.prior_mean is None else m.prior_mean
    else:
        family = m.family or inst.target.kernel.family
        base_ls = inst.target.kernel.length_scale
        prior = 0.0 if m.prior_mean is None else m.prior_mean
    ls = (m.length_scale or base_ls) * m.length_scale_factor
    if m.noise_variance in ("R", "noise"):
        lam = inst.noise.subgaussian_constant
    else:
        lam = float(m.noise_variance)
    return gpmod.GPConfig(Kernel(family, ls, m.output_variance), lam, prior)


def _bound_spec(alg, inst):
    raw = dict(alg.bound)
    if raw.get("B") in ("true_norm", "true"):
        if inst.rkhs_norm is None:
            raise ValueError("B: true_norm needs a target with known RKHS norm")
        raw["B"] = inst.rkhs_norm
    if raw.get("R") in ("noise", "R"):
        raw["R"] = inst.noise.subgaussian_constant
    return BoundSpec(**raw)


class _NoisyOracle:
    """Noisy evaluations of the target; records the exact value of the last query."""

    def __init__(self, target, noise, rng):
        self.target = target
        self.noise = noise
        self.rng = rng
        self.last_value = None

    def __call__(self, x):
        self.last_value = float(np.asarray(self.target(np.atleast_2d(x))).ravel()[0])
        return self.last_value + float(self.noise.sample(self.rng))


def _normalized(inst, value):
    return (value - inst.threshold) / (inst.f_star - inst.threshold)


# ---------------------------------------------------------------- single runs

def _run_grid(variant, inst, alg, s0, noise_rng, distances, iterations):
    oracle = _NoisyOracle(inst.target, inst.noise, noise_rng)
    problem = GridProblem(inst.grid, oracle, inst.threshold, inst.lipschitz, (s0,), inst.noise_margin)
    algo = GridSafeBO(problem, variant, _bound_spec(alg, inst), _gp_config(alg, inst), distances=distances)
    rows = []
    metric = _normalized(inst, inst.grid_values[s0])
    for t in range(1, iterations + 1):
        index = algo.step()
        if index is None:
            break
        fx = float(inst.grid_values[index])
        metric = _normalized(inst, inst.grid_values[algo.recommend()])
        rows.append(StepRow(t, tuple(inst.grid[index]), algo.history[-1][2], fx, metric,
                            int(algo.safe.sum()), algo.beta, fx < inst.threshold, "running"))
    stuck = algo.status == STUCK
    return rows, not algo.ever_expanded, stuck


def _run_los_gp_ucb(inst, alg, x0, noise_rng, alg_rng, iterations):
    oracle = _NoisyOracle(inst.target, inst.noise, noise_rng)
    algo = LoSGPUCB(inst.domain, oracle, inst.threshold, inst.lipschitz, inst.noise_margin,
                    np.atleast_2d(x0), _gp_config(alg, inst), _bound_spec(alg, inst),
                    alg.starts_per_ball, alg_rng)
    rows = []
    best = float(np.asarray(inst.target(np.atleast_2d(x0))).ravel()[0])
    for t in range(1, iterations + 1):
        x = algo.step()
        if not algo.region.contains(x):
            raise AssertionError("LoS-GP-UCB queried outside its certified region")
        fx = oracle.last_value
        best = max(best, fx)
        metric = _continuous_metric(inst, algo, best)
        rows.append(StepRow(t, tuple(x), algo.history[-1][1], fx, metric,
                            _region_size(algo.region), algo.beta,
                            fx < inst.threshold, "running"))
    return rows, not np.any(algo.region.radii > 0), False


def _region_size(region):
    """Initial point plus the number of balls with positive radius."""
    return 1 + int(np.count_nonzero(region.radii > 0))


def _continuous_metric(inst, algo, best):
    """Normalized value of the recommendation (1d targets) or best observed value (benchmarks)."""
    if isinstance(inst, BenchmarkInstance):
        return best
    x = algo.recommend(inst.grid)
    return _normalized(inst, float(np.asarray(inst.target(x[None, :])).ravel()[0]))


def sample_in_region(region, rng, max_tries=1000):
    """Uniform draw from the union of balls intersected with the box.

    A ball is picked with probability proportional to its volume, a point is
    drawn uniformly in it and accepted with probability ``1 / (number of balls
    containing it)`` if it lies in the box; this gives the uniform law on the
    union.  Zero-radius regions return a center.
    """
    d = region.domain.dimension
    radii = region.radii
    if not np.any(radii > 0):
        return region.centers[int(rng.integers(region.num_balls))].copy()
    # volumes relative to the largest ball, to stay finite in high dimension
    weights = (radii / radii.max()) ** d
    weights = weights / weights.sum()
    for _ in range(max_tries):
        j = int(rng.choice(region.num_balls, p=weights))
        u = rng.standard_normal(d)
        x = region.centers[j] + u / np.linalg.norm(u) * radii[j] * rng.uniform() ** (1.0 / d)
        if not region.domain.contains(x):
            continue
        count = int(np.sum(np.sqrt(((region.centers - x) ** 2).sum(axis=1)) <= radii))
        if count and rng.uniform() < 1.0 / count:
            return x
    return region.centers[int(np.argmax(radii))].copy()


def random_search_step(region, rng):
    return sample_in_region(region, rng)


def _run_random_search(inst, x0, noise_rng, alg_rng, iterations):
    oracle = _NoisyOracle(inst.target, inst.noise, noise_rng)
    region = SafeRegion.from_points(np.atleast_2d(x0), inst.domain)
    best = float(np.asarray(inst.target(np.atleast_2d(x0))).ravel()[0])
    best_observed_y, best_x = -np.inf, np.asarray(x0, dtype=float)
    rows = []
    for t in range(1, iterations + 1):
        x = random_search_step(region, alg_rng)
        if not region.contains(x):
            raise AssertionError("random search left the certified region")
        y = oracle(x)
        fx = oracle.last_value
        region = add_observation(region, x, y, inst.lipschitz, inst.noise_margin, inst.threshold)
        best = max(best, fx)
        if y > best_observed_y:
            best_observed_y, best_x = y, x
        if isinstance(inst, BenchmarkInstance):
            metric = best
        else:
            metric = _normalized(inst, float(np.asarray(inst.target(best_x[None, :])).ravel()[0]))
        rows.append(StepRow(t, tuple(x), y, fx, metric, _region_size(region),
                            float("nan"), fx < inst.threshold, "running"))
    return rows, not np.any(region.radii > 0), False


def _initial(inst, cfg, fid, rep):
    key = (cfg.seed, INITIAL_STREAM, fid) if cfg.initial_set == "per_function" else \
        (cfg.seed, INITIAL_STREAM, fid, rep)
    rng = _rng(*key)
    if isinstance(inst, BenchmarkInstance):
        return None, inst.draw_initial_point(rng)
    index = inst.draw_initial_index(rng)
    return index, inst.grid[index]


def run_single(cfg, inst, alg, fid, rep, distances=None):
    """One run; exceptions are captured in the returned record."""
    seed = (cfg.seed, fid, rep)
    record = RunRecord(alg.label, fid, rep, seed)
    try:
        s0, x0 = _initial(inst, cfg, fid, rep)
        noise_rng = _rng(cfg.seed, NOISE_STREAM, fid, rep)
        alg_rng = _rng(cfg.seed, ALGORITHM_STREAM, fid, rep)
        if alg.type in (SAFEOPT, LOSBO):
            if s0 is None:
                raise ValueError(f"{alg.type} needs a grid instance")
            if distances is None:
                distances = pairwise_distances(inst.grid, inst.grid)
            rows, not_started, stuck = _run_grid(alg.type, inst, alg, s0, noise_rng, distances,
                                                 cfg.iterations)
        elif alg.type == "los_gp_ucb":
            rows, not_started, stuck = _run_los_gp_ucb(inst, alg, x0, noise_rng, alg_rng, cfg.iterations)
        else:
            rows, not_started, stuck = _run_random_search(inst, x0, noise_rng, alg_rng, cfg.iterations)
    except Exception as exc:  # recorded, the campaign continues
        record.failed = True
        record.error = f"{type(exc).__name__}: {exc}"
        record.steps = []
        return record
    # stuck runs keep their last recommendation for the remaining steps
    if stuck:
        last_metric = rows[-1].metric if rows else _normalized(inst, inst.grid_values[s0])
        size = rows[-1].safe_set_size if rows else 1
        for t in range(len(rows) + 1, cfg.iterations + 1):
            rows.append(StepRow(t, (), float("nan"), float("nan"), last_metric, size,
                                float("nan"), False, STUCK))
    record.steps = rows
    record.safety_violation_count = int(sum(r.violation for r in rows))
    record.not_started = bool(not_started)
    record.stuck = bool(stuck)
    record.final_metric = rows[-1].metric if rows else float("nan")
    return record


# ---------------------------------------------------------------- campaign

@dataclass
class CampaignResult:
    config: object
    records: list
    summary: list

    def violations_where_forbidden(self):
        """Total violations of algorithms whose safety is unconditional."""
        kinds = {a.label: a.type for a in self.config.algorithms}
        return sum(r.safety_violation_count for r in self.records
                   if kinds.get(r.algorithm) in ZERO_VIOLATION_TYPES and self._bounded_noise())

    def _bounded_noise(self):
        return self.config.noise.bound <= self.config.noise_margin

    def steps_csv(self):
        buf = io.StringIO()
        write_steps_csv(self.records, buf)
        return buf.getvalue()

    def summary_csv(self):
        buf = io.StringIO()
        write_summary_csv(self.summary, buf)
        return buf.getvalue()


_WORKER_STATE = {}


def _init_worker(cfg, instances):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["instances"] = instances
    _WORKER_STATE["distances"] = {}


def _distances_for(fid):
    cache = _WORKER_STATE["distances"]
    inst = _WORKER_STATE["instances"][fid]
    if fid not in cache and not isinstance(inst, BenchmarkInstance):
        cache.clear()
        cache[fid] = pairwise_distances(inst.grid, inst.grid)
    return cache.get(fid)


def _run_job(job):
    fid, rep, alg_index = job
    cfg = _WORKER_STATE["cfg"]
    inst = _WORKER_STATE["instances"][fid]
    return run_single(cfg, inst, cfg.algorithms[alg_index], fid, rep, _distances_for(fid))


def run_campaign(cfg, instances=None, workers=None, progress=None):
    """Run all (function, repetition, algorithm) triples of ``cfg``."""
    if instances is None:
        instances = build_instances(cfg) if cfg.repetitions > 0 else []
    jobs = [(fid, rep, a) for fid in range(len(instances)) for rep in range(cfg.repetitions)
            for a in range(len(cfg.algorithms))]
    workers = worker_count() if workers is None else max(1, int(workers))
    records = []
    if workers == 1 or len(jobs) <= 1:
        _init_worker(cfg, instances)
        for i, job in enumerate(jobs):
            records.append(_run_job(job))
            if progress:
                progress(i + 1, len(jobs))
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(cfg, instances)) as pool:
            for i, rec in enumerate(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (8 * workers)))):
                records.append(rec)
                if progress:
                    progress(i + 1, len(jobs))
    _WORKER_STATE.clear()
    records.sort(key=lambda r: r.key)
    return CampaignResult(cfg, records, summarize(records, [a.label for a in cfg.algorithms]))


def summarize(records, labels=None):
    """Table-1 style rows per algorithm.

    Percentages are over non-failed runs.  ``violation_pct`` counts runs with
    at least one unsafe query; ``worst_case_violation_pct`` is the largest
    such rate over functions; ``final_performance_pct`` is the mean over
    functions of the per-function mean final metric, with the SD over all runs.
    """
    records = sorted(records, key=lambda r: r.key)  # exact invariance to run order
    if labels is None:
        labels = sorted({r.algorithm for r in records})
    rows = []
    for label in labels:
        mine = [r for r in records if r.algorithm == label]
        ok = [r for r in mine if not r.failed]
        row = {"algorithm": label, "runs": len(mine), "failed": len(mine) - len(ok)}
        if ok:
            by_fn = {}
            for r in ok:
                by_fn.setdefault(r.function_id, []).append(r)
            per_fn_viol = [np.mean([r.safety_violation_count > 0 for r in rs]) for rs in by_fn.values()]
            per_fn_perf = [np.mean([r.final_metric for r in rs]) for rs in by_fn.values()]
            row.update(
                not_started_pct=100.0 * float(np.mean([r.not_started for r in ok])),
                stuck_pct=100.0 * float(np.mean([r.stuck for r in ok])),
                violation_pct=100.0 * float(np.mean([r.safety_violation_count > 0 for r in ok])),
                worst_case_violation_pct=100.0 * float(max(per_fn_viol)),
                final_performance_pct=100.0 * float(np.mean(per_fn_perf)),
                final_performance_sd_pct=100.0 * float(np.std([r.final_metric for r in ok])),
            )
        else:
            row.update({c: float("nan") for c in SUMMARY_COLUMNS[3:]})
        rows.append(row)
    return rows


def per_step_statistics(records, label):
    """(mean, sd) of the metric per step over all non-failed runs of ``label``."""
    runs = [r for r in records if r.algorithm == label and not r.failed and r.steps]
    if not runs:
        return np.zeros(0), np.zeros(0)
    n = min(len(r.steps) for r in runs)
    m = np.array([[s.metric for s in r.steps[:n]] for r in runs])
    return m.mean(axis=0), m.std(axis=0)


# ---------------------------------------------------------------- CSV

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_steps_csv(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(STEP_COLUMNS)
    for r in records:
        if r.failed:
            w.writerow([r.function_id, r.rep, 0, r.algorithm, "", "", "", "", "", "", "", "failed"])
            continue
        for s in r.steps:
            w.writerow([r.function_id, r.rep, s.step, r.algorithm, ";".join(repr(float(v)) for v in s.x),
                        _fmt(s.y), _fmt(s.f_x), _fmt(s.metric), s.safe_set_size, _fmt(s.beta),
                        _fmt(bool(s.violation)), s.status])


def write_summary_csv(summary, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in summary:
        w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def _float(s):
    return float(s) if s != "" else float("nan")


def read_steps_csv(fh):
    """Rebuild run records (without seeds or error text) from a steps CSV."""
    records = {}
    for row in csv.DictReader(fh):
        key = (int(row["function_id"]), int(row["rep"]), row["algorithm"])
        rec = records.get(key)
        if rec is None:
            rec = records[key] = RunRecord(key[2], key[0], key[1], ())
        if row["status"] == "failed":
            rec.failed = True
            continue
        x = tuple(float(v) for v in row["x"].split(";")) if row["x"] else ()
        step = StepRow(int(row["step"]), x, _float(row["y"]), _float(row["f_x"]), _float(row["metric"]),
                       int(row["safe_set_size"]), _float(row["beta"]), row["violation"] == "1", row["status"])
        rec.steps.append(step)
    out = []
    for rec in records.values():
        if not rec.failed:
            rec.safety_violation_count = sum(s.violation for s in rec.steps)
            rec.stuck = any(s.status == STUCK for s in rec.steps)
            rec.final_metric = rec.steps[-1].metric if rec.steps else float("nan")
            # a run that never certified anything beyond its start keeps safe-set size 1
            rec.not_started = all(s.safe_set_size <= 1 for s in rec.steps) if rec.steps else True
        out.append(rec)
    out.sort(key=lambda r: r.key)
    return out


def write_outputs(result, directory):
    os.makedirs(directory, exist_ok=True)
    name = result.config.name
    steps = os.path.join(directory, f"{name}_steps.csv")
    summary = os.path.join(directory, f"{name}_summary.csv")
    with open(steps, "w", newline="") as fh:
        write_steps_csv(result.records, fh)
    with open(summary, "w", newline="") as fh:
        write_summary_csv(result.summary, fh)
    return steps, summary
