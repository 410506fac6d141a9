import io

import numpy as np
import pytest

from safebo.gp import GPConfig, fit
from safebo.harness.benchmarks import (
    CAMELBACK_LIPSCHITZ,
    HARTMANN6_LIPSCHITZ,
    benchmark,
    gaussian10_level_radius,
    get_benchmark,
)
from safebo.harness.bound_check import BoundCheckConfig, band_violated, heuristic_bound_violation_experiment
from safebo.harness.campaign import (
    BenchmarkInstance,
    build_instances,
    read_steps_csv,
    run_campaign,
    sample_in_region,
    summarize,
)
from safebo.harness.config import ConfigError, config_from_dict
from safebo.harness.problem import (
    InstanceRejected,
    NoiseSpec,
    compute_threshold,
    estimate_lipschitz,
    initial_interval,
    normalized_metric,
    normalized_value,
    pick_initial_safe_set,
)
from safebo.kernels import Domain, Kernel
from safebo.los_gp_ucb import SafeRegion

UNIT = Domain.interval(0.0, 1.0)


def test_lipschitz_examples():
    assert estimate_lipschitz(lambda x: x.ravel(), UNIT) == pytest.approx(1.1)
    assert estimate_lipschitz(lambda x: np.full(len(x), 3.0), UNIT) == 0.0
    dom = Domain.interval(-2.0, 2.0)
    # max |cos| on [-2, 2] is 1 at 0
    assert estimate_lipschitz(lambda x: np.sin(x.ravel()), dom) == pytest.approx(1.1, rel=1e-6)


def test_lipschitz_multidimensional():
    dom = Domain.cube(-1, 1, 2)
    L = estimate_lipschitz(lambda x: 3 * x[:, 0] - 4 * x[:, 1], dom, grid_size=200)
    assert L == pytest.approx(1.1 * 5.0, rel=1e-9)


def test_threshold_examples():
    assert compute_threshold(lambda x: np.full(len(x), 2.5), UNIT) == pytest.approx(2.5)
    step = lambda x: (x.ravel() >= 0.5).astype(float)
    assert compute_threshold(step, UNIT, grid_size=2000) == pytest.approx(0.4)


def test_threshold_refinement_stable():
    from safebo.rkhs import sample_se_onb
    dom = Domain.interval(-2, 2)
    for seed in range(5):
        f = sample_se_onb(0.2 / np.sqrt(2), dom, 40, 10.0, seed)
        assert abs(compute_threshold(f, dom, 2000) - compute_threshold(f, dom, 4000)) < 1e-3


def test_initial_safe_set_piecewise_linear():
    # tent with super-level set {f >= 0.6} = [0.3, 0.7]
    f = lambda x: 1.0 - 2.0 * np.abs(x.ravel() - 0.5)
    for seed in range(20):
        p = pick_initial_safe_set(f, UNIT, h=0.5, E=0.1, rng_seed=seed, grid=np.linspace(0, 1, 1001))
        assert p.shape == (1, 1)
        assert 0.3 - 1e-12 <= p[0, 0] <= 0.7 + 1e-12


def test_initial_safe_set_whole_domain():
    values = np.full(11, 1.0)
    assert initial_interval(values, 1.0) == (0, 10)


def test_initial_safe_set_rejected():
    with pytest.raises(InstanceRejected):
        pick_initial_safe_set(lambda x: np.zeros(len(x)), UNIT, h=0.0, E=0.1, rng_seed=0)


def test_normalized_metric_examples():
    assert normalized_value(1.5, 2.0, 0.0) == 0.75
    f = lambda x: 2.0 - (np.asarray(x).ravel() - 0.3) ** 2
    post = fit(GPConfig(Kernel("se", 0.2), 0.01), [[0.3]], [5.0])
    assert normalized_metric(f, post, [[0.3], [0.9]], h=1.0, f_star=2.0) == pytest.approx(1.0)
    assert normalized_metric(f, post, [[0.9], [1.3]], h=1.0, f_star=2.0) == pytest.approx(0.64)


def test_uniform_noise_bounded():
    n = NoiseSpec("uniform", 0.01)
    s = n.sample(np.random.default_rng(0), 10_000)
    assert np.all(np.abs(s) <= 0.01)
    assert n.subgaussian_constant == 0.01


def test_benchmark_examples():
    x0 = np.zeros(10)
    assert benchmark("gaussian10", x0) == 1.0
    x = np.zeros(10)
    x[0] = 0.5
    assert benchmark("gaussian10", x) == pytest.approx(np.exp(-1.0))
    r = gaussian10_level_radius(0.4)
    assert r**2 == pytest.approx(np.log(2.5) / 4)
    with pytest.raises(ValueError):
        benchmark("gaussian10", np.full(10, 1.5))


def test_camelback_and_hartmann_ranges():
    rng = np.random.default_rng(0)
    for name, L in (("camelback2", CAMELBACK_LIPSCHITZ), ("hartmann6", HARTMANN6_LIPSCHITZ)):
        b = get_benchmark(name)
        v = b(b.domain.uniform(rng, 20_000))
        assert v.min() >= 0.0 and v.max() <= 1.0
        assert L > 0
    # optimum values
    assert benchmark("hartmann6", [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]) == \
        pytest.approx(1.0, abs=1e-5)
    assert benchmark("camelback2", [0.0898, -0.7126]) == pytest.approx(1.0, abs=1e-6)
    assert benchmark("camelback2", [-2.0, -1.0]) == pytest.approx(0.0, abs=1e-12)


def test_benchmark_lipschitz_constants_are_upper_bounds():
    rng = np.random.default_rng(1)
    for name in ("camelback2", "hartmann6"):
        b = get_benchmark(name)
        x = b.domain.uniform(rng, 5000)
        h = 1e-6
        d = b.dimension
        lo, hi = b.domain.lower_array + h, b.domain.upper_array - h
        x = np.clip(x, lo, hi)
        g = np.stack([(b(x + h * e) - b(x - h * e)) / (2 * h) for e in np.eye(d)], axis=1)
        assert np.sqrt((g**2).sum(axis=1)).max() <= b.lipschitz


def test_sample_in_region_uniform_on_union():
    dom = Domain.interval(-1, 1)
    region = SafeRegion(np.array([[0.0], [0.2]]), np.array([0.2, 0.2]), dom)
    rng = np.random.default_rng(0)
    pts = np.array([sample_in_region(region, rng)[0] for _ in range(20_000)])
    assert region.contains_many(pts[:, None]).all()
    # union is [-0.2, 0.4]: uniform -> mean 0.1, and both halves equally likely
    assert pts.mean() == pytest.approx(0.1, abs=0.01)
    assert np.mean(pts < 0.1) == pytest.approx(0.5, abs=0.02)
    single = SafeRegion.from_points([[0.3]], dom)
    assert sample_in_region(single, rng)[0] == 0.3


def test_bound_check_examples():
    wide = heuristic_bound_violation_experiment(BoundCheckConfig(num_functions=2, num_datasets=5, beta=1e6))
    assert wide.fraction == 0.0
    assert not band_violated(np.ones(3), np.ones(3), np.zeros(3), 2.0)
    assert band_violated(np.ones(3), np.zeros(3), np.full(3, 0.4), 2.0)


def test_bound_check_interpolation_limit():
    from safebo.rkhs import sample_se_onb
    ell = 0.2 / np.sqrt(2)
    f = sample_se_onb(ell, Domain.interval(-2, 2), 40, 10.0, 0)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 100)
    post = fit(GPConfig(Kernel("se", ell), 1e-8), x, f(x))
    m, s = post.predict(x, return_std=True)
    assert not band_violated(f(x), m, np.maximum(s, 1e-3), 2.0)


SMALL = dict(name="t", seed=5, repetitions=2, iterations=5, functions=dict(count=2))


def _cfg(**over):
    d = dict(SMALL, algorithms=[{"type": "losbo"},
                                {"type": "safeopt", "label": "rb",
                                 "bound": {"strategy": "abbasi_yadkori", "B": "true_norm", "R": "noise",
                                           "delta": 0.01}},
                                {"type": "los_gp_ucb"}, {"type": "random_search"}])
    d.update(over)
    return config_from_dict(d)


def test_campaign_zero_repetitions():
    res = run_campaign(_cfg(repetitions=0))
    assert res.records == []
    assert res.steps_csv().strip().count("\n") == 0


def test_campaign_shape_and_safety():
    cfg = _cfg()
    res = run_campaign(cfg)
    assert len(res.records) == 2 * 2 * 4
    for r in res.records:
        assert not r.failed, r.error
        assert len(r.steps) == cfg.iterations
    assert res.violations_where_forbidden() == 0
    rows = {row["algorithm"]: row for row in res.summary}
    assert set(rows) == {"losbo", "rb", "los_gp_ucb", "random_search"}


def test_campaign_deterministic_and_order_invariant():
    a, b = run_campaign(_cfg()), run_campaign(_cfg())
    assert a.steps_csv() == b.steps_csv()
    assert a.summary_csv() == b.summary_csv()
    shuffled = list(a.records)
    np.random.default_rng(0).shuffle(shuffled)
    assert summarize(shuffled, [x.label for x in a.config.algorithms]) == a.summary


def test_noise_shared_across_algorithms():
    res = run_campaign(_cfg(repetitions=1, functions=dict(count=1)))
    first = {r.algorithm: r.steps[0] for r in res.records}
    # LoSBO and SafeOpt query the same initial point first and see the same noise
    assert first["losbo"].x == first["rb"].x
    assert first["losbo"].y == first["rb"].y


def test_failed_run_is_recorded():
    cfg = _cfg(algorithms=[{"type": "safeopt", "bound": {"strategy": "abbasi_yadkori", "B": "true_norm",
                                                         "R": "noise", "delta": 0.01}},
                           {"type": "losbo", "label": "broken", "model": {"noise_variance": -1.0}}])
    res = run_campaign(cfg)
    broken = [r for r in res.records if r.algorithm == "broken"]
    assert broken and all(r.failed and "noise_variance" in r.error for r in broken)
    assert all(not r.failed for r in res.records if r.algorithm == "safeopt")


def test_report_roundtrip():
    res = run_campaign(_cfg())
    back = read_steps_csv(io.StringIO(res.steps_csv()))
    assert summarize(back, [a.label for a in res.config.algorithms]) == res.summary


def test_misspecified_models_keep_losbo_safe():
    for factor in (4.0, 0.2):
        cfg = _cfg(repetitions=3, iterations=10,
                   algorithms=[{"type": "losbo", "model": {"length_scale_factor": factor}}])
        res = run_campaign(cfg)
        assert all(not r.failed for r in res.records)
        assert sum(r.safety_violation_count for r in res.records) == 0
    matern = _cfg(repetitions=3, iterations=10,
                  functions=dict(count=2, kind="pre_rkhs", family="matern32", length_scale=0.3),
                  algorithms=[{"type": "losbo", "model": {"family": "se"}}])
    res = run_campaign(matern)
    assert sum(r.safety_violation_count for r in res.records) == 0


def test_benchmark_instances():
    cfg = _cfg(functions=dict(source="benchmark", benchmark="gaussian10", count=1), iterations=3,
               algorithms=[{"type": "los_gp_ucb"}, {"type": "random_search"}])
    (inst,) = build_instances(cfg)
    assert isinstance(inst, BenchmarkInstance)
    x0 = inst.draw_initial_point(np.random.default_rng(0))
    assert inst.target(x0[None, :])[0] == pytest.approx(0.4)
    res = run_campaign(cfg)
    assert all(not r.failed for r in res.records), [r.error for r in res.records]
    camel = _cfg(functions=dict(source="benchmark", benchmark="camelback2", count=1), iterations=3,
                 algorithms=[{"type": "los_gp_ucb"}])
    res = run_campaign(camel)
    assert not res.records[0].failed, res.records[0].error


@pytest.mark.parametrize("bad", [
    dict(algorithms=[]),
    dict(algorithms=[{"type": "nope"}]),
    dict(functions=dict(source="somewhere")),
    dict(noise=dict(kind="laplace")),
    dict(iterations=0),
    dict(algorithms=[{"type": "losbo"}, {"type": "losbo"}]),
])
def test_config_errors(bad):
    d = dict(SMALL, algorithms=[{"type": "losbo"}])
    d.update(bad)
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_workers_env(monkeypatch):
    from safebo.harness.config import worker_count
    monkeypatch.setenv("SAFEBO_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SAFEBO_WORKERS", "x")
    with pytest.raises(ConfigError):
        worker_count()


def test_parallel_equals_serial():
    cfg = _cfg(algorithms=[{"type": "losbo"}, {"type": "random_search"}])
    assert run_campaign(cfg, workers=2).steps_csv() == run_campaign(cfg, workers=1).steps_csv()
