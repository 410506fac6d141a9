import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safebo.kernels import MATERN32, SQUARED_EXPONENTIAL, Domain, Kernel, gram, metric, pairwise_distances

FAMILIES = [SQUARED_EXPONENTIAL, MATERN32]


def test_se_at_zero_distance():
    assert Kernel("se", 1.0, 1.0).eval(0.3, 0.3) == 1.0


def test_se_at_sqrt2_length_scales():
    k = Kernel("se", 1.0, 1.0)
    assert k.eval(0.0, np.sqrt(2.0)) == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_matern_at_zero_distance():
    assert Kernel("matern32", 1.0, 1.0).eval(0.0, 0.0) == 1.0


def test_matern_formula():
    k = Kernel("matern32", 0.5, 2.0)
    r = 0.7
    s = np.sqrt(3.0) * r / 0.5
    assert k.eval([0.0], [r]) == pytest.approx(2.0 * (1 + s) * np.exp(-s), rel=1e-14)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        Kernel("se", 0.0, 1.0)
    with pytest.raises(ValueError):
        Kernel("se", 1.0, -1.0)
    with pytest.raises(ValueError):
        Kernel("periodic", 1.0, 1.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        Kernel().eval([0.0, 1.0], [0.0])


def test_gram_examples():
    k = Kernel("se", 1.0, 1.0)
    assert gram(k, np.zeros((0, 1))).shape == (0, 0)
    np.testing.assert_array_equal(gram(Kernel("se", 1.0, 3.0), [[0.5]]), [[3.0]])
    np.testing.assert_allclose(gram(k, [[1.0], [1.0]]), np.ones((2, 2)))
    e = np.exp(-1.0)
    np.testing.assert_allclose(gram(k, [[0.0], [np.sqrt(2.0)]]), [[1, e], [e, 1]], rtol=1e-15)


def test_metric_examples():
    assert metric([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert metric((0, 0), (3, 4)) == 5.0
    assert metric(0.0, -2.0) == 2.0


@pytest.mark.parametrize("family", FAMILIES)
def test_gram_psd_and_bounded(family):
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = Kernel(family, rng.uniform(0.05, 2.0), rng.uniform(0.1, 5.0))
        n, d = rng.integers(1, 21), rng.integers(1, 4)
        pts = rng.uniform(-2, 2, size=(n, d))
        K = gram(k, pts)
        np.testing.assert_array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * k.output_variance
        assert K.max() <= k.output_variance
        np.testing.assert_array_equal(np.diag(K), k.output_variance)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_metric_triangle_inequality(v):
    a, b, c = np.array(v[:2]), np.array(v[2:4]), np.array(v[4:])
    assert metric(a, c) <= metric(a, b) + metric(b, c) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.sampled_from(FAMILIES))
def test_kernel_symmetric(x, y, family):
    k = Kernel(family, 0.7, 1.3)
    assert k.eval(x, y) == k.eval(y, x)


def test_cross_covariance_matches_eval():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
    for family in FAMILIES:
        k = Kernel(family, 0.8, 1.5)
        M = k(a, b)
        for i in range(4):
            for j in range(3):
                assert M[i, j] == pytest.approx(k.eval(a[i], b[j]), rel=1e-12)
    np.testing.assert_allclose(pairwise_distances(a, b)[1, 2], np.linalg.norm(a[1] - b[2]))


def test_domain_grid_and_contains():
    d = Domain((-2.0, -1.0), (2.0, 1.0))
    g = d.grid(5)
    assert g.shape == (25, 2)
    assert all(d.contains(p) for p in g)
    assert not d.contains([2.0 + 1e-12, 0.0])
    with pytest.raises(ValueError):
        Domain((1.0,), (0.0,))


def test_kernel_dict_roundtrip():
    k = Kernel("matern32", 0.3, 2.0)
    assert Kernel.from_dict(k.to_dict()) == k
    assert k.scaled(4.0).length_scale == pytest.approx(1.2)
    assert k.scaled(1.0, "se").family == SQUARED_EXPONENTIAL
