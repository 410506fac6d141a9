"""Literal, loop-based implementations used as test oracles."""
import numpy as np

from safebo.bounds import BoundSpec
from safebo.gp import GPConfig
from safebo.grid import GridProblem, GridSafeBO
from safebo.kernels import Kernel, gram


def literal_step(grid, lower, upper, q_lower, q_upper, safe, t, variant, lipschitz, threshold,
                 noise_margin=0.0, last=None):
    """One iteration of the grid algorithm written straight from its set definitions.

    ``last`` is ``(index, y)`` of the previous query (LoSBO only).  Returns
    ``(lower, upper, safe, expanders, maximizers, index)``.
    """
    n = len(grid)
    d = lambda i, j: float(np.linalg.norm(grid[i] - grid[j]))
    lo, up = [], []
    for i in range(n):
        a, b = max(lower[i], q_lower[i]), min(upper[i], q_upper[i])
        if a > b:
            a = min(a, upper[i])
            b = max(min(upper[i], q_upper[i]), a)
        lo.append(a)
        up.append(b)
    new_safe = set(np.flatnonzero(safe))
    if t > 1:
        if variant == "safeopt":
            for s in np.flatnonzero(safe):
                for j in range(n):
                    if lo[s] - lipschitz * d(s, j) >= threshold:
                        new_safe.add(j)
        else:
            k, y = last
            for j in range(n):
                if y - noise_margin - lipschitz * d(k, j) >= threshold:
                    new_safe.add(j)
    expanders = set()
    for s in new_safe:
        for j in range(n):
            if j not in new_safe and up[s] - lipschitz * d(s, j) >= threshold:
                expanders.add(s)
                break
    best_lower = max(lo[s] for s in new_safe)
    maximizers = {s for s in new_safe if up[s] >= best_lower}
    index, width = None, -np.inf
    for i in sorted(expanders | maximizers):
        if up[i] - lo[i] > width:
            index, width = i, up[i] - lo[i]
    return np.array(lo), np.array(up), new_safe, expanders, maximizers, index


def dense_oracle(cfg, x, y, xs):
    """Posterior from an explicit inverse and determinant."""
    k = cfg.kernel
    A = gram(k, x) + cfg.noise_variance * np.eye(len(x))
    Ainv = np.linalg.inv(A)
    ks = k(xs, x)
    mean = cfg.prior_mean + ks @ Ainv @ (y - cfg.prior_mean)
    var = k.output_variance - np.einsum("ij,jk,ik->i", ks, Ainv, ks)
    logdet = np.log(np.linalg.det(np.eye(len(x)) + gram(k, x) / cfg.noise_variance))
    return mean, var, logdet


def _snapshot(a):
    last = None
    if a.history:
        last = (a.history[-1][0], a.history[-1][2])
    return dict(lower=a.lower.copy(), upper=a.upper.copy(), q_lower=a.q_lower.copy(),
                q_upper=a.q_upper.copy(), safe=a.safe.copy(), last=last)


def random_oracle_instance(rng, variant):
    d = int(rng.integers(1, 3))
    grid = rng.uniform(-1, 1, size=(15, d))
    w = rng.normal(size=d)
    f = lambda x: float(np.sin(2 * x @ w) + 0.3 * x.sum())
    h = float(np.quantile([f(g) for g in grid], rng.uniform(0.1, 0.5)))
    start = int(np.argmax([f(g) for g in grid]))
    noise = np.random.default_rng(rng.integers(1 << 30))
    oracle = lambda x: f(x) + noise.uniform(-0.01, 0.01)
    prob = GridProblem(grid, oracle, h, lipschitz=float(rng.uniform(0.5, 4.0)), initial_safe=(start,),
                       noise_margin=0.02)
    bound = BoundSpec("fixed", float(rng.uniform(0.5, 3))) if rng.uniform() < 0.5 else \
        BoundSpec("abbasi_yadkori", B=float(rng.uniform(0.5, 5)), R=0.01, delta=0.01)
    a = GridSafeBO(prob, variant, bound, GPConfig(Kernel("se", float(rng.uniform(0.2, 1.0))), 0.01))
    for _ in range(int(rng.integers(0, 6))):
        if a.status != "running":
            break
        a.step()
    return a


def check_against_literal(a, variant):
    """Compare one real step with the literal oracle; returns True when compared."""
    if a.status != "running":
        return False
    s = _snapshot(a)
    p = a.problem
    lo, up, safe, G, M, idx = literal_step(p.grid, s["lower"], s["upper"], s["q_lower"], s["q_upper"],
                                           s["safe"], a.t + 1, variant, p.lipschitz, p.threshold,
                                           p.noise_margin, s["last"])
    chosen = a.step()
    np.testing.assert_array_equal(a.lower, lo)
    np.testing.assert_array_equal(a.upper, up)
    assert set(np.flatnonzero(a.safe)) == safe
    assert set(np.flatnonzero(a.expanders)) == G
    assert set(np.flatnonzero(a.maximizers)) == M
    assert chosen == idx
    return True
