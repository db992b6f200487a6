import math

import numpy as np
import pytest

from sephydro import duality as du
from sephydro.domain import build_domain


def test_duality_fn_trivial_and_single_particle():
    # empty dual configuration
    assert du.duality_fn([0, 1, 2], [0, 0, 0], [0, 0], 0.7, 2) == 1.0
    # one dual particle at an interior site: D = s(x)/m
    for s in (0, 1, 2, 3):
        got = du.duality_fn([s], [1], [], 0.5, 3)
        assert got == pytest.approx(s / 3.0)
    # indicator kills s' > s
    assert du.duality_fn([1], [2], [], 0.5, 3) == 0.0


def test_duality_fn_boundary_weight_and_sink():
    assert du.duality_fn([0], [0], [2], 0.5, 1) == 0.25
    # sink alpha=0: boundary exponent 0 must give 1, positive must give 0
    assert du.duality_fn([1], [0], [0], 0.0, 1) == 1.0
    assert du.duality_fn([1], [0], [1], 0.0, 1) == 0.0


def test_duality_fn_rejects_overfull_dual():
    with pytest.raises(ValueError):
        du.duality_fn([2], [3], [], 0.5, 2)
    with pytest.raises(ValueError):
        du.duality_fn([2], [-1], [], 0.5, 2)


def test_duality_fn_bounds_and_monotonicity(rng):
    m = 3
    for _ in range(200):
        s = rng.integers(0, m + 1, size=4)
        sp = rng.integers(0, m + 1, size=4)
        bnd = rng.integers(0, 3, size=2)
        val = du.duality_fn(s, sp, bnd, 0.6, m)
        assert 0.0 <= val <= 1.0
        # adding a dual particle can only decrease D
        j = int(rng.integers(0, 4))
        if sp[j] < m:
            sp2 = sp.copy()
            sp2[j] += 1
            assert du.duality_fn(s, sp2, bnd, 0.6, m) <= val + 1e-15


def test_four_state_dual_chain():
    g = du.LatticeGraph.segment(2)
    gen = du.build_generator(g, 1, 0.0, du.GeneratorKind.DUAL_SINK,
                             n_particles=1)
    assert gen.n_states == 4
    # rows sum to zero
    row_sums = np.asarray(gen.q.sum(axis=1)).ravel()
    assert np.max(np.abs(row_sums)) < 1e-12
    # off-diagonals nonnegative
    q = gen.q.toarray()
    off = q - np.diag(np.diag(q))
    assert off.min() >= 0.0


def test_primal_emission_rate_one_site():
    # single interior site, m=2, reservoir alpha: per-boundary emission rate
    # (1/2) alpha (m-k)/m
    alpha = 0.8
    g = du.LatticeGraph.segment(1)
    gen = du.build_generator(g, 2, alpha, du.GeneratorKind.PRIMAL)
    q = gen.q.toarray()
    for k in (0, 1):
        i = gen.index[(0, k, 0)]
        j = gen.index[(0, k + 1, 0)]
        expected = 2 * 0.5 * alpha * (2 - k) / 2  # two boundary sites
        assert q[i, j] == pytest.approx(expected)


def test_generator_rejects_large_spaces():
    g = du.LatticeGraph.segment(20)
    with pytest.raises(du.StateSpaceTooLarge):
        du.build_generator(g, 2, 0.5, du.GeneratorKind.PRIMAL)


def test_expectation_edge_cases():
    g = du.LatticeGraph.segment(1)
    gen = du.build_generator(g, 1, 0.4, du.GeneratorKind.PRIMAL)
    init = (0, 1, 0)
    assert du.expectation(gen, 0.0, init, lambda s: float(s[1])) == 1.0
    for t in (0.3, 2.0, 40.0):
        assert du.expectation(gen, t, init, lambda s: 1.0) == pytest.approx(
            1.0, abs=1e-10)


def test_expectation_two_state_closed_form():
    g = du.LatticeGraph.segment(1)
    alpha = 0.3
    gen = du.build_generator(g, 1, alpha, du.GeneratorKind.PRIMAL)
    a = alpha          # up rate: two edges, each (1/2) alpha
    b = 1.0 - alpha    # down rate
    for t in (0.1, 1.0, 5.0):
        got = du.expectation(gen, t, (0, 0, 0), lambda s: float(s[1]))
        ref = a / (a + b) * (1.0 - math.exp(-(a + b) * t))
        assert abs(got - ref) < 1e-10


def test_expectation_long_horizon_splitting():
    # lam*t beyond the direct Poisson window exercises the recursive split
    g = du.LatticeGraph.segment(1)
    gen = du.build_generator(g, 1, 0.3, du.GeneratorKind.PRIMAL)
    got = du.expectation(gen, 2000.0, (0, 0, 0), lambda s: float(s[1]))
    assert abs(got - 0.3) < 1e-9  # stationary value a/(a+b) = alpha


def test_check_duality_identity(rng):
    g = du.LatticeGraph.segment(3)
    worst = 0.0
    for _ in range(6):
        s = [0] * 5
        for i in (1, 2, 3):
            s[i] = int(rng.integers(0, 3))
        sp = [0] * 5
        for _ in range(int(rng.integers(1, 3))):
            sp[int(rng.integers(0, 5))] += 1
        if any(sp[i] > 2 for i in (1, 2, 3)):
            continue
        for t in (0.0, 0.5, 2.0):
            lhs, rhs, gap = du.check_duality(g, 2, 0.7, s, sp, t)
            worst = max(worst, gap)
            if t == 0.0:
                assert gap == 0.0
    assert worst <= 1e-8


def test_check_duality_empty_dual_is_one():
    g = du.LatticeGraph.segment(2)
    for t in (0.2, 1.0, 4.0):
        lhs, rhs, gap = du.check_duality(g, 2, 0.5, (0, 1, 2, 0), (0, 0, 0, 0), t)
        assert lhs == pytest.approx(1.0, abs=1e-10)
        assert rhs == pytest.approx(1.0, abs=1e-10)


def test_single_particle_dual_generator_symmetric(small_2d):
    g = du.LatticeGraph.from_domain(small_2d)
    gen = du.build_generator(g, 2, 0.0, du.GeneratorKind.DUAL_SINK,
                             n_particles=1)
    # restrict to states whose particle sits on an interior site
    keep = [i for i, s in enumerate(gen.states)
            if any(s[j] for j in g.interior_indices)]
    sub = gen.q.toarray()[np.ix_(keep, keep)]
    off = sub - np.diag(np.diag(sub))
    assert np.max(np.abs(off - off.T)) < 1e-14


def test_dual_absorption_time_zero(small_2d):
    est, se = du.dual_absorption_prob(small_2d, 2, (4, 0), 0.0, 500, 3)
    assert est == 0.0


def test_dual_absorption_symmetry(small_2d):
    a, se_a = du.dual_absorption_prob(small_2d, 1, (4, 0), 15.0, 20000, 5)
    b, se_b = du.dual_absorption_prob(small_2d, 1, (-4, 0), 15.0, 20000, 6)
    assert abs(a - b) <= 3.0 * math.hypot(se_a, se_b)


def test_dual_absorption_vs_uniformization_oracle():
    dom = build_domain(2, 2, 7)
    x, t = (4, 0), 12.0
    exact = du.dual_absorption_exact(dom, 2, x, t)
    est, se = du.dual_absorption_prob(dom, 2, x, t, 40000, 11)
    assert abs(est - exact) <= 3.0 * se


def test_dual_absorption_eventually_certain():
    # reflecting outer wall makes the finite chain recurrent: absorption -> 1
    dom = build_domain(1, 1, 4)
    exact = du.dual_absorption_exact(dom, 1, (2,), 400.0)
    assert exact > 0.9999
    est, _ = du.dual_absorption_prob(dom, 1, (2,), 400.0, 3000, 21)
    assert est > 0.995


def test_dual_absorption_rejects_non_interior(small_2d):
    with pytest.raises(ValueError):
        du.dual_absorption_prob(small_2d, 1, (1, 0), 1.0, 10, 0)
