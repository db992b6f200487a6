import math

import numpy as np
import pytest

from sephydro import duality as du
from sephydro import kernels
from sephydro import process as pr
from sephydro.domain import SiteClass, build_domain


def test_params_validation_and_kind():
    assert pr.ProcessParams(1, 0.0).boundary_kind == pr.BoundaryKind.SINK
    assert pr.ProcessParams(1, 0.4).boundary_kind == pr.BoundaryKind.RESERVOIR
    with pytest.raises(ValueError):
        pr.ProcessParams(0, 0.5)
    with pytest.raises(ValueError):
        pr.ProcessParams(1, 1.5)


def test_jump_rate_examples():
    # interior -> interior, d=2, m=3, k_x=2, k_y=1
    p = pr.ProcessParams(m=3, alpha=0.5)
    got = pr.jump_rate(p, 2, 2, 1, SiteClass.INTERIOR, SiteClass.INTERIOR)
    assert abs(got - 1.0 / 9.0) < 1e-15
    # reservoir -> full interior site
    got = pr.jump_rate(p, 2, 0, 3, SiteClass.BOUNDARY, SiteClass.INTERIOR)
    assert got == 0.0
    # sink absorption, d=1, m=2, k_x=1
    p0 = pr.ProcessParams(m=2, alpha=0.0)
    got = pr.jump_rate(p0, 1, 1, 0, SiteClass.INTERIOR, SiteClass.BOUNDARY)
    assert abs(got - 0.25) < 1e-15
    # boundary -> boundary carries no rate
    assert pr.jump_rate(p, 2, 0, 0, SiteClass.BOUNDARY, SiteClass.BOUNDARY) == 0.0
    with pytest.raises(ValueError):
        pr.jump_rate(p, 2, 5, 0, SiteClass.INTERIOR, SiteClass.INTERIOR)


def test_step_frozen_on_empty_sink(small_1d):
    params = pr.ProcessParams(m=1, alpha=0.0)
    cfg = pr.empty_configuration(small_1d, params)
    with pytest.raises(pr.Frozen):
        pr.step(cfg, small_1d, params, np.random.default_rng(0))


def test_step_first_event_is_emission(small_1d):
    params = pr.ProcessParams(m=1, alpha=1.0)
    cfg = pr.empty_configuration(small_1d, params)
    ev, dt = pr.step(cfg, small_1d, params, np.random.default_rng(1))
    assert ev.kind == pr.JumpKind.EMIT
    assert dt > 0.0
    assert cfg.n_particles == 1


def test_step_conservation_and_bounds(small_2d):
    params = pr.ProcessParams(m=2, alpha=0.7)
    cfg = pr.empty_configuration(small_2d, params)
    rng = np.random.default_rng(3)
    count = 0
    for _ in range(400):
        ev, _ = pr.step(cfg, small_2d, params, rng)
        if ev.kind == pr.JumpKind.EMIT:
            count += 1
        elif ev.kind in (pr.JumpKind.ABSORB, pr.JumpKind.ESCAPE):
            count -= 1
        occ = cfg.occ[small_2d.interior_flat]
        assert occ.min() >= 0 and occ.max() <= params.m
        assert cfg.n_particles == count


def test_absorbing_outer_wall_escapes():
    dom = build_domain(1, 1, 2, "absorbing")  # interior {±2} only
    params = pr.ProcessParams(m=1, alpha=1.0)
    cfg = pr.run_replica(dom, params, 200.0, 5)
    # with an absorbing outer wall the system keeps churning; occupancies stay valid
    occ = cfg.occ[dom.interior_flat]
    assert occ.min() >= 0 and occ.max() <= 1


def test_run_replica_basics(small_1d, params_m2):
    cfg = pr.run_replica(small_1d, params_m2, 0.0, 9)
    assert cfg.n_particles == 0 and cfg.time == 0.0
    a = pr.run_replica(small_1d, params_m2, 7.0, 123)
    b = pr.run_replica(small_1d, params_m2, 7.0, 123)
    assert np.array_equal(a.occ, b.occ)
    assert np.array_equal(a.absorbed, b.absorbed)
    c = pr.run_replica(small_1d, params_m2, 7.0, 124)
    assert not np.array_equal(a.occ, c.occ)  # overwhelmingly likely


def test_run_replica_frozen_fast_forward(small_1d):
    params = pr.ProcessParams(m=1, alpha=0.0)
    cfg = pr.run_replica(small_1d, params, 11.0, 77)
    assert cfg.frozen and cfg.time == 11.0 and cfg.n_particles == 0


def test_single_site_between_reservoirs_saturates():
    # interior {±2}; alpha=1 makes full occupancy absorbing
    dom = build_domain(1, 1, 2)
    params = pr.ProcessParams(m=1, alpha=1.0)
    cfg = pr.run_replica(dom, params, 60.0, 4)
    assert cfg.occupancy_at((2,)) == 1
    assert cfg.occupancy_at((-2,)) == 1


def test_saturation_matches_uniformization(small_1d):
    # d=1 rOut=3, m=1, alpha=1: all occupancies -> 1; oracle is the exact
    # finite chain driven through the generator exponential
    params = pr.ProcessParams(m=1, alpha=1.0)
    g = du.LatticeGraph.from_domain(small_1d)
    gen = du.build_generator(g, 1, 1.0, du.GeneratorKind.PRIMAL)
    zero = tuple([0] * g.n_sites)
    site = g.labels.index((2,))
    t_end = 60.0
    exact = du.expectation(gen, t_end, zero, lambda s: float(s[site]))
    assert exact > 0.999
    n = 300
    mc = np.mean([pr.run_replica(small_1d, params, t_end,
                                 pr.replica_seed(51, k)).occupancy_at((2,))
                  for k in range(n)])
    assert abs(mc - exact) <= 3.0 * math.sqrt(exact * (1 - exact) / n) + 1e-3


def test_kernel_marginals_match_uniformization(small_1d):
    params = pr.ProcessParams(m=2, alpha=0.6)
    t_end = 2.0
    g = du.LatticeGraph.from_domain(small_1d)
    gen = du.build_generator(g, 2, 0.6, du.GeneratorKind.PRIMAL)
    zero = tuple([0] * g.n_sites)
    n = 4000
    for site in [(-2,), (3,)]:
        i = g.labels.index(site)
        exact = du.expectation(gen, t_end, zero, lambda s: float(s[i]))
        mc = np.mean([pr.run_replica(small_1d, params, t_end,
                                     pr.replica_seed(1234, k)).occupancy_at(site)
                      for k in range(n)])
        assert abs(mc - exact) <= 3.0 * math.sqrt(2.0 / n), (site, mc, exact)


def test_step_loop_matches_kernel_law(small_1d):
    # the direct-method reference and the rejection kernel sample the same chain
    params = pr.ProcessParams(m=1, alpha=0.8)
    t_end = 1.5
    n = 1500
    rng = np.random.default_rng(8)
    site = (2,)
    tot_step = 0
    for _ in range(n):
        cfg = pr.empty_configuration(small_1d, params)
        while True:
            prev = cfg.occupancy_at(site)
            try:
                pr.step(cfg, small_1d, params, rng)
            except pr.Frozen:
                val = cfg.occupancy_at(site)
                break
            if cfg.time > t_end:
                val = prev  # the crossing jump lands after the horizon
                break
        tot_step += val
    mc_kernel = np.mean([pr.run_replica(small_1d, params, t_end,
                                        pr.replica_seed(999, k)).occupancy_at(site)
                         for k in range(n)])
    se = math.sqrt(2.0 * 0.25 / n)
    assert abs(tot_step / n - mc_kernel) <= 4.0 * se


def test_density_profile_examples(small_1d, params_m2):
    zero = pr.empty_configuration(small_1d, params_m2)
    est = pr.density_profile([zero, pr.empty_configuration(small_1d, params_m2)],
                             bin_width=1.0)
    assert est.replicas == 2
    assert np.all(est.means() == 0.0) and np.all(est.stderrs() == 0.0)

    full = pr.configuration_from_occupancy(
        small_1d, params_m2, {(2,): 2, (-2,): 2, (3,): 2, (-3,): 2})
    est = pr.density_profile([full])
    assert np.all(est.means() == 1.0)

    # one-bin average (1/2 + 0)/2 = 0.25, with mirrored occupancies
    half = pr.configuration_from_occupancy(small_1d, params_m2,
                                           {(2,): 1, (-2,): 1})
    est = pr.density_profile([half], bin_width=2.0)
    assert len(est.bins) == 1
    assert est.means()[0] == pytest.approx(0.25)

    with pytest.raises(ValueError):
        pr.density_profile([])


def test_density_profile_rejects_mixed_times(small_1d, params_m2):
    a = pr.empty_configuration(small_1d, params_m2)
    b = pr.empty_configuration(small_1d, params_m2)
    b.time = 3.0
    with pytest.raises(ValueError):
        pr.density_profile([a, b])


def test_height_function(small_2d):
    params = pr.ProcessParams(m=2, alpha=1.0)
    cfg = pr.empty_configuration(small_2d, params)
    assert pr.height_function(cfg, 0.0) == 0
    assert pr.height_function(cfg, 5.0) == 0
    cfg = pr.configuration_from_occupancy(small_2d, params,
                                          {(3, 0): 2, (0, 5): 1, (7, 0): 1})
    assert pr.height_function(cfg, 0.0) == 4
    assert pr.height_function(cfg, 4.0) == 2
    assert pr.height_function(cfg, 5.0) == 2
    assert pr.height_function(cfg, 11.0) == 0
    with pytest.raises(ValueError):
        pr.height_function(cfg, -1.0)


def test_map_time():
    assert pr.map_time(1.0, 100, 2, 1) == 400.0
    assert pr.map_time(0.0, 100, 2, 1) == 0.0
    assert pr.map_time(1.0, 100, 2, 1, time_scale=2.0) == 200.0
    with pytest.raises(ValueError):
        pr.map_time(1.0, 100, 2, 1, time_scale=0.0)


def test_mean_density_monotone_in_time(small_1d):
    # alpha=1, m=1: all-zero start is minimal, so densities rise in t
    params = pr.ProcessParams(m=1, alpha=1.0)
    n = 800
    means = []
    for t in (0.5, 1.5, 4.0):
        vals = [pr.run_replica(small_1d, params, t,
                               pr.replica_seed(31, k)).occupancy_at((2,))
                for k in range(n)]
        means.append(np.mean(vals))
    se = math.sqrt(0.25 / n)
    assert means[1] >= means[0] - 3 * se
    assert means[2] >= means[1] - 3 * se


def test_radial_symmetry_of_densities(small_2d):
    params = pr.ProcessParams(m=1, alpha=1.0)
    n = 1200
    orbit = [(4, 0), (-4, 0), (0, 4), (0, -4)]
    sums = np.zeros(len(orbit))
    for k in range(n):
        cfg = pr.run_replica(small_2d, params, 8.0, pr.replica_seed(61, k))
        for j, s in enumerate(orbit):
            sums[j] += cfg.occupancy_at(s)
    means = sums / n
    grand = means.mean()
    se = math.sqrt(grand * (1 - grand) / n) if 0 < grand < 1 else 1e-3
    assert np.all(np.abs(means - grand) < 4.5 * se), means


def test_free_walk_diffusion_constant():
    # per-edge rate 1/(2dm): per-coordinate displacement variance = t/(dm)
    d, m, t = 2, 2, 50.0
    half = 60
    side = 2 * half + 1
    cls = np.ones(side ** d, dtype=np.uint8)  # no boundary, huge box
    strides = np.array([side, 1], dtype=np.int64)
    start = (half + 0) * side + (half + 0)
    n = 20000
    with kernels.kernel_guard():
        _, finals, flags = kernels.dual_walk_batch(
            cls, strides, d, m, start, t, n, np.uint64(17), np.uint64(0), 0)
    assert flags.sum() == 0
    x0 = finals // side - half
    x1 = finals % side - half
    var_target = t / (d * m)
    for coord in (x0, x1):
        var = np.var(coord.astype(float))
        # relative sampling error of a variance estimate ~ sqrt(2/n)
        assert abs(var - var_target) <= 3.0 * var_target * math.sqrt(2.0 / n)


def test_replica_stats_worker_invariance(small_2d):
    params = pr.ProcessParams(m=1, alpha=1.0)
    a = pr.replica_stats(small_2d, params, 5.0, 303, 12, workers=1)
    b = pr.replica_stats(small_2d, params, 5.0, 303, 12, workers=2)
    assert np.array_equal(a["bin_counts"], b["bin_counts"])
    assert np.array_equal(a["frozen"], b["frozen"])


def test_rejection_envelope_dominates_exact_rates(small_2d):
    # the kernel's proposal rate n_tokens/m + alpha*n_boundary must bound the
    # from-scratch total rate at every visited configuration
    params = pr.ProcessParams(m=2, alpha=0.7)
    cfg = pr.empty_configuration(small_2d, params)
    rng = np.random.default_rng(12)
    for _ in range(150):
        events = pr._enumerate_rates(cfg, small_2d, params)
        total = sum(e[0] for e in events)
        envelope = (cfg.n_particles / params.m
                    + params.alpha * small_2d.n_boundary)
        assert total <= envelope + 1e-12
        pr.step(cfg, small_2d, params, rng)


def test_token_buffer_growth(small_2d):
    # force the in-kernel token array to grow past its initial capacity
    params = pr.ProcessParams(m=2, alpha=1.0)
    cfg = pr.run_replica(small_2d, params, 60.0, 9)
    assert cfg.n_particles > 64
    assert cfg.n_particles == cfg.occ[small_2d.interior_flat].sum()
