"""Multiuser transmit SOCP, proximal phase updates, and the alternating loop."""

import numpy as np
import pytest

from irsslp import constellation as cn
from irsslp import lift as lf
from irsslp import multiuser as mu
from irsslp import robust as rb
from irsslp import scenario as sc
from irsslp import single_user as su


def _instance(seed=0, n=8, m=4, k=2, constellation="qpsk", delta=0.02,
              gamma_db=10.0, symbols=None, direct=False):
    cfg = sc.ScenarioConfig(n=n, m=m, k=k, constellation=constellation,
                            delta=delta, gamma_db=gamma_db, seed=seed,
                            direct_links=direct)
    ch = sc.generate_channels(cfg)
    if symbols is None:
        symbols = list(range(k))
    return ch, rb.build_instance(ch, symbols)


def _profile(n, seed):
    rng = np.random.default_rng(seed)
    return lf.lift_phase_vector(rng.uniform(0, 2 * np.pi, n))[1]


def test_solve_transmit_single_user_closed_form():
    ch, inst = _instance(seed=0, n=8, m=2, k=1, constellation="bpsk")
    user = inst.users[0]
    for seed in range(4):
        theta = _profile(8, seed)
        ts = mu.solve_transmit(theta, inst)
        assert ts.status == "optimal"
        row = theta @ user.d_mats[0] @ user.h_bar
        expect = user.xi[0] / (np.linalg.norm(row)
                               - user.radius * 2.0 * np.sqrt(8))
        assert ts.power == pytest.approx(expect, rel=1e-6)
        # transmit direction is matched filtering on the active row
        cos = row @ ts.x_lifted / (np.linalg.norm(row) * ts.power)
        assert cos == pytest.approx(1.0, abs=1e-6)


def test_solve_transmit_power_scales_with_snr():
    theta = _profile(8, 3)
    _, inst1 = _instance(seed=3, gamma_db=10.0)
    _, inst2 = _instance(seed=3, gamma_db=10.0 + sc.linear_to_db(4.0))
    p1 = mu.solve_transmit(theta, inst1).power
    p2 = mu.solve_transmit(theta, inst2).power
    assert p2 == pytest.approx(2.0 * p1, rel=1e-6)


def test_solve_transmit_margins_and_activity():
    ch, inst = _instance(seed=4, n=16, k=3, symbols=[0, 3, 2])
    theta = _profile(16, 4)
    ts = mu.solve_transmit(theta, inst)
    assert ts.status == "optimal"
    worst = min(np.min(m) for m in ts.margins)
    assert worst >= -rb.FEAS_TOL
    # at the optimum at least one margin is active
    assert worst == pytest.approx(0.0, abs=1e-7)


def test_solve_transmit_infeasible_under_huge_uncertainty():
    _, inst = _instance(seed=5, delta=10.0)
    ts = mu.solve_transmit(_profile(8, 5), inst)
    assert ts.status == "infeasible"
    assert ts.x_lifted is None and ts.power == np.inf


def test_pgd_trace_monotone_and_feasible():
    ch, inst = _instance(seed=6, n=8, m=4, k=2)
    theta = _profile(8, 6)
    ts = mu.solve_transmit(theta, inst)
    out, states = mu.pgd_phase_update(theta, ts.x_lifted, inst)
    assert len(states) >= 2
    objs = [s.objective for s in states]
    for prev, cur in zip(objs, objs[1:]):
        assert cur >= prev - 1e-8 * max(1.0, abs(prev))
    # every iterate stays inside the relaxed feasible set
    for s in states:
        v = s.iterate
        pair_mod = np.hypot(v[:8], v[8:])
        assert np.max(pair_mod) <= 1.0 + 1e-8
        worst = min(np.min(m) for m in rb.margins(v, ts.x_lifted, inst))
        assert worst >= -1e-6
    assert np.array_equal(out, states[-1].iterate)


def test_pgd_objective_value_at_unit_start():
    # g vanishes at exact unit modulus, so the first recorded objective is
    # the margin sum in noise units
    ch, inst = _instance(seed=7, n=6, m=2, k=2)
    theta = _profile(6, 7)
    ts = mu.solve_transmit(theta, inst)
    _, states = mu.pgd_phase_update(theta, ts.x_lifted, inst, max_inner=1)
    per_user = rb.margins(theta, ts.x_lifted, inst)
    f = sum(np.sum(m + u.xi) for m, u in zip(per_user, inst.users))
    assert states[0].objective == pytest.approx(f / inst.sigma, rel=1e-12)


def test_pgd_zero_penalty_is_proximal_point():
    ch, inst = _instance(seed=8, n=8, m=4, k=2)
    theta = _profile(8, 8)
    ts = mu.solve_transmit(theta, inst)
    _, states = mu.pgd_phase_update(theta, ts.x_lifted, inst, lam=0.0,
                                    eps=1e-10, max_inner=8)
    steps = [np.linalg.norm(b.iterate - a.iterate)
             for a, b in zip(states, states[1:])]
    # proximal-point displacements shrink monotonically on a concave objective
    for prev, cur in zip(steps, steps[1:]):
        assert cur <= prev + 1e-9
    objs = [s.objective for s in states]
    assert all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))


def test_pgd_rejects_bad_step_parameter():
    ch, inst = _instance(seed=9)
    theta = _profile(8, 9)
    ts = mu.solve_transmit(theta, inst)
    with pytest.raises(ValueError):
        mu.pgd_phase_update(theta, ts.x_lifted, inst, lam=2.0, beta=2.0)


def test_phase_levels_and_rounding():
    assert np.allclose(mu.phase_levels(1), [np.pi / 2, 3 * np.pi / 2])
    assert np.allclose(mu.phase_levels(2),
                       [np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4])
    with pytest.raises(ValueError):
        mu.phase_levels(0)
    with pytest.raises(ValueError):
        mu.phase_levels(1.5)
    theta = lf.lift_phase_vector([0.1, 2.0])[1]
    snapped = mu.round_to_levels(theta, 2)
    expect = lf.lift_phase_vector([np.pi / 4, 3 * np.pi / 4])[1]
    assert np.allclose(snapped, expect, atol=1e-12)


def test_hull_supports_quantized_points():
    # every quantized phase satisfies all polygon inequalities, exactly two
    # of them with equality (its two incident edges)
    for bits in (1, 2, 3):
        half = np.pi / 2 ** bits
        levels = mu.phase_levels(bits)
        normals = levels + half
        for phi in levels:
            lhs = np.cos(phi - normals)
            assert np.all(lhs <= np.cos(half) + 1e-12)
            assert np.sum(np.abs(lhs - np.cos(half)) < 1e-9) == 2


def test_ao_matches_single_user_path():
    for seed in (10, 11):
        ch, inst = _instance(seed=seed, n=16, m=4, k=1, constellation="bpsk",
                             symbols=[0])
        theta0 = _profile(16, seed)
        ref = su.ao_solve(inst, theta0=theta0)
        sol = mu.ao_multiuser(inst, theta0=theta0, rng=np.random.default_rng(seed))
        assert sol.status == "optimal"
        assert abs(sol.power_dbm - ref.power_dbm) <= 0.1


def test_ao_outer_monotone_and_feasible():
    for seed in (12, 13):
        ch, inst = _instance(seed=seed, n=8, m=4, k=3, symbols=[0, 1, 2])
        sol = mu.ao_multiuser(inst, rng=np.random.default_rng(seed))
        assert sol.status == "optimal"
        powers = np.asarray(sol.outer_powers)
        drops = np.diff(powers)
        assert np.all(drops <= 1e-8 * powers[:-1])
        for trace in sol.inner_objectives:
            for prev, cur in zip(trace, trace[1:]):
                assert cur >= prev - 1e-8 * max(1.0, abs(prev))
        assert rb.check_feasible(sol.theta_tilde, sol.x_lifted, inst).passed
        # reported profile has exact unit modulus
        mods = np.hypot(sol.theta_tilde[:8], sol.theta_tilde[8:])
        assert np.allclose(mods, 1.0, atol=1e-12)
        assert sol.modulus_deviation <= 0.05


def test_ao_sampled_structured_errors_stay_feasible():
    ch, inst = _instance(seed=14, n=8, m=4, k=2)
    sol = mu.ao_multiuser(inst, rng=np.random.default_rng(14))
    check = rb.sampled_check(sol.theta_tilde, sol.x_lifted, inst,
                             n_samples=10_000, rng=np.random.default_rng(140))
    assert check.min_margin >= -1e-6
    assert check.conservative


def test_ao_infeasible_exhausts_redraws():
    _, inst = _instance(seed=15, delta=10.0)
    sol = mu.ao_multiuser(inst, rng=np.random.default_rng(15), max_redraws=4)
    assert sol.status == "infeasible"
    assert sol.redraws == 4
    assert np.isinf(sol.power)


def test_ao_warm_start_converges_quickly():
    ch, inst = _instance(seed=16, n=8, m=4, k=2)
    first = mu.ao_multiuser(inst, rng=np.random.default_rng(16))
    warm = mu.ao_multiuser(inst, theta0=first.theta_tilde,
                           rng=np.random.default_rng(16))
    assert warm.iterations <= 2
    assert warm.power <= first.power * (1 + 1e-6)


def test_ao_deterministic():
    _, inst = _instance(seed=17, n=8, m=4, k=2)
    a = mu.ao_multiuser(inst, rng=np.random.default_rng(7))
    b = mu.ao_multiuser(inst, rng=np.random.default_rng(7))
    assert a.power == b.power
    assert np.array_equal(a.theta_tilde, b.theta_tilde)


def test_discrete_validation_and_infinite_path():
    _, inst = _instance(seed=18, n=8, m=4, k=2)
    with pytest.raises(ValueError):
        mu.ao_multiuser_discrete(inst, 0)
    with pytest.raises(ValueError):
        mu.ao_multiuser_discrete(inst, 2.5)
    cont = mu.ao_multiuser(inst, rng=np.random.default_rng(18))
    inf_path = mu.ao_multiuser_discrete(inst, np.inf,
                                        rng=np.random.default_rng(18))
    assert inf_path.power == cont.power


def test_discrete_rounds_onto_grid_and_orders():
    ch, inst = _instance(seed=19, n=16, m=4, k=2)
    cont = mu.ao_multiuser(inst, rng=np.random.default_rng(19))
    powers = {}
    for bits in (1, 3):
        sol = mu.ao_multiuser_discrete(inst, bits, theta0=cont.theta_tilde,
                                       rng=np.random.default_rng(19))
        assert sol.status == "optimal"
        assert sol.bits == bits
        levels = mu.phase_levels(bits)
        ph = np.mod(sol.phases, 2 * np.pi)
        dist = np.min(np.abs(ph[:, None] - levels[None, :]), axis=1)
        assert np.max(dist) <= 1e-9
        assert rb.check_feasible(sol.theta_tilde, sol.x_lifted, inst).passed
        powers[bits] = sol.power
    # one-bit phases cost far more power than three-bit phases; the
    # continuous/discrete ordering holds only on Monte Carlo average
    assert powers[1] >= powers[3]


def test_direct_links_integration():
    ch, inst = _instance(seed=20, n=8, m=4, k=2, direct=True)
    sol = mu.ao_multiuser(inst, rng=np.random.default_rng(20))
    assert sol.status == "optimal"
    assert rb.check_feasible(sol.theta_tilde, sol.x_lifted, inst).passed
