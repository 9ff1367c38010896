"""Single-user solvers: closed forms, rank reduction, relaxation quality."""

import numpy as np
import pytest

from irsslp import constellation as cn
from irsslp import lift as lf
from irsslp import robust as rb
from irsslp import scenario as sc
from irsslp import single_user as su


def _instance(seed=0, n=8, m=2, delta=0.02, gamma_db=10.0, symbol=0):
    cfg = sc.ScenarioConfig(n=n, m=m, k=1, constellation="bpsk", delta=delta,
                            gamma_db=gamma_db, seed=seed)
    ch = sc.generate_channels(cfg)
    return ch, rb.build_instance(ch, [symbol])


def test_validation():
    cfg = sc.ScenarioConfig(n=4, m=2, k=2, constellation="bpsk")
    inst2 = rb.build_instance(sc.generate_channels(cfg), [0, 1])
    with pytest.raises(ValueError):
        su.profile_power(np.ones(8), inst2)
    cfg = sc.ScenarioConfig(n=4, m=2, k=1, constellation="qpsk")
    instq = rb.build_instance(sc.generate_channels(cfg), [0])
    with pytest.raises(ValueError):
        su.ao_solve(instq)
    cfg = sc.ScenarioConfig(n=4, m=2, k=1, constellation="bpsk",
                            direct_links=True)
    instd = rb.build_instance(sc.generate_channels(cfg), [0])
    with pytest.raises(ValueError):
        su.sdr_solve(instd)


def test_profile_power_complex_oracle():
    # P == xi / (2 ||theta^H Hhat||_2 - 2 r sqrt(N)), computed with complex
    # arithmetic on the estimate
    rng = np.random.default_rng(31)
    for seed in range(5):
        ch, inst = _instance(seed=seed, n=6, m=3, delta=0.03)
        user = inst.users[0]
        h_est = ch.cascaded_est[0]
        for _ in range(5):
            phases = rng.uniform(0, 2 * np.pi, 6)
            theta, theta_tilde = lf.lift_phase_vector(phases)
            eff = theta.conj() @ h_est
            denom = 2.0 * np.linalg.norm(eff) - 2.0 * user.radius * np.sqrt(6)
            expect = user.xi[0] / denom if denom > 0 else np.inf
            assert su.profile_power(theta_tilde, inst) == pytest.approx(
                expect, rel=1e-10
            )


def test_profile_power_zero_uncertainty_scalar_channel():
    # single element, single antenna, no uncertainty: P = xi / (2 |h|)
    ch, inst = _instance(seed=2, n=1, m=1, delta=0.0)
    h = complex(ch.cascaded_est[0][0, 0])
    for phi in (0.0, 1.0, 2.5):
        _, theta_tilde = lf.lift_phase_vector([phi])
        assert su.profile_power(theta_tilde, inst) == pytest.approx(
            inst.users[0].xi[0] / (2.0 * abs(h)), rel=1e-12
        )


def test_ao_monotone_and_consistent():
    ch, inst = _instance(seed=4, n=16, m=4)
    sol = su.ao_solve(inst, rng=np.random.default_rng(4))
    assert sol.status == "optimal" and sol.converged
    finite = [p for p in sol.powers if np.isfinite(p)]
    diffs = np.diff(finite)
    assert np.all(diffs <= 1e-9 * np.abs(finite[:-1]))
    # the final design meets its constraint with zero slack
    assert sol.margins[0][0] == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(sol.x_lifted) == pytest.approx(sol.power, rel=1e-12)
    assert sol.power_dbm == pytest.approx(
        sc.mw_to_dbm(sol.power**2), rel=1e-12
    )


def test_phase_update_aligns_received_signal():
    # one phase step makes theta^H Hhat x purely real (and maximal)
    rng = np.random.default_rng(5)
    ch, inst = _instance(seed=5, n=12, m=3)
    h_est = ch.cascaded_est[0]
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    phases = -np.angle(2.0 * (h_est @ x))
    theta, _ = lf.lift_phase_vector(phases)
    v = theta.conj() @ (h_est @ x)
    assert abs(v.imag) <= 1e-9 * abs(v.real)
    assert v.real == pytest.approx(np.sum(np.abs(h_est @ x)), rel=1e-12)


def test_ao_power_scales_linearly_with_gamma():
    # doubling the linear SNR target doubles ||x||^2 along the same trajectory
    theta0 = lf.lift_phase_vector(
        np.random.default_rng(6).uniform(0, 2 * np.pi, 10)
    )[1]
    _, inst1 = _instance(seed=6, n=10, m=3, gamma_db=10.0)
    _, inst2 = _instance(seed=6, n=10, m=3, gamma_db=10.0 + sc.linear_to_db(2.0))
    s1 = su.ao_solve(inst1, theta0=theta0)
    s2 = su.ao_solve(inst2, theta0=theta0)
    assert len(s1.powers) == len(s2.powers)
    ratios = np.array(s2.powers) / np.array(s1.powers)
    assert np.allclose(ratios, np.sqrt(2.0), rtol=1e-10)
    assert np.linalg.norm(s2.x_lifted) ** 2 == pytest.approx(
        2.0 * np.linalg.norm(s1.x_lifted) ** 2, rel=1e-10
    )


def _pair_traces(mat):
    n = mat.shape[0] // 2
    return np.array([mat[i, i] + mat[i + n, i + n] for i in range(n)])


def test_rank_reduce_merges_pairs():
    rng = np.random.default_rng(7)
    n = 5
    _, t1 = lf.lift_phase_vector(rng.uniform(0, 2 * np.pi, n))
    t2 = np.concatenate([-t1[n:], t1[:n]])  # quarter-turn partner
    mat = 0.5 * (np.outer(t1, t1) + np.outer(t2, t2))
    out = su.rank_reduce(mat)
    vals = np.linalg.eigvalsh(out)
    assert np.sum(vals > 1e-9) == 1
    assert vals[0] >= -1e-12
    # objective against a structured quadratic form is untouched
    ch, inst = _instance(seed=7, n=n, m=3)
    dh = inst.users[0].d_mats[0] @ inst.users[0].h_bar
    w = dh @ dh.T
    assert np.trace(w @ out) == pytest.approx(np.trace(w @ mat), rel=1e-12)
    assert np.allclose(_pair_traces(out), _pair_traces(mat), atol=1e-12)


def test_rank_reduce_leaves_generic_rank_one_alone():
    rng = np.random.default_rng(8)
    u = rng.standard_normal(8)
    mat = np.outer(u, u)
    assert np.allclose(su.rank_reduce(mat), mat, atol=1e-14)


def test_rank_reduce_random_paired_stacks():
    rng = np.random.default_rng(9)
    n = 4
    ch, inst = _instance(seed=9, n=n, m=2)
    dh = inst.users[0].d_mats[0] @ inst.users[0].h_bar
    w = dh @ dh.T
    for _ in range(10):
        mat = np.zeros((2 * n, 2 * n))
        for lam in rng.uniform(0.5, 2.0, 3):
            u = rng.standard_normal(2 * n)
            u /= np.linalg.norm(u)
            v = np.concatenate([-u[n:], u[:n]])
            mat += lam * (np.outer(u, u) + np.outer(v, v))
        out = su.rank_reduce(mat)
        before = np.sum(np.linalg.eigvalsh(mat) > 1e-9)
        after_vals = np.linalg.eigvalsh(out)
        assert np.sum(after_vals > 1e-9) < before
        assert after_vals[0] >= -1e-8 * after_vals[-1]
        assert np.trace(w @ out) == pytest.approx(np.trace(w @ mat), rel=1e-9)
        assert np.allclose(_pair_traces(out), _pair_traces(mat), atol=1e-10)


def test_sdr_solution_quality():
    ch, inst = _instance(seed=10, n=8, m=2)
    sol = su.sdr_solve(inst, rng=np.random.default_rng(10))
    assert sol.status == "optimal"
    assert sol.rank_after <= sol.rank_before
    # equal up to solver tolerance when the relaxation is tight
    assert sol.lower_bound <= sol.power + 1e-6
    assert rb.check_feasible(sol.theta_tilde, sol.x_lifted, inst).passed
    # the relaxed value dominates the realised channel gain
    user = inst.users[0]
    gain = np.linalg.norm(sol.theta_tilde @ user.d_mats[0] @ user.h_bar) ** 2
    assert sol.sdp_objective >= gain - 1e-9 * abs(sol.sdp_objective)
    # every element still has unit modulus
    for i in range(8):
        assert np.linalg.norm(lf.pair_selector(i, 8) @ sol.theta_tilde) == \
            pytest.approx(1.0, rel=1e-9)


def test_sdr_deterministic():
    _, inst = _instance(seed=11, n=6, m=2)
    a = su.sdr_solve(inst, rng=np.random.default_rng(3))
    b = su.sdr_solve(inst, rng=np.random.default_rng(3))
    assert np.array_equal(a.theta_tilde, b.theta_tilde)
    assert a.power == b.power


def test_sdr_and_ao_agree_with_grid_oracle():
    # two elements: exhaustive phase grid is a trustworthy global reference
    for seed in (12, 13):
        ch, inst = _instance(seed=seed, n=2, m=2, delta=0.02)
        user = inst.users[0]
        h_est = ch.cascaded_est[0]
        grid = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
        p1, p2 = np.meshgrid(grid, grid, indexing="ij")
        mult = np.stack([np.exp(1j * p1).ravel(), np.exp(1j * p2).ravel()], axis=1)
        norms = np.linalg.norm(mult @ h_est, axis=1)
        denom = 2.0 * norms - 2.0 * user.radius * np.sqrt(2)
        p_grid = np.min(user.xi[0] / denom[denom > 0])
        sdr = su.sdr_solve(inst, rng=np.random.default_rng(seed))
        ao = su.ao_solve(inst, rng=np.random.default_rng(seed))
        for sol in (sdr, ao):
            assert sol.status == "optimal"
            # within grid resolution of the global optimum, never below bound
            assert sol.power <= p_grid * 1.01
            assert sol.power >= sdr.lower_bound - 1e-6
        assert p_grid >= sdr.lower_bound - 1e-6


def test_sdr_infeasible_when_uncertainty_swallows_channel():
    _, inst = _instance(seed=14, n=4, m=2, delta=10.0)
    sol = su.sdr_solve(inst, rng=np.random.default_rng(14))
    assert sol.status == "infeasible"
    assert sol.power == np.inf and np.isinf(sol.lower_bound)
    ao = su.ao_solve(inst, rng=np.random.default_rng(14))
    assert ao.status == "infeasible"
