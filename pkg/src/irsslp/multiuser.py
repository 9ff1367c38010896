"""Multiuser alternating design: transmit SOCP and proximal phase updates.

For a fixed reflection profile the transmit step minimizes ``||x||_2`` subject
to the worst-case detection margins (a second-order cone program).  For a
fixed transmit vector the profile step ascends the penalized objective

    f(v) + lam * g(v),    g(v) = ||v||^2 - N,

where ``f`` sums the margin left-hand sides over all users and halfspace rows
(reported here in noise units, i.e. divided by sigma, so the default penalty
weight balances the two terms independently of path-loss scaling).  The ascent
runs proximal gradient steps over the relaxed feasible set: margins stay
nonnegative at the current transmit vector and every (cos, sin) pair stays in
the closed unit disk.  Finite-resolution mode additionally confines each pair
to the convex hull of the quantized phase set, a regular ``2**bits``-gon.

Because every accepted profile keeps the previous transmit vector feasible,
the outer power sequence is non-increasing.  The relaxed iterate may sit
slightly inside the unit circle, so the reported design is always extracted
at the end: pairs are projected to exact unit modulus (or rounded to the
nearest quantized phase) and the transmit program re-solved once.
"""

from dataclasses import dataclass

import numpy as np

from . import cone
from . import lift as lf
from . import robust as rb
from . import scenario as sc


@dataclass
class TransmitSolution:
    status: str                # "optimal" | "infeasible" | "numerical-failure"
    x_lifted: object           # (2M,) ndarray on success, None otherwise
    power: float               # ||x||_2 in sqrt(mW); inf when not solved
    margins: object            # per-user arrays, None when not solved


@dataclass
class PgdState:
    """One accepted proximal-gradient iterate."""

    iterate: np.ndarray
    lam: float
    beta: float
    objective: float           # f + lam * g at the iterate
    inner: int


@dataclass
class MultiuserSolution:
    status: str
    power: float
    power_dbm: float
    x_lifted: object
    theta_tilde: object
    phases: object
    margins: object
    outer_powers: list         # power after every transmit solve (relaxed)
    inner_objectives: list     # f + lam*g traces, one list per phase update
    iterations: int
    converged: bool
    redraws: int
    modulus_deviation: float   # max | ||pair|| - 1 | before extraction
    bits: object = None
    extraction_attempts: int = 0


def phase_levels(bits):
    """Quantized phase set for a ``bits``-bit element, offset off the axes.

    The levels are ``2 pi m / 2**bits + pi / 2**bits``; one bit gives the two
    points ``+-pi/2`` (multipliers ``+-1j``).
    """
    if bits != int(bits) or bits < 1:
        raise ValueError("bits must be a positive integer")
    count = 2 ** int(bits)
    return (2.0 * np.pi * np.arange(count) + np.pi) / count


def round_to_levels(theta_tilde, bits):
    """Snap every pair of a lifted profile to the nearest quantized phase."""
    theta = np.asarray(theta_tilde, dtype=float).ravel()
    n = theta.size // 2
    phases = np.arctan2(theta[n:], theta[:n])
    step = 2.0 * np.pi / 2 ** int(bits)
    base = 0.5 * step
    snapped = base + np.round((phases - base) / step) * step
    return lf.lift_phase_vector(snapped)[1]


def solve_transmit(theta_tilde, instance, tol=1e-9):
    """Minimum-power transmit vector for a fixed reflection profile.

    Solves ``min ||x||`` subject to every worst-case margin being
    nonnegative, as a second-order cone program in the epigraph variable
    ``t >= ||x||``.  Margin rows are normalized by their channel gain purely
    for conditioning.
    """
    theta = np.asarray(theta_tilde, dtype=float).ravel()
    nv = 1 + 2 * instance.m
    rows, offs = [], []
    for user in instance.users:
        for i in range(user.n_rows):
            coupling = theta @ user.d_mats[i]
            c = coupling @ user.h_bar
            kappa = user.radius * np.linalg.norm(coupling)
            if user.h_bar_direct is not None:
                c = c + user.a_rows[i] @ user.h_bar_direct
                kappa += user.radius_direct * np.linalg.norm(user.a_rows[i])
            scale = max(np.linalg.norm(c), 1e-300)
            row = np.empty(nv)
            row[0] = -kappa / scale
            row[1:] = c / scale
            rows.append(row)
            offs.append(-float(user.xi[i]) / scale)
    blocks = (
        cone.Block("nonneg", np.vstack(rows), np.array(offs)),
        cone.Block("soc", np.eye(nv), np.zeros(nv)),
    )
    q = np.zeros(nv)
    q[0] = 1.0
    rep = cone.solve(cone.ConeProgram(q, blocks), tol=tol)
    if rep.status != "optimal":
        return TransmitSolution(rep.status, None, np.inf, None)
    x = rep.x[1:]
    return TransmitSolution("optimal", x, float(np.linalg.norm(x)),
                            rb.margins(theta, x, instance))


def _margin_rows(instance, x_lifted):
    """Fixed-transmit pieces of every margin row.

    Returns tuples ``(lin, rho, d_t, xi_hat)`` so that the robust margin of a
    profile ``v`` is ``lin @ v - rho * ||d_t @ v|| - xi_hat``.
    """
    x = np.asarray(x_lifted, dtype=float).ravel()
    x_norm = np.linalg.norm(x)
    rows = []
    for user in instance.users:
        hx = user.h_bar @ x
        for i in range(user.n_rows):
            lin = user.d_mats[i] @ hx
            const = 0.0
            if user.h_bar_direct is not None:
                const = float(
                    user.a_rows[i] @ (user.h_bar_direct @ x)
                    - user.radius_direct * np.linalg.norm(user.a_rows[i]) * x_norm
                )
            rows.append((lin, user.radius * x_norm, user.d_mats[i].T,
                         float(user.xi[i]) - const))
    return rows


def penalized_objective(theta_tilde, x_lifted, instance, lam):
    """Value of f + lam*g at a profile, with f in noise units."""
    per_user = rb.margins(theta_tilde, x_lifted, instance)
    f = sum(float(np.sum(m + user.xi))
            for m, user in zip(per_user, instance.users))
    theta = np.asarray(theta_tilde, dtype=float).ravel()
    g = float(theta @ theta) - instance.n
    return f / instance.sigma + lam * g


def _prox_blocks(rows, sigma, n, bits):
    """Constraint blocks of the proximal subproblem (shared across steps).

    Variables are ``[v (2N); u (one slack per margin row)]`` with
    ``u_r >= ||d_t_r @ v||`` so the concave norm terms can appear in both the
    objective and the margin constraints through the same slack.
    """
    two_n = 2 * n
    nv = two_n + len(rows)
    margin = np.zeros((len(rows), nv))
    offs = np.empty(len(rows))
    soc_blocks = []
    for r, (lin, rho, d_t, xi_hat) in enumerate(rows):
        margin[r, :two_n] = lin / sigma
        margin[r, two_n + r] = -rho / sigma
        offs[r] = -xi_hat / sigma
        m = np.zeros((two_n + 1, nv))
        m[0, two_n + r] = 1.0
        m[1:, :two_n] = d_t
        soc_blocks.append(cone.Block("soc", m, np.zeros(two_n + 1)))
    blocks = [cone.Block("nonneg", margin, offs)]
    for i in range(n):
        disk = np.zeros((3, nv))
        disk[1, i] = 1.0
        disk[2, i + n] = 1.0
        blocks.append(cone.Block("soc", disk, np.array([1.0, 0.0, 0.0])))
    if bits is not None:
        # supporting halfplanes of the regular 2**bits-gon, one per edge
        half = np.pi / 2 ** int(bits)
        normals = phase_levels(bits) + half
        support = np.cos(half)
        hull = np.zeros((n * normals.size, nv))
        for i in range(n):
            base = i * normals.size
            hull[base:base + normals.size, i] = -np.cos(normals)
            hull[base:base + normals.size, i + n] = -np.sin(normals)
        blocks.append(cone.Block(
            "nonneg", hull, np.full(n * normals.size, support)))
    blocks.extend(soc_blocks)
    return nv, tuple(blocks)


def pgd_phase_update(theta_start, x_lifted, instance, lam=1.0, beta=2.0,
                     eps=1e-4, max_inner=50, bits=None, tol=1e-9):
    """Proximal-gradient ascent of f + lam*g at a fixed transmit vector.

    Each step moves to ``y = (1 + 2 lam / beta) v`` along the penalty
    gradient, then solves the proximal subproblem

        max (1/beta) f(v) - 0.5 ||v - y||^2

    over the relaxed feasible set.  The start profile is always feasible for
    the subproblem, so the objective sequence is non-decreasing; iteration
    stops when the relative gain drops below ``eps``.

    Returns the final iterate and the list of :class:`PgdState` snapshots
    (including the start).
    """
    if beta <= lam:
        raise ValueError("step parameter beta must exceed penalty weight lam")
    theta = np.asarray(theta_start, dtype=float).ravel().copy()
    n = instance.n
    two_n = 2 * n
    rows = _margin_rows(instance, x_lifted)
    nv, blocks = _prox_blocks(rows, instance.sigma, n, bits)
    quad = np.zeros((nv, nv))
    idx = np.arange(two_n)
    quad[idx, idx] = 1.0

    lin_sum = sum(lin for lin, _, _, _ in rows) / (beta * instance.sigma)
    q = np.zeros(nv)
    for r, (_, rho, _, _) in enumerate(rows):
        q[two_n + r] = rho / (beta * instance.sigma)

    f_cur = penalized_objective(theta, x_lifted, instance, lam)
    states = [PgdState(theta.copy(), lam, beta, f_cur, 0)]
    for ell in range(1, max_inner + 1):
        y = (1.0 + 2.0 * lam / beta) * theta
        q_it = q.copy()
        q_it[:two_n] = -y - lin_sum
        rep = cone.solve(cone.ConeProgram(q_it, blocks, quad), tol=tol)
        if rep.status != "optimal":
            break
        theta_new = rep.x[:two_n]
        f_new = penalized_objective(theta_new, x_lifted, instance, lam)
        states.append(PgdState(theta_new.copy(), lam, beta, f_new, ell))
        gain = f_new - f_cur
        theta, f_cur = theta_new, f_new
        if gain < eps * max(abs(f_new), 1e-30):
            break
    return theta, states


def _draw_profile(n, rng, bits):
    if bits is None:
        phases = rng.uniform(0.0, 2.0 * np.pi, n)
    else:
        phases = rng.choice(phase_levels(bits), size=n)
    return lf.lift_phase_vector(phases)[1]


def _infeasible(outer_powers, inner_objectives, redraws, deviation, bits,
                attempts):
    return MultiuserSolution(
        status="infeasible", power=np.inf, power_dbm=np.inf, x_lifted=None,
        theta_tilde=None, phases=None, margins=None,
        outer_powers=outer_powers, inner_objectives=inner_objectives,
        iterations=max(len(outer_powers) - 1, 0), converged=False,
        redraws=redraws, modulus_deviation=deviation, bits=bits,
        extraction_attempts=attempts)


def _ao_loop(instance, theta0, rng, lam, beta, eps_inner, eps_outer,
             max_outer, max_inner, max_redraws, bits, extraction_retries=6):
    rng = np.random.default_rng(rng)
    n = instance.n
    if theta0 is not None:
        theta = np.asarray(theta0, dtype=float).ravel().copy()
    else:
        theta = _draw_profile(n, rng, bits)
    ts = solve_transmit(theta, instance)
    redraws = 0
    while ts.status != "optimal" and redraws < max_redraws:
        redraws += 1
        theta = _draw_profile(n, rng, bits)
        ts = solve_transmit(theta, instance)
    if ts.status != "optimal":
        return _infeasible([], [], redraws, np.nan, bits, 0)

    outer_powers = [ts.power]
    inner_objectives = []
    converged = False
    for _ in range(max_outer):
        if ts.power <= 0.0:
            converged = True
            break
        step, states = pgd_phase_update(theta, ts.x_lifted, instance, lam,
                                        beta, eps_inner, max_inner, bits)
        inner_objectives.append([s.objective for s in states])
        cand = solve_transmit(step, instance)
        if cand.status != "optimal":
            break
        prev = ts.power
        theta, ts = step, cand
        outer_powers.append(ts.power)
        if (prev - ts.power) / prev < eps_outer:
            converged = True
            break

    pair_mod = np.hypot(theta[:n], theta[n:])
    deviation = float(np.max(np.abs(pair_mod - 1.0)))

    # extract an exactly constant-modulus (optionally quantized) design; on
    # the rare infeasible extraction, advance the relaxed iterate and retry
    final_theta, final = None, None
    attempts = 0
    for attempt in range(extraction_retries + 1):
        attempts = attempt + 1
        cand_theta = (lf.project_unit_modulus(theta) if bits is None
                      else round_to_levels(theta, bits))
        cand = solve_transmit(cand_theta, instance)
        if cand.status == "optimal":
            final_theta, final = cand_theta, cand
            break
        if attempt == extraction_retries or ts.power <= 0.0:
            break
        step, states = pgd_phase_update(theta, ts.x_lifted, instance, lam,
                                        beta, eps_inner, max_inner, bits)
        inner_objectives.append([s.objective for s in states])
        follow = solve_transmit(step, instance)
        if follow.status == "optimal":
            theta, ts = step, follow
            outer_powers.append(ts.power)
    if final is None:
        return _infeasible(outer_powers, inner_objectives, redraws, deviation,
                           bits, attempts)
    power_dbm = sc.mw_to_dbm(final.power ** 2) if final.power > 0 else -np.inf
    return MultiuserSolution(
        status="optimal", power=final.power, power_dbm=power_dbm,
        x_lifted=final.x_lifted, theta_tilde=final_theta,
        phases=lf.phases_from_lifted(final_theta), margins=final.margins,
        outer_powers=outer_powers, inner_objectives=inner_objectives,
        iterations=len(outer_powers) - 1, converged=converged,
        redraws=redraws, modulus_deviation=deviation, bits=bits,
        extraction_attempts=attempts)


def ao_multiuser(instance, theta0=None, rng=None, lam=1.0, beta=2.0,
                 eps_inner=1e-4, eps_outer=1e-4, max_outer=100, max_inner=50,
                 max_redraws=30):
    """Alternating transmit/profile design with continuous phases.

    Alternates :func:`solve_transmit` and :func:`pgd_phase_update` until the
    relative outer power improvement drops below ``eps_outer``, then projects
    the profile to exact unit modulus and re-solves the transmit program once
    for the reported design.  Infeasible starting profiles are redrawn up to
    ``max_redraws`` times.
    """
    return _ao_loop(instance, theta0, rng, lam, beta, eps_inner, eps_outer,
                    max_outer, max_inner, max_redraws, bits=None)


def ao_multiuser_discrete(instance, bits, theta0=None, rng=None, lam=1.0,
                          beta=2.0, eps_inner=1e-4, eps_outer=1e-4,
                          max_outer=100, max_inner=50, max_redraws=30):
    """Finite-resolution variant: phases restricted to ``2**bits`` levels.

    Runs the continuous design first, scales its profile onto the inscribed
    circle of the quantized-phase hull (phases kept, every pair strictly
    hull-feasible), and continues the alternating loop with each pair
    confined to that hull; at the end every element is rounded to the
    nearest level and the transmit program re-solved.  The scaled start
    matters twice over: hull corners are stationary for the penalty, so a
    random level assignment would simply be kept, while the inscribed-circle
    start lets the loop pick the corner assignment jointly.  ``theta0``
    seeds the continuous stage; pass the profile of an already-solved
    continuous design to skip most of its iterations.  ``bits=None`` (or
    infinity) falls back to the continuous path.
    """
    if bits is None or (isinstance(bits, float) and np.isinf(bits)):
        return ao_multiuser(instance, theta0, rng, lam, beta, eps_inner,
                            eps_outer, max_outer, max_inner, max_redraws)
    if bits != int(bits) or bits < 1:
        raise ValueError("bits must be a positive integer (or None)")
    rng = np.random.default_rng(rng)
    base = ao_multiuser(instance, theta0, rng, lam, beta, eps_inner,
                        eps_outer, max_outer, max_inner, max_redraws)
    if base.status != "optimal":
        base.bits = int(bits)
        return base
    start = np.cos(np.pi / 2 ** int(bits)) * base.theta_tilde
    return _ao_loop(instance, start, rng, lam, beta, eps_inner, eps_outer,
                    max_outer, max_inner, max_redraws, bits=int(bits))
