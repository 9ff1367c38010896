"""Single-user binary-signalling designs.

Both solvers exploit the same closed forms.  For one user with a single
halfspace row (binary signalling), the cheapest transmit vector for a fixed
unit-modulus profile is matched filtering along ``theta_tilde^T D Hbar``,
with power

    P(theta_tilde) = xi / (||theta_tilde^T D Hbar||_2 - r ||a|| sqrt(N)),

infeasible whenever the denominator is nonpositive.  Maximising the channel
norm over profiles is a quadratic program over the unit-modulus set; two
routes are implemented:

* :func:`sdr_solve` - semidefinite relaxation of the outer product
  ``theta_tilde theta_tilde^T`` under per-element pair-trace constraints,
  followed by :func:`rank_reduce` (merging eigenvector pairs ``u`` and
  ``Ju``, ``J`` the quarter-turn block map, which leaves the objective and
  all pair traces untouched) and, if needed, Gaussian randomisation.  The
  relaxation also yields a certified lower bound on the achievable power.
* :func:`ao_solve` - alternate between the closed-form transmit step and the
  phase step ``phi = -angle(c * (Hhat x))``, which maximises the effective
  channel for a fixed transmit direction.  Power is non-increasing across
  iterations; the loop stops on a relative decrease below ``eps``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import cone
from . import lift as lf
from . import robust as rb


@dataclass
class SingleUserSolution:
    status: str                     # "optimal" | "infeasible" | "numerical-failure"
    power: float                    # ||x_tilde||, sqrt(mW); inf if infeasible
    power_dbm: float
    x_lifted: object
    theta_tilde: object
    phases: object
    margins: list
    powers: list = field(default_factory=list)   # per-iteration trace (AO)
    iterations: int = 0
    converged: bool = False
    lower_bound: float = None       # SDR: certified power lower bound
    sdp_objective: float = None     # SDR: relaxed channel-gain optimum
    rank_before: int = None
    rank_after: int = None
    used_randomization: bool = None
    sdp_matrix: object = None       # SDR: relaxed covariance before reduction


def _check_single(instance):
    if instance.k != 1:
        raise ValueError("single-user solvers need exactly one user")
    user = instance.users[0]
    if user.n_rows != 1:
        raise ValueError("single-user closed forms assume one halfspace row")
    if user.h_bar_direct is not None:
        raise ValueError("single-user closed forms assume reflected link only")
    return user


def profile_power(theta_tilde, instance):
    """Closed-form minimal power for a fixed profile (inf if infeasible)."""
    user = _check_single(instance)
    coupling = theta_tilde @ user.d_mats[0]
    denom = np.linalg.norm(coupling @ user.h_bar) - user.radius * np.linalg.norm(coupling)
    if denom <= 0.0:
        return np.inf
    return float(user.xi[0] / denom)


def _power_dbm(power):
    return float(2.0 * 10.0 * np.log10(power)) if np.isfinite(power) else np.inf


def _finish(instance, theta_tilde, **extra):
    user = instance.users[0]
    power = profile_power(theta_tilde, instance)
    if not np.isfinite(power):
        return SingleUserSolution(
            status="infeasible", power=np.inf, power_dbm=np.inf, x_lifted=None,
            theta_tilde=theta_tilde, phases=lf.phases_from_lifted(theta_tilde),
            margins=[], **extra,
        )
    row = theta_tilde @ user.d_mats[0] @ user.h_bar
    x_lifted = power * row / np.linalg.norm(row)
    return SingleUserSolution(
        status="optimal", power=power, power_dbm=_power_dbm(power),
        x_lifted=x_lifted, theta_tilde=theta_tilde,
        phases=lf.phases_from_lifted(theta_tilde),
        margins=rb.margins(theta_tilde, x_lifted, instance), **extra,
    )


def ao_solve(instance, theta0=None, rng=None, eps=1e-4, max_iter=100):
    """Alternating closed-form transmit and phase updates."""
    user = _check_single(instance)
    n = instance.n
    if theta0 is None:
        rng = np.random.default_rng(0) if rng is None else rng
        _, theta_tilde = lf.lift_phase_vector(rng.uniform(0.0, 2.0 * np.pi, n))
    else:
        theta_tilde = np.asarray(theta0, dtype=float).copy()

    a = user.a_rows[0]
    c_scalar = a[0] - 1j * a[1]
    h_est = lf.unlift(user.h_bar)
    dh = user.d_mats[0] @ user.h_bar

    powers = []
    converged = False
    p_prev = np.inf
    for _ in range(max_iter):
        p = profile_power(theta_tilde, instance)
        powers.append(p)
        if np.isfinite(p_prev) and np.isfinite(p) and (p_prev - p) / p_prev < eps:
            converged = True
            break
        row = theta_tilde @ dh
        x_dir = lf.unlift_vector(row / np.linalg.norm(row))
        phases = -np.angle(c_scalar * (h_est @ x_dir))
        _, theta_tilde = lf.lift_phase_vector(phases)
        p_prev = p
    return _finish(
        instance, theta_tilde,
        powers=powers, iterations=len(powers), converged=converged,
    )


def _quarter_turn(v):
    n = v.size // 2
    return np.concatenate([-v[n:], v[:n]])


def rank_reduce(mat, tol=1e-6):
    """Merge paired eigenvectors ``(u, Ju)`` to shrink the rank of a PSD matrix.

    For matrices with the lifted block symmetry the quarter-turn ``J`` of any
    eigenvector is again an eigenvector with the same pair traces and the
    same objective contribution, so moving its mass onto the partner changes
    neither; the rank drops by one per merge.  Matrices without such pairs
    are returned unchanged.
    """
    m = 0.5 * (mat + mat.T)
    for _ in range(m.shape[0]):
        vals, vecs = np.linalg.eigh(m)
        lmax = vals[-1]
        if lmax <= 0.0:
            break
        merged = False
        for i in range(vals.size - 1, -1, -1):
            if vals[i] <= 1e-9 * lmax:
                continue
            u = vecs[:, i]
            v = _quarter_turn(u)
            q = float(v @ m @ v)
            if q <= 1e-9 * lmax:
                continue
            if np.linalg.norm(m @ v - q * v) <= tol * lmax:
                m = m + q * (np.outer(u, u) - np.outer(v, v))
                m = 0.5 * (m + m.T)
                merged = True
                break
        if not merged:
            break
    return m


def _effective_rank(mat, tol=1e-6):
    vals = np.linalg.eigvalsh(mat)
    return int(np.sum(vals > tol * max(vals[-1], 0.0))) if vals[-1] > 0 else 0


def _pair_project(cands, n):
    """Normalise each (cos, sin) pair of candidate profiles to unit modulus."""
    c, s = cands[:n], cands[n:]
    norm = np.hypot(c, s)
    norm[norm == 0.0] = 1.0
    return np.vstack([c / norm, s / norm])


def sdr_solve(instance, rng=None, n_random=1000, rank_tol=1e-6):
    """Semidefinite-relaxation design with rank reduction and randomisation."""
    user = _check_single(instance)
    n = instance.n
    rng = np.random.default_rng(0) if rng is None else rng

    dh = user.d_mats[0] @ user.h_bar
    w = dh @ dh.T
    scale = np.max(np.abs(w))
    side = 2 * n
    dim = side * (side + 1) // 2
    diag_idx = np.array([j * (j + 1) // 2 + j for j in range(side)])
    eq = np.zeros((n, dim))
    for j in range(n):
        eq[j, diag_idx[j]] = 1.0
        eq[j, diag_idx[j + n]] = 1.0
    program = cone.ConeProgram(
        objective=-cone.svec(w / scale),
        blocks=(
            cone.Block("zero", eq, -np.ones(n)),
            cone.Block("psd", np.eye(dim), np.zeros(dim), side=side),
        ),
    )
    report = cone.solve(program)
    if report.status != "optimal":
        return SingleUserSolution(
            status="numerical-failure", power=np.inf, power_dbm=np.inf,
            x_lifted=None, theta_tilde=None, phases=None, margins=[],
        )
    sdp_objective = float(-report.objective * scale)  # max tr(W Theta)

    cov = cone.smat(report.x, side)
    rank_before = _effective_rank(cov, rank_tol)
    reduced = rank_reduce(cov, rank_tol)
    rank_after = _effective_rank(reduced, rank_tol)

    vals, vecs = np.linalg.eigh(reduced)
    top = vecs[:, -1] * np.sqrt(max(vals[-1], 0.0))
    used_randomization = rank_after > 1
    if used_randomization:
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        draws = root @ rng.standard_normal((side, n_random))
        cands = np.concatenate([top[:, None], draws], axis=1)
    else:
        cands = top[:, None]
    profiles = _pair_project(cands, n)
    scores = np.linalg.norm(profiles.T @ dh, axis=1)
    theta_tilde = profiles[:, int(np.argmax(scores))]

    # the relaxed optimum caps every feasible channel norm, so it certifies a
    # lower bound on the power (and certifies infeasibility when negative)
    cap = np.sqrt(max(sdp_objective, 0.0)) - user.radius * np.linalg.norm(user.a_rows[0]) * np.sqrt(n)
    lower_bound = float(user.xi[0] / cap) if cap > 0.0 else np.inf

    extra = dict(
        lower_bound=lower_bound, sdp_objective=sdp_objective,
        rank_before=rank_before, rank_after=rank_after,
        used_randomization=used_randomization, sdp_matrix=cov,
    )
    if cap <= 0.0:
        return SingleUserSolution(
            status="infeasible", power=np.inf, power_dbm=np.inf, x_lifted=None,
            theta_tilde=theta_tilde, phases=lf.phases_from_lifted(theta_tilde),
            margins=[], **extra,
        )
    return _finish(instance, theta_tilde, **extra)
