"""Worst-case robust margins for constructive-interference precoding.

For user k with lifted cascaded estimate ``Hbar_k``, lifted profile
``theta_tilde`` and lifted transmit vector ``x_tilde``, each halfspace row
``a_i`` of the intended point's region must survive every channel error in
the lifted Frobenius ball of radius ``r_k``.  The inner minimisation over the
(unstructured) ball is the norm product ``r_k ||x_tilde|| ||theta_tilde^T
D_i||``, giving the closed-form worst-case margin

    theta_tilde^T D_i Hbar_k x_tilde
        - r_k ||x_tilde|| ||theta_tilde^T D_i||  - xi_{k,i},

with ``xi = sigma * sqrt(gamma) * b``.  When a direct BS-user link with
estimate ``hd_k`` and lifted radius ``rd_k`` is present, the row gains
``a_i^T lift(hd_k^H) x_tilde`` and the uncertainty term grows by
``rd_k ||a_i|| ||x_tilde||``.  The unstructured ball contains the structured
(lifted-complex) errors, so the closed form can be conservative but never
optimistic; :func:`sampled_check` verifies exactly that on random structured
errors.

A design is declared feasible when every margin is at least ``-1e-6``.
"""

from dataclasses import dataclass

import numpy as np

from . import constellation as cn
from . import lift as lf
from . import scenario as sc

FEAS_TOL = 1e-6


@dataclass
class UserBlock:
    """Per-user data of a robust design instance."""

    h_bar: np.ndarray          # (2N, 2M) lifted cascaded estimate
    a_rows: np.ndarray         # (S, 2) halfspace rows of the intended point
    d_mats: tuple              # S matrices (2N, 2N), theta_tilde^T D == a^T Theta
    xi: np.ndarray             # (S,) scaled thresholds sigma sqrt(gamma) b
    radius: float              # lifted reflected-error radius
    point_index: int
    h_bar_direct: object = None   # (2, 2M) lifted direct estimate or None
    radius_direct: float = 0.0

    @property
    def n_rows(self):
        return self.a_rows.shape[0]


@dataclass
class RobustInstance:
    """Everything the precoding solvers need for one symbol slot."""

    users: tuple               # UserBlock per user
    n: int
    m: int
    constellation: cn.Constellation
    symbols: np.ndarray        # (K,) intended point indices
    sigma: float
    gamma: np.ndarray          # (K,) linear SNR targets

    @property
    def k(self):
        return len(self.users)


@dataclass
class FeasibilityReport:
    passed: bool
    worst_margin: float
    margins: list              # per-user arrays


@dataclass
class SampledCheck:
    min_margin: float          # worst sampled true margin over all rows
    closed_form_min: float     # worst closed-form margin over all rows
    conservative: bool         # closed form never exceeded a sampled margin


def build_instance(channels, symbols, gamma_db=None, constellation=None,
                   include_direct=None):
    """Assemble a :class:`RobustInstance` from channel estimates.

    Parameters
    ----------
    channels : scenario.ChannelSet
    symbols : array_like, shape (K,)
        Intended constellation point index per user.
    gamma_db : float or array_like, optional
        Override the configuration SNR target (scalar or per user).
    constellation : Constellation or str, optional
        Override the configuration constellation.
    include_direct : bool, optional
        Force direct links on/off; default follows the channel set.
    """
    cfg = channels.config
    if constellation is None:
        constellation = cfg.constellation
    if isinstance(constellation, str):
        constellation = cn.get_constellation(constellation)
    symbols = np.asarray(symbols, dtype=int)
    if symbols.size != cfg.k:
        raise ValueError("need one symbol index per user")
    gamma_db = cfg.gamma_db if gamma_db is None else gamma_db
    gamma = np.broadcast_to(sc.db_to_linear(gamma_db), (cfg.k,)).astype(float)
    if include_direct is None:
        include_direct = channels.h_direct_est is not None
    if include_direct and channels.h_direct_est is None:
        raise ValueError("channel set carries no direct links")

    sigma = cfg.sigma
    users = []
    for k in range(cfg.k):
        a, b = cn.cir_halfspaces(constellation, int(symbols[k]))
        users.append(
            UserBlock(
                h_bar=lf.lift(channels.cascaded_est[k]),
                a_rows=a,
                d_mats=tuple(lf.phase_coupling(row, cfg.n) for row in a),
                xi=sigma * np.sqrt(gamma[k]) * b,
                radius=float(channels.radii[k]),
                point_index=int(symbols[k]),
                h_bar_direct=(
                    lf.lift(channels.h_direct_est[k].conj()[None, :])
                    if include_direct else None
                ),
                radius_direct=(
                    float(channels.radii_direct[k]) if include_direct else 0.0
                ),
            )
        )
    return RobustInstance(
        users=tuple(users),
        n=cfg.n,
        m=cfg.m,
        constellation=constellation,
        symbols=symbols,
        sigma=sigma,
        gamma=gamma,
    )


def worst_case_margin(theta_tilde, x_lifted, user, row):
    """Closed-form robust margin of one halfspace row (scalar)."""
    coupling = theta_tilde @ user.d_mats[row]
    x_norm = np.linalg.norm(x_lifted)
    value = coupling @ user.h_bar @ x_lifted
    penalty = user.radius * x_norm * np.linalg.norm(coupling)
    if user.h_bar_direct is not None:
        value += user.a_rows[row] @ user.h_bar_direct @ x_lifted
        penalty += user.radius_direct * np.linalg.norm(user.a_rows[row]) * x_norm
    return float(value - penalty - user.xi[row])


def margins(theta_tilde, x_lifted, instance):
    """All closed-form robust margins, one array per user."""
    return [
        np.array([
            worst_case_margin(theta_tilde, x_lifted, user, i)
            for i in range(user.n_rows)
        ])
        for user in instance.users
    ]


def check_feasible(theta_tilde, x_lifted, instance, tol=FEAS_TOL):
    """Evaluate all margins and compare the worst one against ``-tol``."""
    per_user = margins(theta_tilde, x_lifted, instance)
    worst = float(min(np.min(m) for m in per_user))
    return FeasibilityReport(passed=worst >= -tol, worst_margin=worst,
                             margins=per_user)


def sampled_check(theta_tilde, x_lifted, instance, n_samples, rng,
                  mode="surface"):
    """Monte-Carlo verification of the closed-form worst case.

    Draws structured complex errors from each user's ball, evaluates the
    *actual* (penalty-free) margins at the perturbed channels, and reports
    the worst sampled margin together with whether the closed form stayed a
    lower bound throughout.
    """
    multipliers = lf.unlift_vector(theta_tilde)  # exp(+1j phi) per element
    x = lf.unlift_vector(x_lifted)
    min_margin = np.inf
    closed_min = np.inf
    conservative = True
    for user in instance.users:
        est = lf.unlift(user.h_bar)
        base = multipliers @ (est @ x)
        bound = np.sqrt(2.0) / 2.0 * user.radius
        z = (rng.standard_normal((n_samples, est.shape[0], est.shape[1]))
             + 1j * rng.standard_normal((n_samples, est.shape[0], est.shape[1])))
        nrm = np.linalg.norm(z, axis=(1, 2), keepdims=True)
        deltas = z / nrm * bound
        if mode == "interior":
            dim = 2 * est.shape[0] * est.shape[1]
            scale = rng.uniform(size=(n_samples, 1, 1)) ** (1.0 / dim)
            deltas = deltas * scale
        shift = np.einsum("n,snm,m->s", multipliers, deltas, x)
        y = base + shift
        if user.h_bar_direct is not None:
            hd = lf.unlift(user.h_bar_direct).conj().ravel()
            bound_d = np.sqrt(2.0) / 2.0 * user.radius_direct
            zd = (rng.standard_normal((n_samples, hd.size))
                  + 1j * rng.standard_normal((n_samples, hd.size)))
            zd = zd / np.linalg.norm(zd, axis=1, keepdims=True) * bound_d
            if mode == "interior":
                zd = zd * rng.uniform(size=(n_samples, 1)) ** (1.0 / (2 * hd.size))
            y = y + (hd + zd).conj() @ x
        y_tilde = np.stack([y.real, y.imag])
        for i in range(user.n_rows):
            sampled = user.a_rows[i] @ y_tilde - user.xi[i]
            closed = worst_case_margin(theta_tilde, x_lifted, user, i)
            closed_min = min(closed_min, closed)
            min_margin = min(min_margin, float(np.min(sampled)))
            if np.min(sampled) < closed - 1e-9:
                conservative = False
    return SampledCheck(
        min_margin=float(min_margin),
        closed_form_min=float(closed_min),
        conservative=conservative,
    )
