"""Simulation geometry, fading statistics and channel-error sampling.

The layout follows the usual two-hop setup: a base station with M antennas at
the origin, a reflecting surface with N elements at distance ``d_bi`` on the
x axis, and K single-antenna users on a circle of radius ``d_iu`` around the
surface.  Distance-dependent attenuation is ``C0 * (d / d0) ** -alpha`` with
``C0`` given in dB at the reference distance ``d0``.

The BS-surface link is Rician with a rank-one line-of-sight component built
from half-wavelength uniform-linear-array steering vectors (both arrays lie
along the x axis); surface-user and BS-user links are Rayleigh.  Amplitudes
carry units of sqrt(mW), so ``||x||**2`` is a transmit power in mW and the
noise level ``sigma**2`` in mW comes straight from ``noise_dbm``.

Channel errors live on Frobenius balls.  A *lifted* radius ``delta``
corresponds to a complex ball of radius ``sqrt(2)/2 * delta`` (the lift
doubles squared norms), and the dimensionless ``delta`` level in
:class:`ScenarioConfig` is relative: the lifted radius of user k is
``delta * ||lift(H_k)||_F``, i.e. the complex error norm is ``delta`` times
the complex channel norm.
"""

from dataclasses import dataclass

import numpy as np

from . import lift as lf


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def mw_to_dbm(mw):
    return linear_to_db(mw)


def path_loss(distance, exponent, c0_db=30.0, d0=1.0):
    """Linear power attenuation at the given distance."""
    return db_to_linear(-c0_db) * (distance / d0) ** (-exponent)


@dataclass
class ScenarioConfig:
    """Knobs of one simulated deployment (defaults follow the desk setup)."""

    m: int = 4                     # BS antennas
    n: int = 64                    # surface elements
    k: int = 3                     # users
    d_bi: float = 50.0             # BS-surface distance, metres
    d_iu: float = 3.0              # user-circle radius, metres
    alpha_bi: float = 2.5
    alpha_iu: float = 2.8
    alpha_bu: float = 3.5
    c0_db: float = 30.0
    d0: float = 1.0
    rician_db: float = 3.0
    noise_dbm: float = -80.0
    gamma_db: float = 10.0         # per-user SNR target
    delta: float = 0.02            # relative error level, reflected link
    delta_direct: float | None = None  # None: same level as `delta`
    direct_links: bool = False
    bits: int | None = None        # phase resolution; None = continuous
    constellation: str = "qpsk"
    error_mode: str = "surface"    # "surface" or "interior" draws
    seed: int = 0
    user_angles: object = None     # None, "random", or explicit radians

    @property
    def sigma(self):
        """Noise amplitude in sqrt(mW)."""
        return float(np.sqrt(dbm_to_mw(self.noise_dbm)))

    @property
    def gamma(self):
        return float(db_to_linear(self.gamma_db))


@dataclass
class ChannelSet:
    """One channel realisation: true links, estimates and error data."""

    config: ScenarioConfig
    g: np.ndarray                  # (N, M) BS-surface link
    h: np.ndarray                  # (K, N) surface-user links
    cascaded: np.ndarray           # (K, N, M) true diag(h_k^H) G
    cascaded_est: np.ndarray       # (K, N, M) estimates
    errors: np.ndarray             # (K, N, M) true minus estimate
    radii: np.ndarray              # (K,) absolute lifted error radii
    user_angles: np.ndarray
    user_distances: np.ndarray     # (K,) BS-user distances
    h_direct: object = None        # (K, M) or None
    h_direct_est: object = None
    errors_direct: object = None
    radii_direct: object = None


def _steering(count, angle):
    return np.exp(1j * np.pi * np.arange(count) * np.cos(angle))


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_error(shape, radius, mode, rng):
    """Draw a complex perturbation from the lifted-radius Frobenius ball.

    Parameters
    ----------
    shape : int or tuple
        Shape of the complex perturbation.
    radius : float
        Lifted ball radius; the complex norm bound is ``sqrt(2)/2 * radius``.
    mode : str
        "surface" pins the norm to the bound, "interior" draws uniformly
        from the ball (radius scaling ``u ** (1 / d)`` with ``d`` twice the
        number of complex entries).
    """
    if np.isscalar(shape):
        shape = (int(shape),)
    if mode not in ("surface", "interior"):
        raise ValueError(f"unknown error mode {mode!r}")
    bound = np.sqrt(2.0) / 2.0 * radius
    z = _cn(rng, *shape)
    if radius == 0.0:
        return np.zeros(shape, dtype=complex)
    direction = z / np.linalg.norm(z)
    if mode == "interior":
        dim = 2 * int(np.prod(shape))
        bound = bound * rng.uniform() ** (1.0 / dim)
    return bound * direction


def generate_channels(config, rng=None):
    """Draw one full channel realisation for a configuration.

    The draw order is fixed (BS-surface fading, then per-user links, then
    direct links, then errors) so a given generator state always produces the
    same :class:`ChannelSet`.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    m, n, k = config.m, config.n, config.k

    if config.user_angles is None:
        angles = 2.0 * np.pi * np.arange(k) / k
    elif isinstance(config.user_angles, str) and config.user_angles == "random":
        angles = rng.uniform(0.0, 2.0 * np.pi, k)
    else:
        angles = np.asarray(config.user_angles, dtype=float)
        if angles.size != k:
            raise ValueError("user_angles length must match k")

    irs_pos = np.array([config.d_bi, 0.0])
    user_pos = irs_pos + config.d_iu * np.stack(
        [np.cos(angles), np.sin(angles)], axis=1
    )
    user_dist = np.linalg.norm(user_pos, axis=1)

    # BS-surface link: Rician around the rank-one array response product
    kr = db_to_linear(config.rician_db)
    bearing = np.arctan2(irs_pos[1], irs_pos[0])
    g_los = np.outer(_steering(n, bearing), _steering(m, bearing).conj())
    g_nlos = _cn(rng, n, m)
    pl_bi = path_loss(config.d_bi, config.alpha_bi, config.c0_db, config.d0)
    g = np.sqrt(pl_bi) * (
        np.sqrt(kr / (kr + 1.0)) * g_los + np.sqrt(1.0 / (kr + 1.0)) * g_nlos
    )

    pl_iu = path_loss(config.d_iu, config.alpha_iu, config.c0_db, config.d0)
    h = np.sqrt(pl_iu) * _cn(rng, k, n)
    cascaded = np.stack([np.diag(h[i].conj()) @ g for i in range(k)])

    h_direct = None
    if config.direct_links:
        pl_bu = path_loss(user_dist, config.alpha_bu, config.c0_db, config.d0)
        h_direct = np.sqrt(pl_bu)[:, None] * _cn(rng, k, m)

    radii = config.delta * np.sqrt(2.0) * np.linalg.norm(cascaded, axis=(1, 2))
    errors = np.stack(
        [sample_error((n, m), radii[i], config.error_mode, rng) for i in range(k)]
    )
    cascaded_est = cascaded - errors

    direct_est = direct_err = radii_d = None
    if config.direct_links:
        level = config.delta if config.delta_direct is None else config.delta_direct
        radii_d = level * np.sqrt(2.0) * np.linalg.norm(h_direct, axis=1)
        direct_err = np.stack(
            [sample_error(m, radii_d[i], config.error_mode, rng) for i in range(k)]
        )
        direct_est = h_direct - direct_err

    return ChannelSet(
        config=config,
        g=g,
        h=h,
        cascaded=cascaded,
        cascaded_est=cascaded_est,
        errors=errors,
        radii=radii,
        user_angles=angles,
        user_distances=user_dist,
        h_direct=h_direct,
        h_direct_est=direct_est,
        errors_direct=direct_err,
        radii_direct=radii_d,
    )


def received_noise_free(theta, channel, x, direct=None):
    """Complex noise-free receive value ``theta^H H x (+ h_d^H x)``.

    ``theta`` is the complex phase-shift vector from
    :func:`irsslp.lift.lift_phase_vector`; ``channel`` the (N, M) cascaded
    matrix; ``direct`` an optional (M,) direct link.
    """
    y = theta.conj() @ (channel @ x)
    if direct is not None:
        y = y + direct.conj() @ x
    return y


def trial_rng(seed, trial):
    """Independent, reproducible per-trial generator stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))
