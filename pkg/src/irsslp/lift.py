"""Real-valued lifting of complex matrices and phase profiles.

Every complex matrix ``U`` (m x n) is represented by the real matrix

    T(U) = [[Re U, -Im U],
            [Im U,  Re U]]      (2m x 2n),

and every complex vector ``x`` by ``[Re x; Im x]``.  The map ``T`` is a ring
homomorphism: ``T(UV) = T(U) T(V)`` and ``T(U^H) = T(U)^T``, and it doubles
Frobenius norms, ``||T(U)||_F = sqrt(2) ||U||_F``.  The norm doubling is why a
complex uncertainty ball of radius ``(sqrt(2)/2) * d`` maps onto a lifted ball
of radius ``d``.

Phase profiles are stored as physical phases ``phi`` (length N).  The surface
applies the multiplier ``exp(1j * phi[n])`` to the signal arriving at element
``n``, so the row vector of multipliers is ``theta^H`` and the lifted profile
is

    theta_tilde = [cos(phi); sin(phi)]         (length 2N),

with ``||theta_tilde||_2 = sqrt(N)``.  The 2 x 2N block ``T(theta^H)`` couples
the lifted cascaded channel to the lifted transmit vector; for any detection
row ``a`` (length 2) the identity

    a^T T(theta^H) = theta_tilde^T D(a)

holds with ``D(a) = [[a0, a1], [a1, -a0]] kron I_N``, built here through the
fixed 4 x 2 selector so the construction mirrors its derivation.
"""

import numpy as np

# Fixed selector turning the stacked 2x2 blocks of T(theta^H) into the
# [cos; sin] coordinates: rows pick (Re, Im, -Im, Re) contributions.
_SELECTOR = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0]])


def lift(u):
    """Return the real lifting T(u) of a complex matrix or row/column vector.

    Parameters
    ----------
    u : array_like, complex, shape (m, n)
        Matrix to lift.  1-D input is treated as a single row.

    Returns
    -------
    ndarray, shape (2m, 2n)
    """
    u = np.atleast_2d(np.asarray(u, dtype=complex))
    re, im = u.real, u.imag
    return np.block([[re, -im], [im, re]])


def unlift(a):
    """Invert :func:`lift`: recover the complex matrix from its lifted form.

    The input must have even dimensions; the two redundant copies of the real
    and imaginary parts are averaged so that small asymmetries (for instance
    from solver output) do not bias the result.
    """
    a = np.asarray(a, dtype=float)
    m2, n2 = a.shape
    if m2 % 2 or n2 % 2:
        raise ValueError("lifted matrix must have even dimensions")
    m, n = m2 // 2, n2 // 2
    re = 0.5 * (a[:m, :n] + a[m:, n:])
    im = 0.5 * (a[m:, :n] - a[:m, n:])
    return re + 1j * im


def lift_vector(x):
    """Stack a complex vector into its real form ``[Re x; Im x]``."""
    x = np.asarray(x, dtype=complex).ravel()
    return np.concatenate([x.real, x.imag])


def unlift_vector(x_lifted):
    """Invert :func:`lift_vector`."""
    x_lifted = np.asarray(x_lifted, dtype=float).ravel()
    if x_lifted.size % 2:
        raise ValueError("lifted vector must have even length")
    m = x_lifted.size // 2
    return x_lifted[:m] + 1j * x_lifted[m:]


def lift_phase_vector(phases):
    """Return the complex phase-shift vector and its lifted representation.

    Parameters
    ----------
    phases : array_like, shape (N,)
        Physical phases ``phi`` in radians.

    Returns
    -------
    theta : ndarray, complex, shape (N,)
        Phase-shift vector whose conjugate transpose holds the per-element
        multipliers ``exp(1j * phi)``.
    theta_tilde : ndarray, shape (2N,)
        Lifted profile ``[cos(phi); sin(phi)]``.
    """
    phases = np.asarray(phases, dtype=float).ravel()
    theta = np.exp(-1j * phases)
    theta_tilde = np.concatenate([np.cos(phases), np.sin(phases)])
    return theta, theta_tilde


def phases_from_lifted(theta_tilde):
    """Recover physical phases from a lifted profile (exact for unit modulus)."""
    theta_tilde = np.asarray(theta_tilde, dtype=float).ravel()
    n = theta_tilde.size // 2
    return np.arctan2(theta_tilde[n:], theta_tilde[:n])


def phase_matrix(theta_tilde):
    """Return the 2 x 2N coupling block ``T(theta^H)`` for a lifted profile."""
    theta_tilde = np.asarray(theta_tilde, dtype=float).ravel()
    n = theta_tilde.size // 2
    c, s = theta_tilde[:n], theta_tilde[n:]
    out = np.empty((2, 2 * n))
    out[0, :n], out[0, n:] = c, -s
    out[1, :n], out[1, n:] = s, c
    return out


def phase_coupling(a_row, n_elements):
    """Build ``D(a)`` with ``a^T T(theta^H) = theta_tilde^T D(a)``.

    Parameters
    ----------
    a_row : array_like, shape (2,)
        One detection-region row acting on ``[Re y; Im y]``.
    n_elements : int
        Number of surface elements N.

    Returns
    -------
    ndarray, shape (2N, 2N)
    """
    a_row = np.asarray(a_row, dtype=float).ravel()
    if a_row.size != 2:
        raise ValueError("detection row must have length 2")
    core = np.kron(np.eye(2), a_row[None, :]) @ _SELECTOR  # 2 x 2
    return np.kron(core, np.eye(n_elements))


def project_unit_modulus(theta_tilde):
    """Normalize every (cos, sin) pair of a lifted profile to unit length."""
    theta_tilde = np.asarray(theta_tilde, dtype=float).ravel()
    n = theta_tilde.size // 2
    c, s = theta_tilde[:n], theta_tilde[n:]
    scale = np.hypot(c, s)
    if np.any(scale == 0.0):
        raise ValueError("cannot normalize a zero pair")
    return np.concatenate([c / scale, s / scale])


def pair_selector(index, n_elements):
    """Return the 2 x 2N selector extracting element ``index`` of a profile.

    The rows are the unit vectors ``e_index`` and ``e_{index+N}``, so that the
    selected pair is ``(cos phi_index, sin phi_index)`` and a unit-modulus
    profile gives ``||B theta_tilde||_2 = 1``.
    """
    b = np.zeros((2, 2 * n_elements))
    b[0, index] = 1.0
    b[1, index + n_elements] = 1.0
    return b
