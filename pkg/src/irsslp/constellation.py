"""Unit-energy constellations and their constructive-interference regions.

Each constellation point ``s`` carries a stack of halfspace rows ``(A, b)``
acting on the lifted received signal ``y_tilde = [Re y; Im y]``:

    A @ y_tilde >= sigma * sqrt(gamma) * b

describes the region in which noise-free reception is at least as reliable as
nominal reception of ``s`` at the SNR target ``gamma``.  The rows are stored
for the unit-energy constellation; callers scale the right-hand side by
``sigma * sqrt(gamma)``.

PSK points use the two rays parallel to the decision-sector boundaries,
written in the frame rotated by the point's angle:

    Re' +/- cot(pi/M) * Im' >= sigma * sqrt(gamma),

which for QPSK reduces to rows with entries ``+/- sqrt(2)`` anchored on the
scaled nominal point.  BPSK keeps the single row ``[+/-2, 0]`` with ``b = 2``
(the factor 2 makes the row norm profile-independent downstream).  For
16-QAM, outer coordinates get one outward-open row through the nominal point
and inner coordinates get the two rows of their decision strip, so inner
boxes coincide with the (scaled) decision cells and ``b`` entries may be zero
or negative.
"""

from dataclasses import dataclass

import numpy as np

NAMES = ("bpsk", "qpsk", "8psk", "16qam")

_QAM_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
_QAM_EDGE = 2.0 / np.sqrt(10.0)  # decision threshold between level magnitudes


@dataclass(frozen=True)
class Constellation:
    """A named point set plus per-point halfspace stacks."""

    name: str
    points: np.ndarray          # complex, shape (n_points,)
    rows: tuple                 # rows[i] = (A_i, b_i) for point i

    @property
    def n_points(self):
        return self.points.size


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _psk(name, order, offset):
    angles = 2.0 * np.pi * np.arange(order) / order + offset
    points = np.exp(1j * angles)
    if order == 2:
        rows = tuple(
            (2.0 * np.array([[np.cos(a), np.sin(a)]]), np.array([2.0]))
            for a in angles
        )
    else:
        cot = 1.0 / np.tan(np.pi / order)
        base = np.array([[1.0, cot], [1.0, -cot]])
        rows = tuple(
            (base @ _rotation(-a), np.array([1.0, 1.0])) for a in angles
        )
    return Constellation(name, points, rows)


def _qam16():
    points, rows = [], []
    outer = np.max(np.abs(_QAM_LEVELS))
    for re in _QAM_LEVELS:
        for im in _QAM_LEVELS:
            points.append(re + 1j * im)
            a_rows, b_vals = [], []
            for axis, value in ((0, re), (1, im)):
                unit = np.zeros(2)
                unit[axis] = np.sign(value)
                if np.abs(value) == outer:
                    # outward-open halfspace through the nominal coordinate
                    a_rows.append(unit)
                    b_vals.append(outer)
                else:
                    # decision strip: stay on the nominal side, below threshold
                    a_rows.append(unit)
                    b_vals.append(0.0)
                    a_rows.append(-unit)
                    b_vals.append(-_QAM_EDGE)
            rows.append((np.array(a_rows), np.array(b_vals)))
    return Constellation("16qam", np.array(points), tuple(rows))


def get_constellation(name):
    """Build a constellation by name ("bpsk", "qpsk", "8psk" or "16qam")."""
    key = name.lower()
    if key == "bpsk":
        return _psk("bpsk", 2, 0.0)
    if key == "qpsk":
        return _psk("qpsk", 4, np.pi / 4.0)
    if key == "8psk":
        return _psk("8psk", 8, 0.0)
    if key == "16qam":
        return _qam16()
    raise ValueError(f"unknown constellation {name!r}; choose from {NAMES}")


def cir_halfspaces(constellation, point_index):
    """Return the halfspace stack ``(A, b)`` of one constellation point."""
    return constellation.rows[point_index]


def detect(y, constellation):
    """Maximum-likelihood detection: nearest constellation point.

    ``y`` must be expressed in units of the unit-energy constellation (QAM
    detection is scale sensitive; divide by ``sigma * sqrt(gamma)`` first).
    Boundary ties resolve deterministically to the lowest point index.
    Accepts a scalar or an array and returns indices with matching shape.
    """
    y = np.asarray(y, dtype=complex)
    scalar = y.ndim == 0
    d2 = np.abs(np.atleast_1d(y)[..., None] - constellation.points) ** 2
    dmin = d2.min(axis=-1, keepdims=True)
    hit = d2 <= dmin + 1e-12 * (1.0 + dmin)
    idx = hit.argmax(axis=-1)
    return int(idx[0]) if scalar else idx


def random_symbols(constellation, size, rng):
    """Draw uniform point indices with the supplied generator."""
    return rng.integers(0, constellation.n_points, size=size)
