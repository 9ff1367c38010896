"""Experiment harness: power sweeps, symbol-error runs, and timing tables.

Three batch operations share one result schema:

``run_power_sweep``
    For every grid value and every method, average the designed transmit
    power over independent channel trials.
``run_ser``
    Monte-Carlo symbol error rate.  Per trial the phase profile is designed
    once (full alternating optimisation on a reference symbol tuple drawn
    from the trial stream); each transmitted symbol tuple then re-solves the
    transmit second-order cone programme with the profile held fixed, cached
    per distinct tuple.  Symbols propagate through the *true* channel (the
    estimate plus its structured error draw) with circular Gaussian noise at
    the scenario noise level, and are detected against the nominal
    constellation after normalising by ``sigma * sqrt(gamma)``.
``run_timing``
    Wall-clock comparison of the single-user solvers over a grid.

Methods
-------
``"ao"``            multiuser alternating optimisation, continuous phases
``"ao-b<B>"``       same with a B-bit phase grid (hull relaxation + rounding)
``"ao-direct"``     continuous AO with the direct base-station/user links
                    folded into the design (scenario must generate them)
``"sdr"``           single-user semidefinite relaxation (k = 1, BPSK)
``"ao-su"``         single-user alternating closed forms (k = 1, BPSK)
``"socp"``          transmit cone programme at a random fixed profile

Within one trial every method sees the same channel draw and the same
designed symbol tuple, so method columns are paired comparisons.  The
continuous AO design is computed once per trial and shared: the ``"ao"``
column reports it directly and the discrete columns warm-start from it, so
adding or dropping methods never changes another column's numbers.  (The
shared design's runtime is billed to whichever method forces it first, so
per-method times in mixed sweeps are indicative only; :func:`run_timing`
restricts itself to unshared methods.)

Reproducibility
---------------
Every random decision draws from a dedicated stream keyed by
``(seed, grid point, trial, lane)`` via :func:`numpy.random.SeedSequence`,
so tables are bit-reproducible for a fixed :class:`SweepSpec` apart from the
wall-time column.  Failed trials (solver status other than ``"optimal"``,
or an infeasible per-tuple programme during a symbol run) are excluded from
every mean and counted in the ``failures`` column.

The CSV schema is fixed::

    sweep_param,value,method,mean_power_dbm,std_power_dbm,mean_ser,mean_time_ms,trials,failures

``mean_power_dbm`` is the dB value of the mean linear power (mW); the std
column is taken over per-trial dB values, skipping exact-zero designs (a
16-QAM tuple of interior points needs no power at all).  Columns that an
operation does not measure hold ``nan``.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import constellation as cn
from . import lift as lf
from . import multiuser as mu
from . import robust as rb
from . import scenario as sc
from . import single_user as su

CSV_HEADER = (
    "sweep_param", "value", "method", "mean_power_dbm", "std_power_dbm",
    "mean_ser", "mean_time_ms", "trials", "failures",
)

#: recognised experiment identifiers (presets live in :mod:`irsslp.cli`)
EXPERIMENTS = (
    "custom", "fig3a", "fig3b", "fig5", "fig7",
    "fig8a", "fig8b", "fig9", "fig10",
)

_SINGLE_USER = ("sdr", "ao-su")


def _known_method(name):
    if name in ("ao", "ao-direct", "socp") or name in _SINGLE_USER:
        return True
    if name.startswith("ao-b"):
        try:
            return int(name[4:]) >= 1
        except ValueError:
            return False
    return False


@dataclass
class SweepSpec:
    """One batch experiment: a swept scenario field, methods, and trials."""

    param: str
    grid: tuple
    base: sc.ScenarioConfig
    methods: tuple = ("ao",)
    trials: int = 50
    experiment: str = "custom"

    def __post_init__(self):
        self.grid = tuple(self.grid)
        self.methods = tuple(self.methods)
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if int(self.trials) < 1:
            raise ValueError("trials must be at least one")
        self.trials = int(self.trials)
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment id {self.experiment!r}")
        if not self.methods:
            raise ValueError("no methods selected")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate method names")
        for name in self.methods:
            if not _known_method(name):
                raise ValueError(f"unknown method {name!r}")
        if not hasattr(self.base, self.param):
            raise ValueError(f"{self.param!r} is not a scenario field")
        if "ao-direct" in self.methods and not self.base.direct_links:
            raise ValueError("method 'ao-direct' needs direct_links enabled")

    def configs(self):
        """Scenario configuration per grid point."""
        return [replace(self.base, **{self.param: v}) for v in self.grid]


@dataclass
class TrialRecord:
    """Raw outcome of one (grid point, method, trial); nan = not measured."""

    param: str
    value: object
    method: str
    trial: int
    status: str
    power_mw: float
    ser: float
    time_ms: float


@dataclass
class ResultRow:
    sweep_param: str
    value: object
    method: str
    mean_power_dbm: float
    std_power_dbm: float
    mean_ser: float
    mean_time_ms: float
    trials: int
    failures: int


@dataclass
class ResultTable:
    """Aggregated rows plus the raw per-trial records behind them."""

    rows: list
    records: list = field(default_factory=list)

    def row(self, value, method):
        for r in self.rows:
            if r.value == value and r.method == method:
                return r
        raise KeyError((value, method))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([
                r.sweep_param, _fmt(r.value), r.method,
                _fmt(r.mean_power_dbm), _fmt(r.std_power_dbm),
                _fmt(r.mean_ser), _fmt(r.mean_time_ms),
                r.trials, r.failures,
            ])


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.10g}"


def _stream(seed, *path):
    """Independent generator for one (grid point, trial, lane) path."""
    words = [int(seed)] + [int(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(words))


class _TrialContext:
    """Per-trial shared state: one channel draw, lazy instances and designs.

    Lane 0 of the trial's stream family draws the channels and the designed
    symbol tuple; lanes 1 and 2 are reserved for the shared continuous AO
    designs (without / with direct links); methods get lanes ``3 + index``.
    """

    def __init__(self, cfg, point, trial):
        self.cfg = cfg
        self.point = point
        self.trial = trial
        rng = _stream(cfg.seed, point, trial, 0)
        self.channels = sc.generate_channels(cfg, rng)
        self.constellation = cn.get_constellation(cfg.constellation)
        self.symbols = np.asarray(
            cn.random_symbols(self.constellation, cfg.k, rng))
        self._instances = {}
        self._continuous = {}

    def stream(self, lane):
        return _stream(self.cfg.seed, self.point, self.trial, lane)

    def instance(self, direct=False, symbols=None):
        if symbols is not None:
            return rb.build_instance(self.channels, symbols,
                                     include_direct=direct)
        if direct not in self._instances:
            self._instances[direct] = rb.build_instance(
                self.channels, self.symbols, include_direct=direct)
        return self._instances[direct]

    def continuous(self, direct=False):
        """Continuous-profile AO design, shared across this trial's methods."""
        if direct not in self._continuous:
            self._continuous[direct] = mu.ao_multiuser(
                self.instance(direct), rng=self.stream(1 + int(direct)))
        return self._continuous[direct]


def _design(method, ctx, lane):
    """Run one design method; returns (status, power, theta_tilde, direct)."""
    if method == "ao":
        sol = ctx.continuous(False)
        return sol.status, sol.power, sol.theta_tilde, False
    if method == "ao-direct":
        sol = ctx.continuous(True)
        return sol.status, sol.power, sol.theta_tilde, True
    if method.startswith("ao-b"):
        base = ctx.continuous(False)
        if base.status != "optimal":
            return base.status, base.power, base.theta_tilde, False
        sol = mu.ao_multiuser_discrete(
            ctx.instance(False), int(method[4:]),
            theta0=base.theta_tilde, rng=ctx.stream(lane))
        return sol.status, sol.power, sol.theta_tilde, False
    if method == "sdr":
        sol = su.sdr_solve(ctx.instance(False), rng=ctx.stream(lane))
        return sol.status, sol.power, sol.theta_tilde, False
    if method == "ao-su":
        sol = su.ao_solve(ctx.instance(False), rng=ctx.stream(lane))
        return sol.status, sol.power, sol.theta_tilde, False
    if method == "socp":
        rng = ctx.stream(lane)
        phases = rng.uniform(0.0, 2.0 * np.pi, ctx.cfg.n)
        _, theta_tilde = lf.lift_phase_vector(phases)
        ts = mu.solve_transmit(theta_tilde, ctx.instance(False))
        return ts.status, ts.power, theta_tilde, False
    raise ValueError(f"unknown method {method!r}")


def _check_point(cfg, methods):
    if any(m in _SINGLE_USER for m in methods):
        if cfg.k != 1 or cfg.constellation != "bpsk":
            raise ValueError(
                "single-user methods need k=1 and the bpsk constellation")


def _power_stats(powers_mw):
    vals = np.asarray([p for p in powers_mw if not np.isnan(p)], dtype=float)
    if vals.size == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(vals))
    mean_dbm = sc.mw_to_dbm(mean) if mean > 0.0 else float("-inf")
    pos = vals[vals > 0.0]
    if pos.size == 0:
        return mean_dbm, float("nan")
    return mean_dbm, float(np.std([sc.mw_to_dbm(p) for p in pos]))


def _nanmean(values):
    vals = [v for v in values if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def _aggregate(param, value, method, recs):
    ok = [r for r in recs if r.status == "optimal"]
    mean_dbm, std_dbm = _power_stats([r.power_mw for r in ok])
    return ResultRow(
        sweep_param=param, value=value, method=method,
        mean_power_dbm=mean_dbm, std_power_dbm=std_dbm,
        mean_ser=_nanmean([r.ser for r in ok]),
        mean_time_ms=_nanmean([r.time_ms for r in ok]),
        trials=len(recs), failures=len(recs) - len(ok),
    )


def run_power_sweep(spec):
    """Average designed transmit power per grid value and method."""
    rows, records = [], []
    for point, (value, cfg) in enumerate(zip(spec.grid, spec.configs())):
        _check_point(cfg, spec.methods)
        per_method = {m: [] for m in spec.methods}
        for trial in range(spec.trials):
            ctx = _TrialContext(cfg, point, trial)
            for mi, method in enumerate(spec.methods):
                tic = time.perf_counter()
                status, power, _, _ = _design(method, ctx, 3 + mi)
                elapsed = 1e3 * (time.perf_counter() - tic)
                power_mw = power ** 2 if np.isfinite(power) else float("nan")
                rec = TrialRecord(spec.param, value, method, trial, status,
                                  power_mw, float("nan"), elapsed)
                records.append(rec)
                per_method[method].append(rec)
        for method in spec.methods:
            rows.append(_aggregate(spec.param, value, method,
                                   per_method[method]))
    return ResultTable(rows, records)


def run_timing(spec):
    """Time the single-user solvers; power columns are filled as a bonus."""
    for m in spec.methods:
        if m not in _SINGLE_USER:
            raise ValueError("timing compares 'sdr' and 'ao-su' only")
    return run_power_sweep(spec)


def _simulate_symbols(ctx, theta_tilde, direct, n_symbols, rng):
    """Propagate random tuples through the true channel with the profile fixed.

    Returns ``(ser, received, sent)`` where ``received`` is the noisy
    receive value normalised by ``sigma * sqrt(gamma)`` per user, shape
    ``(n_symbols, K)``, and ``sent`` the transmitted point indices.  A
    symbol tuple with no feasible transmit vector at this profile is an
    outage: nothing is sent that slot and detection runs on pure noise,
    so the miss lands in the error rate instead of voiding the trial.
    Bounded QAM interference regions make such tuples a real occurrence
    (the robust margin caps the usable transmit power per cell).
    """
    cfg = ctx.cfg
    const = ctx.constellation
    theta = lf.unlift_vector(theta_tilde).conj()  # e^{-j phi} profile
    sigma = cfg.sigma
    scale = sigma * np.sqrt(sc.db_to_linear(cfg.gamma_db))

    sent = np.asarray(cn.random_symbols(const, (n_symbols, cfg.k), rng))
    noise = (rng.standard_normal((n_symbols, cfg.k))
             + 1j * rng.standard_normal((n_symbols, cfg.k)))
    noise *= sigma / np.sqrt(2.0)

    cache = {}
    clean = np.empty((n_symbols, cfg.k), dtype=complex)
    for slot in range(n_symbols):
        key = tuple(int(s) for s in sent[slot])
        if key not in cache:
            ts = mu.solve_transmit(theta_tilde,
                                   ctx.instance(direct, symbols=key))
            if ts.status != "optimal":
                cache[key] = np.zeros(cfg.k, dtype=complex)
            else:
                x = lf.unlift_vector(ts.x_lifted)
                rx = np.empty(cfg.k, dtype=complex)
                for k in range(cfg.k):
                    d = None
                    if direct and ctx.channels.h_direct is not None:
                        d = ctx.channels.h_direct[k]
                    rx[k] = sc.received_noise_free(
                        theta, ctx.channels.cascaded[k], x, d)
                cache[key] = rx
        clean[slot] = cache[key]

    received = (clean + noise) / scale
    detected = np.column_stack(
        [cn.detect(received[:, k], const) for k in range(cfg.k)])
    ser = float(np.mean(detected != sent))
    return ser, received, sent


def run_ser(spec, n_symbols=10_000, scatter_prefix=None, scatter_symbols=1000):
    """Monte-Carlo symbol error rate over the sweep grid.

    The profile is designed once per trial by each method; per transmitted
    tuple only the transmit cone programme is re-solved (cached per distinct
    tuple).  Tuples infeasible at the designed profile are outage slots
    (nothing sent, detection on noise alone); only a failed *design* marks
    the trial itself as failed.  With ``scatter_prefix`` set, the first
    trial of the first method at each grid point dumps up to
    ``scatter_symbols`` normalised receive values to ``<prefix><value>.csv``
    with columns ``re_y,im_y,user,symbol``.
    """
    rows, records = [], []
    for point, (value, cfg) in enumerate(zip(spec.grid, spec.configs())):
        _check_point(cfg, spec.methods)
        per_method = {m: [] for m in spec.methods}
        for trial in range(spec.trials):
            ctx = _TrialContext(cfg, point, trial)
            for mi, method in enumerate(spec.methods):
                lane = 3 + mi
                tic = time.perf_counter()
                status, power, theta_tilde, direct = _design(method, ctx, lane)
                ser = float("nan")
                if status == "optimal":
                    sim_rng = ctx.stream(lane + len(spec.methods))
                    ser, received, sent = _simulate_symbols(
                        ctx, theta_tilde, direct, n_symbols, sim_rng)
                    if scatter_prefix is not None and trial == 0 and mi == 0:
                        _dump_scatter(
                            f"{scatter_prefix}{_fmt(value)}.csv",
                            received[:scatter_symbols],
                            sent[:scatter_symbols])
                elapsed = 1e3 * (time.perf_counter() - tic)
                power_mw = power ** 2 if np.isfinite(power) else float("nan")
                rec = TrialRecord(spec.param, value, method, trial, status,
                                  power_mw, ser, elapsed)
                records.append(rec)
                per_method[method].append(rec)
        for method in spec.methods:
            rows.append(_aggregate(spec.param, value, method,
                                   per_method[method]))
    return ResultTable(rows, records)


def _dump_scatter(path, received, sent):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("re_y", "im_y", "user", "symbol"))
        for slot in range(received.shape[0]):
            for k in range(received.shape[1]):
                writer.writerow([
                    _fmt(received[slot, k].real),
                    _fmt(received[slot, k].imag),
                    k, int(sent[slot, k]),
                ])
