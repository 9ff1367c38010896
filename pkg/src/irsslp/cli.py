"""Command-line workbench for robust symbol-level precoding experiments.

Subcommands
-----------
``single-user``   one BPSK instance; semidefinite relaxation or alternating
                  optimisation (``--method sdr|ao``)
``multiuser``     one multiuser instance; alternating optimisation with an
                  optional finite phase resolution (``--bits inf|1|2|3``);
                  emits the per-iteration power trace and the final design
``sweep``         Monte-Carlo power sweep over a preset grid
``ser``           Monte-Carlo symbol-error-rate run
``timing``        single-user solver wall-time comparison

Configuration values resolve as: command-line flag, then config-file key,
then preset bundle, then built-in defaults.  The effective configuration is
echoed into every output as ``#`` comment lines.  Config files are
key-value documents (YAML) mirroring the scenario fields plus ``method``,
``trials``, ``preset`` and ``out``.

Exit codes: 0 success, 1 infeasible or failed runs, 2 usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys
import time
from dataclasses import fields

import numpy as np
import yaml

from . import harness as hz
from . import constellation as cn
from . import multiuser as mu
from . import robust as rb
from . import scenario as sc
from . import single_user as su


class CliError(Exception):
    """Configuration problem: reported on stderr with exit code 2."""


_SCENARIO_KEYS = tuple(f.name for f in fields(sc.ScenarioConfig))
_EXTRA_KEYS = ("method", "trials", "preset", "out")

# Preset bundles: grid, methods and scenario overrides for one-command
# trend reproduction.  Batch sizes follow the desk-scale defaults; override
# with --trials for a quick look.
_PRESETS = {
    "fig3a": dict(kind="sweep", param="n", grid=(16, 32, 48, 64),
                  methods=("sdr", "ao-su"), trials=50,
                  scenario=dict(k=1, constellation="bpsk")),
    "fig3b": dict(kind="timing", param="n", grid=(16, 32, 48, 64),
                  methods=("sdr", "ao-su"), trials=10,
                  scenario=dict(k=1, constellation="bpsk")),
    "fig5": dict(kind="sweep", param="n", grid=(16, 32, 48, 64),
                 methods=("ao-su",), trials=50,
                 scenario=dict(k=1, constellation="bpsk")),
    "fig7": dict(kind="sweep", param="n", grid=(16, 32, 48, 64),
                 methods=("ao-b1", "ao-b2", "ao-b3", "ao"), trials=50,
                 scenario=dict(k=3, constellation="qpsk")),
    "fig8a": dict(kind="sweep", param="gamma_db",
                  grid=(10.0, 12.0, 14.0, 16.0, 18.0, 20.0),
                  methods=("ao",), trials=50,
                  scenario=dict(k=3, n=32, constellation="qpsk")),
    "fig8b": dict(kind="sweep", param="delta",
                  grid=(0.0, 0.01, 0.02, 0.03, 0.04, 0.05),
                  methods=("ao",), trials=50,
                  scenario=dict(k=3, n=32, constellation="qpsk")),
    "fig9": dict(kind="ser", param="gamma_db",
                 grid=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0),
                 methods=("ao-b1", "ao-b2", "ao"), trials=50,
                 scenario=dict(k=3, n=32, constellation="qpsk")),
    "fig10": dict(kind="sweep", param="n", grid=(16, 32, 48, 64),
                  methods=("ao", "ao-direct"), trials=50,
                  scenario=dict(k=3, constellation="qpsk",
                                direct_links=True)),
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="irsslp",
        description="Robust symbol-level precoding with a reflecting "
                    "surface: single designs and Monte-Carlo trend runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("--n", type=int, help="reflecting elements")
        sp.add_argument("--m", type=int, help="transmit antennas")
        sp.add_argument("--gamma-db", type=float, dest="gamma_db",
                        help="per-user SNR target, dB")
        sp.add_argument("--delta", type=float,
                        help="relative channel uncertainty level")
        sp.add_argument("--constellation",
                        choices=("bpsk", "qpsk", "8psk", "16qam"))
        sp.add_argument("--direct-links", choices=("on", "off"),
                        dest="direct_links")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--config", help="key-value config file")
        sp.add_argument("--out", help="output CSV path (default stdout)")

    sp = sub.add_parser("single-user", help="one BPSK design instance")
    scenario_flags(sp)
    sp.add_argument("--method", choices=("sdr", "ao"), default=None)

    sp = sub.add_parser("multiuser", help="one multiuser design instance")
    scenario_flags(sp)
    sp.add_argument("--k", type=int, help="number of users")
    sp.add_argument("--bits", help="phase resolution: inf or a bit count")

    for name, help_text in (("sweep", "Monte-Carlo power sweep"),
                            ("ser", "Monte-Carlo symbol error rate"),
                            ("timing", "single-user solver timing")):
        sp = sub.add_parser(name, help=help_text)
        scenario_flags(sp)
        sp.add_argument("--k", type=int, help="number of users")
        sp.add_argument("--bits", help="phase resolution: inf or a bit count")
        sp.add_argument("--preset", choices=sorted(_PRESETS))
        sp.add_argument("--trials", type=int)
        sp.add_argument("--method",
                        help="comma-separated method list (overrides preset)")
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise CliError(f"malformed config {path}: {exc}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise CliError(f"config {path} must be a key-value mapping")
    for key in data:
        if key not in _SCENARIO_KEYS and key not in _EXTRA_KEYS:
            raise CliError(f"unknown config key {key!r}")
    return data


def _parse_bits(value):
    if value is None:
        return None
    if isinstance(value, str):
        if value.lower() in ("inf", "none", "continuous"):
            return None
        try:
            value = int(value)
        except ValueError:
            raise CliError(f"bad bits value {value!r}: use inf or an integer")
    if int(value) < 1:
        raise CliError("bits must be at least 1")
    return int(value)


def _scenario(args, file_cfg, preset, forced=None):
    """Assemble the scenario: flags over file keys over preset bundle."""
    values = {}
    if preset:
        values.update(preset["scenario"])
    for key in _SCENARIO_KEYS:
        if key in file_cfg:
            values[key] = file_cfg[key]
    for key in _SCENARIO_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if isinstance(values.get("direct_links"), str):
        values["direct_links"] = values["direct_links"] == "on"
    if "bits" in values:
        values["bits"] = _parse_bits(values["bits"])
    for key, value in (forced or {}).items():
        current = values.get(key)
        if current is not None and current != value:
            raise CliError(
                f"{key}={current!r} is not supported here (needs {value!r})")
        values[key] = value
    try:
        return sc.ScenarioConfig(**values)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc))


def _pick(args, file_cfg, key, fallback):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return fallback


def _open_out(path):
    if path:
        return open(path, "w", newline="")
    return contextlib.nullcontext(sys.stdout)


def _echo_config(fh, cfg, extras):
    for f in fields(cfg):
        fh.write(f"# {f.name} = {getattr(cfg, f.name)}\n")
    for key in sorted(extras):
        fh.write(f"# {key} = {extras[key]}\n")


def _long_rows(writer, record, names_values, index=0):
    for name, value in names_values:
        writer.writerow([record, index, name, value])


def _design_rows(writer, cfg, sol, elapsed_ms):
    """Common long-format dump: summary, trace, phases, transmit, margins."""
    summary = [
        ("status", sol.status),
        ("power_dbm", hz._fmt(sol.power_dbm)),
        ("iterations", getattr(sol, "iterations", 0)),
        ("converged", getattr(sol, "converged", "")),
        ("time_ms", hz._fmt(elapsed_ms)),
    ]
    if getattr(sol, "lower_bound", None) is not None:
        bound_mw = sol.lower_bound ** 2
        summary.append(("lower_bound_dbm", hz._fmt(sc.mw_to_dbm(bound_mw))))
    if getattr(sol, "redraws", None) is not None:
        summary.append(("redraws", sol.redraws))
    if getattr(sol, "bits", None) is not None:
        summary.append(("bits", sol.bits))
    _long_rows(writer, "summary", summary)
    trace = getattr(sol, "outer_powers", None) or getattr(sol, "powers", [])
    for i, p in enumerate(trace):
        dbm = sc.mw_to_dbm(p ** 2) if p > 0 else float("-inf")
        writer.writerow(["trace", i, "power_dbm", hz._fmt(dbm)])
    if sol.phases is not None:
        for i, phi in enumerate(np.atleast_1d(sol.phases)):
            writer.writerow(["design", i, "phase_rad", hz._fmt(phi)])
    if sol.x_lifted is not None:
        x = sol.x_lifted
        half = x.size // 2
        for i in range(half):
            writer.writerow(["transmit", i, "re", hz._fmt(x[i])])
            writer.writerow(["transmit", i, "im", hz._fmt(x[half + i])])
    for k, user_margins in enumerate(sol.margins or []):
        for i, margin in enumerate(np.atleast_1d(user_margins)):
            writer.writerow(["margin", k, f"row{i}", hz._fmt(margin)])


def _infeasible_message(cfg):
    return ("infeasible: the worst-case robust margin cannot be kept "
            f"non-negative at delta={cfg.delta} for any transmit power; "
            "lower --delta or --gamma-db, or raise --n")


def _cmd_single_user(args):
    file_cfg = _load_config(args.config) if args.config else {}
    cfg = _scenario(args, file_cfg, None,
                    forced=dict(k=1, constellation="bpsk"))
    method = _pick(args, file_cfg, "method", "ao") or "ao"
    if method not in ("sdr", "ao"):
        raise CliError(f"unknown single-user method {method!r}")
    channels = sc.generate_channels(cfg)
    instance = rb.build_instance(channels, [0])
    rng = sc.trial_rng(cfg.seed, 1)
    tic = time.perf_counter()
    if method == "sdr":
        sol = su.sdr_solve(instance, rng=rng)
    else:
        sol = su.ao_solve(instance, rng=rng)
    elapsed = 1e3 * (time.perf_counter() - tic)
    out = _pick(args, file_cfg, "out", None)
    with _open_out(out) as fh:
        _echo_config(fh, cfg, {"method": method, "symbols": [0]})
        writer = csv.writer(fh)
        writer.writerow(("record", "index", "name", "value"))
        _design_rows(writer, cfg, sol, elapsed)
    if sol.status != "optimal":
        print(_infeasible_message(cfg), file=sys.stderr)
        return 1
    return 0


def _cmd_multiuser(args):
    file_cfg = _load_config(args.config) if args.config else {}
    cfg = _scenario(args, file_cfg, None)
    bits = cfg.bits
    channels = sc.generate_channels(cfg)
    const = cn.get_constellation(cfg.constellation)
    symbols = cn.random_symbols(const, cfg.k, sc.trial_rng(cfg.seed, 1))
    instance = rb.build_instance(channels, symbols)
    rng = sc.trial_rng(cfg.seed, 2)
    tic = time.perf_counter()
    if bits is None:
        sol = mu.ao_multiuser(instance, rng=rng)
    else:
        sol = mu.ao_multiuser_discrete(instance, bits, rng=rng)
    elapsed = 1e3 * (time.perf_counter() - tic)
    out = _pick(args, file_cfg, "out", None)
    with _open_out(out) as fh:
        _echo_config(fh, cfg, {"bits": "inf" if bits is None else bits,
                               "symbols": list(map(int, symbols))})
        writer = csv.writer(fh)
        writer.writerow(("record", "index", "name", "value"))
        _design_rows(writer, cfg, sol, elapsed)
    if sol.status != "optimal":
        print(_infeasible_message(cfg), file=sys.stderr)
        return 1
    return 0


def _bundle(args, file_cfg, command):
    """Resolve preset/param/grid/methods/trials for a batch subcommand."""
    pname = _pick(args, file_cfg, "preset", None)
    if pname is None and command == "timing":
        pname = "fig3b"
    preset = None
    if pname is not None:
        preset = _PRESETS.get(pname)
        if preset is None:
            raise CliError(f"unknown preset {pname!r}")
        if preset["kind"] != command:
            raise CliError(
                f"preset {pname} belongs to the {preset['kind']} subcommand")
    elif command == "sweep":
        raise CliError("sweep needs --preset (see --help for the list)")
    cfg = _scenario(args, file_cfg, preset)
    if preset is not None:
        param, grid = preset["param"], preset["grid"]
        methods, trials = preset["methods"], preset["trials"]
        experiment = pname
    else:  # bare `ser`: one point at the configured SNR target
        param, grid = "gamma_db", (cfg.gamma_db,)
        methods, trials = ("ao",), 50
        experiment = "custom"
    method_flag = _pick(args, file_cfg, "method", None)
    if method_flag:
        methods = tuple(m.strip() for m in method_flag.split(",") if m.strip())
    if cfg.bits is not None:
        methods = (f"ao-b{cfg.bits}",)
    trials = int(_pick(args, file_cfg, "trials", trials))
    try:
        spec = hz.SweepSpec(param=param, grid=grid, base=cfg,
                            methods=methods, trials=trials,
                            experiment=experiment or "custom")
    except ValueError as exc:
        raise CliError(str(exc))
    return spec, pname


def _emit_table(args, file_cfg, spec, table, extras):
    out = _pick(args, file_cfg, "out", None)
    with _open_out(out) as fh:
        _echo_config(fh, spec.base, extras)
        table.write_csv(fh)
    failed = [r for r in table.rows if r.failures]
    if failed:
        total = sum(r.failures for r in failed)
        print(f"warning: {total} failed trial(s) excluded from means",
              file=sys.stderr)
    if any(r.failures == r.trials for r in table.rows):
        print("error: some grid points produced no feasible design",
              file=sys.stderr)
        return 1
    return 0


def _cmd_batch(args, command):
    file_cfg = _load_config(args.config) if args.config else {}
    spec, pname = _bundle(args, file_cfg, command)
    if command == "sweep":
        table = hz.run_power_sweep(spec)
    elif command == "timing":
        table = hz.run_timing(spec)
    else:
        table = hz.run_ser(spec)
    extras = {"preset": pname or "none", "param": spec.param,
              "grid": list(spec.grid), "methods": list(spec.methods),
              "trials": spec.trials}
    return _emit_table(args, file_cfg, spec, table, extras)


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.command == "single-user":
            return _cmd_single_user(args)
        if args.command == "multiuser":
            return _cmd_multiuser(args)
        return _cmd_batch(args, args.command)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
