"""Worst-case robust symbol-level precoding with a reflecting surface.

Joint design of a transmit vector and passive phase-shift profile that keeps
every user's noise-free receive point inside its constructive-interference
region for *all* bounded channel estimation errors, at minimum transmit
power.

Modules
-------
lift            real lifting of complex matrices and phase profiles
constellation   PSK/QAM geometry and constructive-interference halfspaces
scenario        system geometry, fading draws, bounded error models
cone            thin cone-programming layer over a conic solver
robust          worst-case margins and feasibility certificates
single_user     closed-form alternating and semidefinite designs (BPSK)
multiuser       alternating optimisation with proximal phase updates,
                finite-resolution and direct-link variants
harness         Monte-Carlo power sweeps, symbol-error runs, timing tables
cli             command-line workbench (``irsslp --help``)
"""

from .constellation import (Constellation, cir_halfspaces, detect,
                            get_constellation, random_symbols)
from .harness import ResultTable, SweepSpec, run_power_sweep, run_ser, run_timing
from .lift import lift_phase_vector, phase_coupling, unlift_vector
from .multiuser import ao_multiuser, ao_multiuser_discrete, solve_transmit
from .robust import (RobustInstance, build_instance, check_feasible,
                     sampled_check, worst_case_margin)
from .scenario import (ChannelSet, ScenarioConfig, generate_channels,
                       mw_to_dbm, trial_rng)
from .single_user import ao_solve, profile_power, rank_reduce, sdr_solve

__all__ = [
    "Constellation", "cir_halfspaces", "detect", "get_constellation",
    "random_symbols",
    "ResultTable", "SweepSpec", "run_power_sweep", "run_ser", "run_timing",
    "lift_phase_vector", "phase_coupling", "unlift_vector",
    "ao_multiuser", "ao_multiuser_discrete", "solve_transmit",
    "RobustInstance", "build_instance", "check_feasible", "sampled_check",
    "worst_case_margin",
    "ChannelSet", "ScenarioConfig", "generate_channels", "mw_to_dbm",
    "trial_rng",
    "ao_solve", "profile_power", "rank_reduce", "sdr_solve",
]

__version__ = "0.1.0"
