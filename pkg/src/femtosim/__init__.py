"""System-level simulator for on-demand femtocell activation.

FAPs sleep in femto-idle-mode until an active UE creates demand for them.
The package models the indoor link budget, the activation and handover
protocol, a tick-based scenario engine and the Monte Carlo sweeps that
compare the on-demand scheme with an always-on deployment.
"""

from .engine import (BaselineMode, Scenario, SweepSpec, SweepVariable, run,
                     run_count_sweep, run_probability_sweep, run_sweep)
from .radio import RadioConfig
from .scenario import load_scenario, parse_scenario, serialize_scenario

__version__ = "0.1.0"
