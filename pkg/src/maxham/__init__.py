"""Doubled-variable symplectic Hamiltonian evolution of source-free Maxwell
fields on periodic grids in time-independent curvilinear coordinates."""

from .doubling import (DoubledState, EvolutionOperator, hamiltonian,
                       hamilton_rhs, poisson_bracket)
from .exprlang import evaluate, parse, pretty
from .geometry import Chart, MetricSample, cartesian, cylindrical, levi_civita, \
    lower_index, metric_at, raise_index
from .grid import FieldState, Grid3, divergence, partial_deriv, write_snapshot
from .integrate import MonitorRecord, StepperSpec, run, step, write_monitors_csv
from .maxwell import (LagrangianProbe, MaxwellOperator, build_maxwell_operator,
                      hessian_of_lagrangian, irregularity_report,
                      verify_redundancy)
from .media import Medium, luneburg, sample_medium, uniaxial, vacuum
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Chart", "DoubledState", "EvolutionOperator", "FieldState", "Grid3",
    "LagrangianProbe", "MaxwellOperator", "Medium", "MetricSample",
    "MonitorRecord", "Scenario", "StepperSpec", "build_maxwell_operator",
    "cartesian", "cylindrical", "divergence", "evaluate", "hamiltonian",
    "hamilton_rhs", "hessian_of_lagrangian", "irregularity_report",
    "levi_civita", "load_scenario", "lower_index", "luneburg", "metric_at",
    "parse", "partial_deriv", "poisson_bracket", "pretty", "raise_index",
    "run", "sample_medium", "step", "uniaxial", "vacuum", "verify_redundancy",
    "write_monitors_csv", "write_snapshot",
]
