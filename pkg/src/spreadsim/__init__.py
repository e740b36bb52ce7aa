"""Simulation and analysis of the general information-spreading block.

Nodes repeatedly take the best value a neighbor offers through a
progressive spreading function, capped by their own maximum value, and may
instead raise their estimate to shake off stale underestimates. The package
provides the round simulator, exact stationary-point oracles, convergence
and ultimate-bound formulas, bounded edge noise, error metrics and a CLI
for parameter studies.
"""

from .engine import PLAIN, RaisingConfig, SimulationState, Trajectory, init, run, step
from .functions import SpreadingFunction, abf_sum, hazard, most_probable_path
from .graph import INF, GeometricConfig, Graph, generate_geometric, shrunken, validate
from .oracle import StationaryAnalysis, convergence_time_bound, stationary, ultimate_bound

__version__ = "0.1.0"
