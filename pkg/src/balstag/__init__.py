"""Joint route balancing and departure staggering for fleets of trips."""
from .instance import Instance, Trip, generate_synthetic, load_instance, save_instance
from .network import Network, PiecewiseLinear, PiecewiseRecipe, Polynomial
from .schedule import Schedule, Solution, construct_schedule, evaluate
from .solvers import ControlScenario, LnsParams, build_rduo, greedy_assignment, lns, run_variant

__version__ = "0.1.0"
