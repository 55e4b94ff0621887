"""Information percolation in large populations: series solver, ODE oracle, matching simulator."""
from .kernels import BACKEND
from .measure import LatticeMeasure, NumericalInvariantError, convolve, kolmogorov_distance, mean
from .signals import ProfileSpec, SignalSpec, WorldState, initial_distribution
from .wild import SolveParams, wild_coefficients, wild_solution
from .ode import OdeParams, evolve
from .sim import SimConfig, run as simulate
from .analysis import BeliefQuery, belief_cdf, chernoff_gamma, fit_exponential_rate, tail_series

__version__ = "0.1.0"
