"""Symbolic jet calculus, Euler-Lagrange equations and higher-order phase dynamics."""
from .context import JetContext
from .exprlang import parse, print_canonical, normalize, diff, evaluate, equal_numeric
from .multiindex import MultiIndex
from .problem import Problem, load_problem, load_sections
from .varcalc import Lagrangian, euler_lagrange, momenta_reconstruct, raise_order
from .triple import phase_system_reduced, phase_system_unreduced, reduce_hamiltonian

__version__ = "0.1.0"

__all__ = [
    "JetContext", "MultiIndex", "Lagrangian", "Problem",
    "parse", "print_canonical", "normalize", "diff", "evaluate", "equal_numeric",
    "load_problem", "load_sections", "euler_lagrange", "momenta_reconstruct", "raise_order",
    "phase_system_reduced", "phase_system_unreduced", "reduce_hamiltonian",
]
