"""Disentangling nonlinear Schroedinger dynamics on bipartite pure states."""

__version__ = "0.1.0"

from .disentangler import DisentanglerConfig, apply_m_d, rhs, total_generator
from .entanglement import enumerate_witnesses, q_purity, q_witness, reduced_purity
from .evolve import IntegratorConfig, Trajectory, evolve
from .hilbert import BipartiteState, apply_local, product_state, random_state

__all__ = [
    "BipartiteState",
    "DisentanglerConfig",
    "IntegratorConfig",
    "Trajectory",
    "apply_local",
    "apply_m_d",
    "enumerate_witnesses",
    "evolve",
    "product_state",
    "q_purity",
    "q_witness",
    "random_state",
    "reduced_purity",
    "rhs",
    "total_generator",
]
