"""Particle-in-cell simulation of oscillating self-gravitating systems.

Subpackages cover equilibrium construction (steady_state), the exact
breathing-ball reference family (kurth), the particle engine (engine),
initial perturbations (perturbations), time-series and recurrence analysis
(diagnostics), and the config-driven command line (cli).
"""

from vposc.steady_state import (
    AnsatzFamily,
    AnsatzModel,
    GridSpec,
    SteadyStateProfile,
    build_ansatz,
    central_density,
    evaluate_f0,
    g_of_y,
    load_profile,
    save_profile,
    solve_steady_state,
)

__all__ = [
    "AnsatzFamily",
    "AnsatzModel",
    "GridSpec",
    "SteadyStateProfile",
    "build_ansatz",
    "central_density",
    "evaluate_f0",
    "g_of_y",
    "load_profile",
    "save_profile",
    "solve_steady_state",
]

__version__ = "0.1.0"
