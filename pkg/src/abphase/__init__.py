"""Quantized-field simulation of locally generated Aharonov-Bohm phases.

Modules
-------
quantum_core      operators and states on qubit / boson / fermion tensor products
config            physical configuration, solenoid discretization, units
modes             discrete photon mode grids
ab_model          charge-photon-solenoid Hamiltonian and its exact sector solution
phase_extraction  phases from state-vector simulation, Heisenberg picture
analytic_em       classical fields, interaction energy, kernel check, path sweep
tomography        two-electron, superselection-safe phase tomography
scenarios, cli    scenario files and the ``abphase`` command
"""

__version__ = "0.1.0"

from .config import (ConfigError, PathSpec, PhysicalConfig, SolenoidSpec, make_config)  # noqa: E402
from .modes import ModeGrid  # noqa: E402

__all__ = ["ConfigError", "ModeGrid", "PathSpec", "PhysicalConfig", "SolenoidSpec", "make_config",
           "__version__"]
