"""
One sector, two ways
====================

Within a sector where the charge and solenoid qubits are sharp, the field is
a set of independent displaced oscillators.  Here the vacuum return amplitude
from exact evolution of the full truncated Hamiltonian is compared with the
closed-form displaced-oscillator amplitude.
"""

import numpy as np

from abphase import ab_model, phase_extraction
from abphase.config import SolenoidSpec, make_config
from abphase.modes import ModeGrid

sol = SolenoidSpec(radius=0.25, loops=3, elements_per_loop=12, half_height=0.3)
cfg = make_config(B0=0.05, solenoid=sol, p_vec=[0.0, 5e-3, 0.0],
                  r_L=[-1.0, 0.2, 0.0], r_R=[1.0, 0.2, 0.0])
grid = ModeGrid.box_modes([[1.0, 0.0, 0.0]], volume=0.002, n_max=8)

sector = ab_model.sector_problem(cfg, grid, s_c=1, s_s=1)
print("sum of mu in this sector:", np.sum(ab_model.sector_mu(sector, grid)))

H = ab_model.build_hamiltonian(cfg, grid, "superposed")
psi = ab_model.sector_state(grid, 1, 1)
times = np.linspace(0.0, 100.0, 4001)
exact = phase_extraction.vacuum_amplitude_series(H, psi, psi, times)
closed = ab_model.polaron_amplitude(sector, grid, times)
print("max |exact - closed form|:", np.max(np.abs(exact - closed)))

# the secular rate is const - sum |lambda|^2 / omega; the fit window skips
# the first ten oscillator periods
t = np.linspace(0.0, 20000.0, 200001)
fit = phase_extraction.fit_secular_rate(ab_model.polaron_amplitude(sector, grid, t), t,
                                        omega_min=1.0, max_residual=1.0)
print("fitted rate     :", fit.rate)
print("closed-form rate:", ab_model.sector_phase_rate(sector, grid))

# truncating the Fock space too hard shows up as a growing mismatch
for n_max in (2, 3, 4, 6):
    g = ModeGrid.box_modes([[1.0, 0.0, 0.0]], volume=0.002, n_max=n_max)
    Hn = ab_model.build_hamiltonian(cfg, g, "superposed")
    pn = ab_model.sector_state(g, 1, 1)
    err = np.max(np.abs(phase_extraction.vacuum_amplitude_series(Hn, pn, pn, times) - closed))
    print(f"n_max = {n_max}: max error {err:.2e}")
