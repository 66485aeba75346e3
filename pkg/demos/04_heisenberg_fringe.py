"""
The fringe seen by the charge
=============================

In the Heisenberg picture the charge's q_x rotates into q_y at the rate set by
the phase difference, while the photon cloud reduces the contrast slightly.
The rotation rate follows the solenoid field.
"""

import numpy as np

from abphase import ab_model, phase_extraction
from abphase.config import SolenoidSpec, make_config
from abphase.modes import ModeGrid

sol = SolenoidSpec(radius=0.25, loops=3, elements_per_loop=12, half_height=0.3)
grid = ModeGrid.box_modes([[0.9, 0.3, 0.2], [-0.4, 1.1, 0.5]], volume=0.15, n_max=2)

print("   B0       visibility        rate - 2E_C        closed form - 2E_C")
for B0 in np.linspace(0.5e-3, 2.5e-3, 5):
    cfg = make_config(B0=B0, solenoid=sol, p_vec=[0.0, 1e-3, 0.0],
                      r_L=[-1.0, 0.2, 0.0], r_R=[1.0, 0.2, 0.0])
    fit = phase_extraction.heisenberg_visibility(cfg, grid)
    raw = ab_model.quantum_phase_difference(cfg, grid, retain_offset=True)
    print(f"{B0:.1e}  {fit.visibility:.10f}  {fit.phase_rate - 2 * cfg.E_C:+.6e}  "
          f"{raw - 2 * cfg.E_C:+.6e}")

# a direct conjugation U^dag q_x U at one time agrees with the fitted fringe
t = 1500.0
point = phase_extraction.heisenberg_qx(cfg, grid, t).expectation
print("U^dag q_x U at t=1500:", point)
print("fitted V cos(...)    :", fit.visibility * np.cos(fit.phase_rate * t + fit.chi))

# single mode: the field operators alpha = cos X and beta = sin X
one = ModeGrid.box_modes([[0.9, 0.3, 0.2]], volume=0.15, n_max=10)
dec = phase_extraction.heisenberg_decomposition(cfg, one)
print("theta eigenvalues:", dec.theta)
print("|alpha^2 + beta^2 - 1|:", dec.identity_error())
