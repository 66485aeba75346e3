"""
Reading out the phase with local measurements
=============================================

The phase lives in a two-electron state spread over two sites.  Each site only
measures number-conserving observables, and the phase comes back from two
correlators.
"""

import math

from abphase import tomography as tm
from abphase.config import make_config

dphi = 0.5
reg = tm.prepare_protocol_state(dphi)
rep = tm.regroup_left_right(reg)
print("particles:", rep.particle_number, " one-per-side weight:", rep.sector_weight)

exact = tm.reconstruct_phase(tm.measure_correlators(reg))
print("exact correlators:", exact.correlators, " estimate:", exact.phase_estimate)

for shots in (10 ** 3, 10 ** 4, 10 ** 5):
    res = tm.reconstruct_phase(tm.measure_correlators(reg, shots=shots, seed=1))
    print(f"shots={shots:>6}: {res.phase_estimate:.4f} +/- {res.standard_error:.4f}")

# an offset on the reference electron shifts the estimate by the same amount
shifted = tm.reconstruct_phase(tm.measure_correlators(tm.prepare_protocol_state(dphi, 0.2)))
print("with reference offset 0.2:", shifted.phase_estimate)

# a single electron leaves nothing to measure locally
print("without electron B:", tm.regroup_left_right(tm.prepare_protocol_state(dphi, include_B=False)).message)

# b + b^dag would change the particle number on one side, so it is refused
bad = tm.validate_local_observable(tm.LocalObservable("L", tm.b("A_L") + tm.bdag("A_L"), "b+b^dag"))
print("b + b^dag valid?", bad.valid)
for line in bad.diagnostics[:2]:
    print("   ", line)

# end to end with the classical phase of a mirror pair
cfg = make_config(B0=2.0, solenoid=None, r_L=[-1.2, 0.3, 0.0], r_R=[1.2, 0.3, 0.0], p_vec=[0.0, 1e-3, 0.0])
res = tm.end_to_end_protocol(cfg, shots=0)
print("truth", res.ground_truth, " estimate", res.phase_estimate,
      " match", math.isclose(res.ground_truth, res.phase_estimate, abs_tol=1e-12))
