"""
The full phase from local pieces
================================

Moving the two branches around opposite halves of a circle and adding up the
pointwise phase difference gives back the enclosed flux, whatever the radius
or the speed.
"""

import numpy as np

from abphase import analytic_em
from abphase.config import PathSpec, make_config

for rho, t_loop in [(1.0, 4000.0), (3.0, 12000.0), (1.0, 40000.0), (10.0, 40000.0)]:
    cfg = make_config(B0=2.0, solenoid=None, path=PathSpec(rho=rho, t_loop=t_loop))
    res = analytic_em.path_sweep(cfg)
    flux = cfg.q * cfg.B0 * cfg.S_cross
    print(f"rho={rho:5.1f} t_loop={t_loop:8.0f} v={res.speed:.2e}  "
          f"total={res.total_phase:.12f}  q*flux={flux:.12f}")

# the same integral with the discretized solenoid, and with the picture rotated
cfg = make_config(B0=2.0)
print("discretized solenoid:", analytic_em.path_sweep(cfg, ideal=False).total_phase)
print("rotated by 1 rad    :", analytic_em.path_sweep(cfg, orientation=1.0).total_phase)

# cumulative phase along the path, every sixteenth sample
res = analytic_em.path_sweep(make_config(B0=2.0, solenoid=None))
for s in res.samples[::16]:
    print(f"  s={s.arc_parameter:.3f}  x={s.position[0]:+.3f} y={s.position[1]:+.3f}  "
          f"cumulative={s.cumulative_phase:.6f}")
print("ends at", np.round(res.samples[-1].cumulative_phase, 12))
