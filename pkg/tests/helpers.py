"""Shared small configurations for the test suite."""

import numpy as np

from abphase.config import SolenoidSpec, make_config
from abphase.modes import ModeGrid

DESK_SOLENOID = SolenoidSpec(radius=0.25, loops=3, elements_per_loop=12, half_height=0.3)
DESK_K = [[0.9, 0.3, 0.2], [-0.4, 1.1, 0.5]]
COMPACT_SOLENOID = SolenoidSpec(radius=0.25, loops=5, elements_per_loop=24, half_height=0.5)


def desk_config(B0=1.5e-3, p=1e-3, **kw):
    """Two-branch config with a compact solenoid; couplings keep sum(mu) near 1e-6."""
    kw.setdefault("r_L", [-1.0, 0.2, 0.0])
    kw.setdefault("r_R", [1.0, 0.2, 0.0])
    return make_config(B0=B0, solenoid=DESK_SOLENOID, p_vec=[0.0, p, 0.0], **kw)


def desk_grid(n_max=2, volume=0.15, k=DESK_K):
    return ModeGrid.box_modes(k, volume=volume, n_max=n_max)


def random_box_config(rng, n_modes, mu_target, n_max):
    """Random geometry and modes; the volume is chosen so max-sector sum(mu) equals ``mu_target``."""
    from abphase import ab_model

    k = rng.normal(size=(n_modes, 3))
    k *= rng.uniform(0.5, 2.0, size=(n_modes, 1)) / np.linalg.norm(k, axis=1, keepdims=True)
    x = rng.uniform(0.6, 1.5)
    y = rng.uniform(-0.5, 0.5)
    cfg = make_config(B0=rng.uniform(0.5, 2.0) * 1e-2, solenoid=DESK_SOLENOID,
                      p_vec=[0.0, rng.uniform(2e-4, 1e-3), 0.0],
                      r_L=[-x, y, 0.0], r_R=[x, y + rng.uniform(-0.2, 0.2), 0.0],
                      E_C=rng.uniform(-0.5, 0.5), E_S=rng.uniform(-0.5, 0.5))
    probe = ModeGrid.box_modes(k, volume=1.0, n_max=n_max)
    worst = max(np.sum(ab_model.sector_mu(s, probe)) for s in ab_model.sector_decompose(cfg, probe))
    return cfg, ModeGrid.box_modes(k, volume=worst / mu_target, n_max=n_max)
