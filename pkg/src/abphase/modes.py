"""Discrete photon modes standing in for the continuum of k-space.

Each mode carries a k-vector, frequency ``omega = |k|``, box coupling
``g = sqrt(1 / (2 V omega))``, a quadrature weight (the k-space volume it
represents) and one transverse polarization vector.  A mode of weight ``w``
stands for ``V w / (2 pi)^3`` box modes, so the collective coupling amplitude
is ``g * sqrt(V w / (2 pi)^3)`` and the volume drops out of every physical
result.  A single box mode has ``w = (2 pi)^3 / V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import roots_legendre

TWO_PI_CUBED = (2 * math.pi) ** 3


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def transverse_polarizations(k_vecs: np.ndarray, axis) -> np.ndarray:
    """Unit vectors along the part of ``axis`` transverse to each k.

    Falls back to an arbitrary transverse direction when k is parallel to
    ``axis``.
    """
    k_vecs = np.atleast_2d(k_vecs)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    khat = k_vecs / np.linalg.norm(k_vecs, axis=1)[:, None]
    u = axis[None, :] - (khat @ axis)[:, None] * khat
    norms = np.linalg.norm(u, axis=1)
    bad = norms < 1e-12
    if np.any(bad):
        trial = np.where(abs(axis[0]) < 0.9, 1.0, 0.0)
        other = np.array([trial, 1.0 - trial, 0.0])
        alt = other[None, :] - (khat[bad] @ other)[:, None] * khat[bad]
        u[bad] = alt
        norms[bad] = np.linalg.norm(alt, axis=1)
    return u / norms[:, None]


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Struct-of-arrays mode set.

    ``form_factor`` multiplies the charge coupling only (a smooth UV cutoff
    modelling a finite charge size); it is 1 for hand-built grids.
    """

    k_vecs: np.ndarray
    weights: np.ndarray
    volume: float = 1.0
    n_max: int = 2
    polarizations: Optional[np.ndarray] = None
    form_factor: Optional[np.ndarray] = None
    polarization_axis: tuple = (0.0, 1.0, 0.0)
    scalar_polarization: bool = True
    k_bounds: Optional[tuple] = None

    def __post_init__(self):
        k = np.array(self.k_vecs, dtype=float).reshape(-1, 3)
        if k.shape[0] == 0:
            raise ValueError("ModeGrid needs at least one mode")
        omega = np.linalg.norm(k, axis=1)
        if np.any(omega <= 0):
            raise ValueError("zero modes are not allowed (omega must be > 0)")
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), omega.shape)
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if self.volume <= 0:
            raise ValueError("quantization volume must be positive")
        pol = (transverse_polarizations(k, self.polarization_axis)
               if self.polarizations is None else np.array(self.polarizations, dtype=float).reshape(-1, 3))
        ff = np.ones_like(omega) if self.form_factor is None else np.broadcast_to(
            np.asarray(self.form_factor, dtype=float), omega.shape)
        object.__setattr__(self, "k_vecs", _readonly(k))
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "polarizations", _readonly(pol))
        object.__setattr__(self, "form_factor", _readonly(ff))
        object.__setattr__(self, "_omega", _readonly(omega))

    @property
    def omega(self) -> np.ndarray:
        return self._omega

    @property
    def g(self) -> np.ndarray:
        return np.sqrt(1.0 / (2.0 * self.volume * self.omega))

    @property
    def amplitude(self) -> np.ndarray:
        """Collective coupling amplitude ``g * sqrt(V w / (2 pi)^3)``."""
        return self.g * np.sqrt(self.volume * self.weights / TWO_PI_CUBED)

    def __len__(self):
        return self.k_vecs.shape[0]

    @property
    def truncations(self) -> tuple:
        return (self.n_max,) * len(self)

    @classmethod
    def box_modes(cls, k_vecs, volume: float = 1.0, n_max: int = 2, **kwargs) -> "ModeGrid":
        """A handful of explicit box modes, one quantum oscillator each."""
        k = np.array(k_vecs, dtype=float).reshape(-1, 3)
        return cls(k, np.full(k.shape[0], TWO_PI_CUBED / volume), volume=volume, n_max=n_max, **kwargs)

    @classmethod
    def spherical(cls, k_min: float, k_max: float, radial_nodes: int, theta_nodes: int,
                  phi_nodes: Optional[int] = None, charge_cutoff: Optional[float] = None,
                  n_max: int = 4, volume: float = 1.0, polarization_axis=(0.0, 1.0, 0.0)) -> "ModeGrid":
        """Radial Gauss-Legendre x (Gauss-Legendre in cos theta) x (uniform phi) product rule.

        ``charge_cutoff`` sets the Gaussian charge form factor
        ``exp(-k^2 / (2 cutoff^2))``; the default ``k_max / 6`` leaves it at
        ``e^-18`` at the edge of the grid.
        """
        if not 0 < k_min < k_max:
            raise ValueError("need 0 < k_min < k_max")
        phi_nodes = 2 * theta_nodes if phi_nodes is None else phi_nodes
        xr, wr = roots_legendre(radial_nodes)
        k = 0.5 * (k_max - k_min) * xr + 0.5 * (k_max + k_min)
        wk = 0.5 * (k_max - k_min) * wr * k ** 2
        ct, wt = roots_legendre(theta_nodes)
        phi = 2 * np.pi * (np.arange(phi_nodes) + 0.5) / phi_nodes
        K, CT, PH = np.meshgrid(k, ct, phi, indexing="ij")
        W = wk[:, None, None] * wt[None, :, None] * (2 * np.pi / phi_nodes)
        W = np.broadcast_to(W, K.shape)
        st = np.sqrt(1.0 - CT ** 2)
        k_vecs = np.stack([K * st * np.cos(PH), K * st * np.sin(PH), K * CT], axis=-1).reshape(-1, 3)
        cutoff = k_max / 6.0 if charge_cutoff is None else charge_cutoff
        kk = K.reshape(-1)
        return cls(k_vecs, W.reshape(-1), volume=volume, n_max=n_max,
                   form_factor=np.exp(-0.5 * (kk / cutoff) ** 2),
                   polarization_axis=tuple(polarization_axis), k_bounds=(float(k_min), float(k_max)))

    def k_range(self) -> tuple:
        """Nominal ``(k_min, k_max)`` of a quadrature grid, else the extreme node values."""
        if self.k_bounds is not None:
            return self.k_bounds
        return float(self.omega.min()), float(self.omega.max())
