"""Physical configuration: charge, solenoid, geometry and path, in natural units.

Natural units are hbar = c = eps0 = mu0 = 1 with a user-chosen length unit.
Conversion from SI happens once, in :func:`to_natural` (used by the CLI when a
config key carries a unit suffix).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

ELEMENTARY_CHARGE = math.sqrt(4 * math.pi / 137.035999084)  # |e| with eps0 = hbar = c = 1

MAX_SPEED = 0.01
WARN_SPEED = 0.001
DIPOLE_DENSITY_RTOL = 0.01


class ConfigError(ValueError):
    """Invalid physical configuration."""


class AdiabaticityWarning(UserWarning):
    """Charge speed is allowed but no longer deep in the v << c regime."""


def _vec(x) -> np.ndarray:
    v = np.array(x, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise ConfigError(f"expected a 3-vector, got {x!r}")
    v.setflags(write=False)
    return v


def check_speed(v: float, what: str = "charge speed") -> None:
    if v > MAX_SPEED:
        raise ConfigError(f"{what} {v:.3g} exceeds the adiabatic limit {MAX_SPEED} (units of c)")
    if v > WARN_SPEED:
        warnings.warn(f"{what} {v:.3g} is above {WARN_SPEED} c", AdiabaticityWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class CurrentElement:
    """A piece of the solenoid current: ``j_vec * volume_weight`` is its moment.

    ``extent`` is the segment vector for straight wire pieces (None for a
    point element); it lets the field and Fourier kernels integrate the
    segment exactly instead of lumping it at ``position``.
    """

    position: np.ndarray
    j_vec: np.ndarray
    volume_weight: float
    extent: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))
        object.__setattr__(self, "j_vec", _vec(self.j_vec))
        if self.extent is not None:
            object.__setattr__(self, "extent", _vec(self.extent))

    @property
    def moment(self) -> np.ndarray:
        return self.j_vec * self.volume_weight


@dataclass(frozen=True)
class SolenoidSpec:
    """Stack of circular loops, each a regular polygon of straight segments.

    The polygon circumradius is enlarged so the polygon encloses exactly
    ``pi * radius**2``; loops sit at the centres of ``loops`` equal slabs of
    ``[-half_height, half_height]``.
    """

    radius: float = 0.25
    loops: int = 161
    elements_per_loop: int = 24
    half_height: float = 20.0

    def __post_init__(self):
        if self.radius <= 0 or self.half_height <= 0:
            raise ConfigError("solenoid radius and half_height must be positive")
        if self.loops < 1 or self.elements_per_loop < 3:
            raise ConfigError("solenoid needs >= 1 loop and >= 3 elements per loop")

    @property
    def cross_section(self) -> float:
        return math.pi * self.radius ** 2

    @property
    def length(self) -> float:
        return 2.0 * self.half_height

    def elements(self, B0: float, center=(0.0, 0.0, 0.0)) -> tuple:
        center = np.asarray(center, dtype=float)
        n = self.elements_per_loop
        circum = self.radius * math.sqrt(math.pi / (0.5 * n * math.sin(2 * math.pi / n)))
        spacing = self.length / self.loops
        current = B0 * spacing  # surface current B0/mu0 spread over the slab
        angles = 2 * np.pi * np.arange(n + 1) / n
        ring = np.stack([circum * np.cos(angles), circum * np.sin(angles), np.zeros(n + 1)], axis=1)
        out = []
        for i in range(self.loops):
            z = -self.half_height + (i + 0.5) * spacing
            pts = ring + center + np.array([0.0, 0.0, z])
            for a, b in zip(pts[:-1], pts[1:]):
                dl = b - a
                length = float(np.linalg.norm(dl))
                out.append(CurrentElement(0.5 * (a + b), current * dl / length, length, extent=dl))
        return tuple(out)


@dataclass(frozen=True)
class PathSpec:
    kind: str = "circular"  # circular | point_pair | polyline
    rho: float = 1.0
    t_loop: float = 4000.0
    sample_count: int = 129
    points: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("circular", "point_pair", "polyline"):
            raise ConfigError(f"unknown path kind {self.kind!r}")
        if self.rho <= 0 or self.t_loop <= 0:
            raise ConfigError("path radius and traversal time must be positive")
        if self.kind == "circular":
            check_speed(self.v, "path speed pi*rho/t_loop")

    @property
    def v(self) -> float:
        return math.pi * self.rho / self.t_loop


@dataclass(frozen=True, eq=False)
class PhysicalConfig:
    """Charge + solenoid + geometry.  ``p_vec`` is the momentum on the right branch.

    ``p_vec_L`` (defaults to ``p_vec``) is the physical momentum on the left
    branch.  Solenoid current elements must reproduce the dipole line density
    ``B0 * S_cross`` within 1 %.
    """

    q: float = ELEMENTARY_CHARGE
    m: float = 1.0
    p_vec: np.ndarray = field(default_factory=lambda: np.array([0.0, 7.85e-4, 0.0]))
    E_C: float = 0.3
    E_S: float = 0.2
    r_L: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    r_R: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    r_s: np.ndarray = field(default_factory=lambda: np.zeros(3))
    current_elements: tuple = ()
    B0: float = 0.0
    S_cross: float = math.pi * 0.25 ** 2
    solenoid_length: float = 40.0
    path: PathSpec = field(default_factory=PathSpec)
    p_vec_L: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("p_vec", "r_L", "r_R", "r_s"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        if self.p_vec_L is not None:
            object.__setattr__(self, "p_vec_L", _vec(self.p_vec_L))
        object.__setattr__(self, "current_elements", tuple(self.current_elements))
        if self.m <= 0:
            raise ConfigError("mass must be positive")
        if self.S_cross <= 0:
            raise ConfigError("solenoid cross-section must be positive")
        if np.allclose(self.r_L, self.r_R, rtol=0, atol=1e-12):
            raise ConfigError("r_L and r_R coincide")
        for v in (self.v_vec, self.v_vec_L):
            check_speed(float(np.linalg.norm(v)))
        scale = max(float(np.linalg.norm(self.r_R - self.r_L)), 1e-300)
        margin = 1e-6 * scale
        for name in ("r_L", "r_R"):
            r = getattr(self, name)
            for el in self.current_elements:
                if np.linalg.norm(r - el.position) <= margin:
                    raise ConfigError(f"{name} coincides with a current element at {el.position}")
        if self.current_elements:
            density = self.dipole_line_density()
            target = self.B0 * self.S_cross
            if abs(density - target) > DIPOLE_DENSITY_RTOL * abs(target) + 1e-300:
                raise ConfigError(
                    f"current elements give dipole line density {density:.6g}, "
                    f"expected B0*S_cross = {target:.6g}")

    @property
    def p_L(self) -> np.ndarray:
        return self.p_vec if self.p_vec_L is None else self.p_vec_L

    @property
    def v_vec(self) -> np.ndarray:
        return self.p_vec / self.m

    @property
    def v_vec_L(self) -> np.ndarray:
        return self.p_L / self.m

    @property
    def flux(self) -> float:
        return self.B0 * self.S_cross

    def branch(self, s_c: int):
        """``(position, physical momentum)`` of the branch with q_z^(C) = s_c."""
        if s_c == 1:
            return self.r_R, self.p_vec
        if s_c == -1:
            return self.r_L, self.p_L
        raise ValueError(f"s_c must be +1 or -1, got {s_c!r}")

    def dipole_line_density(self) -> float:
        m = np.zeros(3)
        for el in self.current_elements:
            m += 0.5 * np.cross(el.position - self.r_s, el.moment)
        return float(m[2]) / self.solenoid_length

    def replace(self, **changes) -> "PhysicalConfig":
        return replace(self, **changes)


def make_config(*, B0: float = 5.0, solenoid: Optional[SolenoidSpec] = SolenoidSpec(),
                r_s=(0.0, 0.0, 0.0), **kwargs) -> PhysicalConfig:
    """Build a :class:`PhysicalConfig` whose current elements come from ``solenoid``.

    Passing ``solenoid=None`` gives an ideal-only configuration (no elements),
    usable by the closed-form field paths but with zero quantum coupling.
    """
    if solenoid is None:
        return PhysicalConfig(B0=B0, r_s=r_s, **kwargs)
    return PhysicalConfig(
        B0=B0, r_s=r_s,
        current_elements=solenoid.elements(B0, center=r_s),
        S_cross=solenoid.cross_section,
        solenoid_length=solenoid.length,
        **kwargs,
    )


# --------------------------------------------------------------------------- #
# units
# --------------------------------------------------------------------------- #

HBAR = 1.054571817e-34
C_LIGHT = 299792458.0
EPS0 = 8.8541878128e-12
E_CHARGE = 1.602176634e-19
M_ELECTRON = 9.1093837015e-31

# suffix -> (dimension, SI multiplier)
UNIT_SUFFIXES = {
    "m": ("length", 1.0), "mm": ("length", 1e-3), "um": ("length", 1e-6), "nm": ("length", 1e-9),
    "s": ("time", 1.0), "ns": ("time", 1e-9), "ps": ("time", 1e-12), "fs": ("time", 1e-15),
    "J": ("energy", 1.0), "eV": ("energy", E_CHARGE), "meV": ("energy", 1e-3 * E_CHARGE),
    "C": ("charge", 1.0), "e": ("charge", E_CHARGE),
    "kg": ("mass", 1.0), "me": ("mass", M_ELECTRON),
    "T": ("field", 1.0), "mT": ("field", 1e-3), "G": ("field", 1e-4),
    "m2": ("area", 1.0), "um2": ("area", 1e-12), "nm2": ("area", 1e-18),
    "mps": ("velocity", 1.0), "c": ("velocity", C_LIGHT),
    "kgmps": ("momentum", 1.0),
    "nat": ("natural", 1.0),
}


def to_natural(value, suffix: str, length_scale_m: float = 1e-6):
    """Convert an SI-suffixed quantity to natural units with length unit ``length_scale_m``."""
    if suffix not in UNIT_SUFFIXES:
        raise ConfigError(f"unknown unit suffix {suffix!r}")
    dim, mult = UNIT_SUFFIXES[suffix]
    L0 = length_scale_m
    si = np.asarray(value, dtype=float) * mult
    factor = {
        "natural": 1.0,
        "length": 1.0 / L0,
        "time": C_LIGHT / L0,
        "energy": L0 / (HBAR * C_LIGHT),
        "charge": 1.0 / math.sqrt(EPS0 * HBAR * C_LIGHT),
        "mass": C_LIGHT * L0 / HBAR,
        "field": L0 ** 2 * math.sqrt(EPS0 * C_LIGHT / HBAR),
        "area": 1.0 / L0 ** 2,
        "velocity": 1.0 / C_LIGHT,
        "momentum": L0 / HBAR,
    }[dim]
    out = si * factor
    return float(out) if out.ndim == 0 else out.tolist()
