"""Classical reference layer: solenoid potentials and fields, the charge-solenoid
interaction energy, the k-space kernel check and the circular path sweep.

Sign convention for phases: ``phi(r_c) = E(r_c) = q v . A(r_c)`` (hbar = 1), and
the phase difference between branches is ``phi(r_R) - phi(r_L)``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.special import roots_legendre

from .config import ConfigError, PhysicalConfig, check_speed
from .modes import ModeGrid

PATH_CSV_COLUMNS = ("arc_parameter", "x", "y", "phi_rate_L", "phi_rate_R",
                    "delta_phi_rate", "cumulative_phase")
KERNEL_COVERAGE = 50.0


class CoverageError(ValueError):
    """The mode grid does not reach far enough into k-space."""


@dataclass(frozen=True, eq=False)
class FieldPoint:
    position: np.ndarray
    A_vec: np.ndarray
    B_vec: np.ndarray
    E_vec: np.ndarray


@dataclass(frozen=True)
class PathSample:
    position: tuple
    velocity: tuple
    phi_rate: float
    delta_phi_rate: float
    cumulative_phase: float
    arc_parameter: float = 0.0
    phi_rate_L: float = 0.0


@dataclass(frozen=True)
class PathSweepResult:
    samples: tuple
    total_phase: float
    quadrature_error: float
    speed: float

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PATH_CSV_COLUMNS)
        for s in self.samples:
            w.writerow([repr(float(v)) for v in (s.arc_parameter, s.position[0], s.position[1],
                                                  s.phi_rate_L, s.phi_rate, s.delta_phi_rate,
                                                  s.cumulative_phase)])
        return buf.getvalue()


@dataclass(frozen=True)
class KernelCheck:
    lhs: float
    rhs: float
    ratio: float
    transverse_value: float
    normalization: float


# --------------------------------------------------------------------------- #
# solenoid potentials and fields
# --------------------------------------------------------------------------- #

def _element_arrays(cfg: PhysicalConfig):
    els = cfg.current_elements
    pos = np.array([e.position for e in els]).reshape(-1, 3)
    mom = np.array([e.moment for e in els]).reshape(-1, 3)
    ext = np.array([np.zeros(3) if e.extent is None else e.extent for e in els]).reshape(-1, 3)
    return pos, mom, ext


def _check_clearance(cfg: PhysicalConfig, x: np.ndarray):
    if not cfg.current_elements:
        return
    pos, _, ext = _element_arrays(cfg)
    eps = 1e-6 * cfg.path.rho
    d = np.linalg.norm(x - pos, axis=1) - 0.5 * np.linalg.norm(ext, axis=1)
    # cheap screen, then exact distance to the segments that are close
    for i in np.flatnonzero(d <= eps):
        a = pos[i] - 0.5 * ext[i]
        L2 = float(ext[i] @ ext[i])
        s = 0.0 if L2 == 0 else np.clip((x - a) @ ext[i] / L2, 0.0, 1.0)
        if np.linalg.norm(x - (a + s * ext[i])) <= eps:
            raise ConfigError(f"point {x} is within {eps:.3g} of a current element")


def ideal_vector_potential(cfg: PhysicalConfig, x) -> np.ndarray:
    """Infinite ideal solenoid along z through ``r_s``: azimuthal ``Phi / (2 pi rho)``."""
    x = np.asarray(x, dtype=float)
    rel = x - cfg.r_s
    rho2 = rel[0] ** 2 + rel[1] ** 2
    if rho2 == 0.0:
        return np.zeros(3)
    a2 = cfg.S_cross / math.pi
    scale = cfg.flux / (2 * math.pi * rho2) if rho2 >= a2 else 0.5 * cfg.B0
    return scale * np.array([-rel[1], rel[0], 0.0])


def ideal_magnetic_field(cfg: PhysicalConfig, x) -> np.ndarray:
    rel = np.asarray(x, dtype=float) - cfg.r_s
    inside = rel[0] ** 2 + rel[1] ** 2 < cfg.S_cross / math.pi
    return np.array([0.0, 0.0, cfg.B0 if inside else 0.0])


def solenoid_vector_potential(cfg: PhysicalConfig, x, ideal: bool = False) -> np.ndarray:
    """Coulomb-gauge ``A(x) = (1/4 pi) sum_e I_e int dl / |x - l|`` over the elements.

    Straight segments are integrated exactly; ``ideal=True`` uses the
    infinite-solenoid closed form instead.
    """
    x = np.asarray(x, dtype=float)
    if ideal:
        return ideal_vector_potential(cfg, x)
    if not cfg.current_elements:
        return np.zeros(3)
    _check_clearance(cfg, x)
    pos, mom, ext = _element_arrays(cfg)
    L = np.linalg.norm(ext, axis=1)
    seg = L > 0
    out = np.zeros(3)
    if np.any(seg):
        r1 = np.linalg.norm(x - (pos[seg] - 0.5 * ext[seg]), axis=1)
        r2 = np.linalg.norm(x - (pos[seg] + 0.5 * ext[seg]), axis=1)
        Ls = L[seg]
        factor = np.log((r1 + r2 + Ls) / (r1 + r2 - Ls)) / Ls
        out += (mom[seg] * factor[:, None]).sum(axis=0)
    if np.any(~seg):
        d = np.linalg.norm(x - pos[~seg], axis=1)
        out += (mom[~seg] / d[:, None]).sum(axis=0)
    return out / (4 * math.pi)


def solenoid_magnetic_field(cfg: PhysicalConfig, x, ideal: bool = False) -> np.ndarray:
    """Biot-Savart field of the current elements (exact for straight segments)."""
    x = np.asarray(x, dtype=float)
    if ideal:
        return ideal_magnetic_field(cfg, x)
    if not cfg.current_elements:
        return np.zeros(3)
    _check_clearance(cfg, x)
    pos, mom, ext = _element_arrays(cfg)
    L = np.linalg.norm(ext, axis=1)
    seg = L > 0
    out = np.zeros(3)
    if np.any(seg):
        dl = ext[seg]
        current = np.linalg.norm(mom[seg], axis=1) / L[seg] * np.sign(np.einsum("ij,ij->i", mom[seg], dl))
        u1 = x - (pos[seg] - 0.5 * dl)
        u2 = x - (pos[seg] + 0.5 * dl)
        cr = np.cross(dl, u1)
        cr2 = np.einsum("ij,ij->i", cr, cr)
        geo = (np.einsum("ij,ij->i", dl, u1) / np.linalg.norm(u1, axis=1)
               - np.einsum("ij,ij->i", dl, u2) / np.linalg.norm(u2, axis=1))
        out += ((current * geo / cr2)[:, None] * cr).sum(axis=0)
    if np.any(~seg):
        rel = x - pos[~seg]
        d = np.linalg.norm(rel, axis=1)
        out += (np.cross(mom[~seg], rel) / d[:, None] ** 3).sum(axis=0)
    return out / (4 * math.pi)


def field_point(cfg: PhysicalConfig, x, ideal: bool = False) -> FieldPoint:
    """Solenoid potential and fields at ``x``; a stationary current has no E field."""
    x = np.asarray(x, dtype=float)
    return FieldPoint(x, solenoid_vector_potential(cfg, x, ideal), solenoid_magnetic_field(cfg, x, ideal),
                      np.zeros(3))


# --------------------------------------------------------------------------- #
# interaction energy
# --------------------------------------------------------------------------- #

def interaction_energy(cfg: PhysicalConfig, r_c, v_vec, ideal: bool = False) -> float:
    """Low-velocity charge-solenoid interaction energy ``q v . A(r_c)``."""
    v_vec = np.asarray(v_vec, dtype=float)
    check_speed(float(np.linalg.norm(v_vec)))
    return float(cfg.q * (v_vec @ solenoid_vector_potential(cfg, r_c, ideal)))


def boyer_energy(q: float, v: float, B0: float, S: float, x: float, y: float) -> float:
    """Closed form ``q v B0 S x / (2 pi (x^2 + y^2))`` for velocity along +y."""
    return q * v * B0 * S * x / (2 * math.pi * (x * x + y * y))


def field_overlap_energy(cfg: PhysicalConfig, r_c, v_vec, radial_nodes: int = 24,
                         angular_nodes: int = 64, axial_nodes: int = 200) -> dict:
    """Cross term of the field energy, ``int (B_s . B_c + E_s . E_c) d^3r``.

    Uses the ideal solenoid (uniform ``B0`` inside, nothing outside, no E
    field) and the slow-charge fields ``B_c = q v x R / (4 pi R^3)``,
    ``E_c = q R / (4 pi R^3)``.  The integration region is the solenoid
    interior: Gauss-Legendre in radius, uniform in angle, and Gauss-Legendre
    in ``u`` with ``z = d tan(u)`` so the infinite axis is covered.
    """
    r_c = np.asarray(r_c, dtype=float)
    v_vec = np.asarray(v_vec, dtype=float)
    a = math.sqrt(cfg.S_cross / math.pi)
    d = max(math.hypot(*(r_c - cfg.r_s)[:2]), a)
    xr, wr = roots_legendre(radial_nodes)
    rr = 0.5 * a * (xr + 1)
    w_r = 0.5 * a * wr * rr
    th = 2 * math.pi * np.arange(angular_nodes) / angular_nodes
    w_th = 2 * math.pi / angular_nodes
    xu, wu = roots_legendre(axial_nodes)
    u = 0.5 * math.pi * xu
    z = d * np.tan(u)
    w_z = 0.5 * math.pi * wu * d / np.cos(u) ** 2
    R_, T_, Z_ = np.meshgrid(rr, th, z, indexing="ij")
    W = w_r[:, None, None] * w_th * w_z[None, None, :]
    pts = np.stack([cfg.r_s[0] + R_ * np.cos(T_), cfg.r_s[1] + R_ * np.sin(T_), cfg.r_s[2] + Z_], axis=-1)
    rel = pts - r_c
    dist3 = np.linalg.norm(rel, axis=-1) ** 3
    Bc_z = cfg.q * (v_vec[0] * rel[..., 1] - v_vec[1] * rel[..., 0]) / (4 * math.pi * dist3)
    magnetic = float(np.sum(W * cfg.B0 * Bc_z))
    E_s = np.zeros(3)  # stationary current
    Ec = cfg.q * rel / (4 * math.pi * dist3[..., None])
    electric = float(np.sum(W * (Ec @ E_s)))
    if electric != 0.0:
        warnings.warn(f"nonzero electric overlap {electric:.3e} for a stationary solenoid")
    return {"magnetic": magnetic, "electric": electric, "total": magnetic + electric}


def analytic_phase_difference(cfg: PhysicalConfig, r_L, r_R, v_vec, v_vec_L=None,
                              ideal: bool = False) -> float:
    """``phi(r_R) - phi(r_L)`` with ``phi = q v . A``; ``v_vec_L`` defaults to ``v_vec``."""
    v_vec_L = v_vec if v_vec_L is None else v_vec_L
    return (interaction_energy(cfg, r_R, v_vec, ideal)
            - interaction_energy(cfg, r_L, v_vec_L, ideal))


# --------------------------------------------------------------------------- #
# k-space kernel identity
# --------------------------------------------------------------------------- #

def kernel_identity_check(grid: ModeGrid, p_vec, j_vec, delta_r, q: float = 1.0,
                          m: float = 1.0) -> KernelCheck:
    """Compare the mode sum ``sum_k 2 C_k G_k cos(k.dr) / omega_k`` with ``(q/m) p.j / |dr|``.

    ``C_k = (q/m) amp_k f_k p.u_k`` and ``G_k = amp_k j.u_k``.  For one
    transverse polarization along the projection of ``p`` the continuum value
    of the sum is ``(q/m)(p.j + (p.rhat)(j.rhat)) / (8 pi |dr|)``; the ratio to
    that value is returned as ``normalization``.
    """
    p_vec, j_vec, delta_r = (np.asarray(v, dtype=float) for v in (p_vec, j_vec, delta_r))
    r = float(np.linalg.norm(delta_r))
    if r <= 0:
        raise ValueError("|delta_r| must be positive")
    _, k_max = grid.k_range()
    if k_max * r < KERNEL_COVERAGE:
        raise CoverageError(f"k_max * |delta_r| = {k_max * r:.3g} < {KERNEL_COVERAGE}; "
                            f"need k_max >= {KERNEL_COVERAGE / r:.6g}")
    u = grid.polarizations
    C = (q / m) * grid.amplitude * grid.form_factor * (u @ p_vec)
    G = grid.amplitude * (u @ j_vec)
    lhs = float(np.sum(2.0 * C * G * np.cos(grid.k_vecs @ delta_r) / grid.omega))
    rhs = (q / m) * float(p_vec @ j_vec) / r
    rhat = delta_r / r
    transverse = (q / m) * (float(p_vec @ j_vec) + float(p_vec @ rhat) * float(j_vec @ rhat)) / (8 * math.pi * r)
    ratio = lhs / rhs if rhs != 0 else float("nan")
    norm = lhs / transverse if transverse != 0 else float("nan")
    return KernelCheck(lhs, rhs, ratio, transverse, norm)


# --------------------------------------------------------------------------- #
# path sweep
# --------------------------------------------------------------------------- #

def path_sweep(cfg: PhysicalConfig, ideal: bool = True, orientation: float = 0.0,
               rel_tol: float = 1e-6) -> PathSweepResult:
    """Integrate the pointwise phase-difference rate along the two semicircles.

    The right branch runs counter-clockwise from angle -pi/2 to pi/2, the left
    branch is its mirror image; both start at the bottom and end at the top.
    ``orientation`` rotates the whole picture about the solenoid axis.
    """
    path = cfg.path
    if path.kind != "circular":
        raise ConfigError("path_sweep supports circular paths only")
    n = path.sample_count
    if n < 64:
        raise ConfigError(f"sample_count {n} < 64")
    v = path.v
    check_speed(v, "path speed")
    s = np.linspace(0.0, 1.0, n)
    t = s * path.t_loop
    ang = -0.5 * math.pi + math.pi * s
    c, sn = math.cos(orientation), math.sin(orientation)
    rot = np.array([[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]])
    rho = path.rho
    posR = np.stack([rho * np.cos(ang), rho * np.sin(ang), np.zeros(n)], axis=1) @ rot.T + cfg.r_s
    posL = np.stack([-rho * np.cos(ang), rho * np.sin(ang), np.zeros(n)], axis=1) @ rot.T + cfg.r_s
    velR = np.stack([-v * np.sin(ang), v * np.cos(ang), np.zeros(n)], axis=1) @ rot.T
    velL = np.stack([v * np.sin(ang), v * np.cos(ang), np.zeros(n)], axis=1) @ rot.T
    rateR = np.array([interaction_energy(cfg, x, w, ideal) for x, w in zip(posR, velR)])
    rateL = np.array([interaction_energy(cfg, x, w, ideal) for x, w in zip(posL, velL)])
    delta = rateR - rateL
    total = float(simpson(delta, x=t))
    idx = np.arange(0, n, 2) if n % 2 == 1 else np.r_[np.arange(0, n - 1, 2), n - 1]
    coarse = float(simpson(delta[idx], x=t[idx]))
    err = abs(total - coarse)
    if err > rel_tol * abs(total) + 1e-300 and err > 1e-15:
        raise ConfigError(f"path sampling too coarse: Simpson error estimate {err:.3e} "
                          f"exceeds {rel_tol:g} of the total {total:.6g}")
    cumulative = np.concatenate([[0.0], cumulative_simpson(delta, x=t)])
    samples = tuple(
        PathSample(tuple(map(float, posR[i])), tuple(map(float, velR[i])), float(rateR[i]),
                   float(delta[i]), float(cumulative[i]), float(s[i]), float(rateL[i]))
        for i in range(n))
    return PathSweepResult(samples, total, err, v)
