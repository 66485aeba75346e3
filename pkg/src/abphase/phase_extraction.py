"""Phases from state-vector simulation: vacuum amplitudes, secular-rate fits,
the branch phase difference and the Heisenberg picture of the charge qubit.

Two engines produce sector rates.  ``"dense"`` evolves the vacuum of each
sector under the full Hamiltonian and fits the unwrapped phase of the
vacuum-to-vacuum amplitude.  ``"spectral"`` is used for grids far beyond any
dense budget: within a sector the modes are uncoupled, so the secular rate is
the constant energy plus the sum of the truncated single-mode ground-state
energies, each solved to machine precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import ab_model
from .ab_model import (COEFFICIENT_RATIO, DEFAULT_DIM_BUDGET, build_hamiltonian,
                       charge_operator, cross_term, hilbert_space, quantum_phase_difference,
                       reference_state, sector_decompose, sector_state, solenoid_coupling)
from .analytic_em import analytic_phase_difference
from .config import PhysicalConfig
from .modes import ModeGrid
from .quantum_core import (BosonMode, HilbertSpec, NORM_TOL, OperatorMatrix, StateVector,
                           _check_same_space, annihilator, propagator)

MAX_FIT_RESIDUAL = 1e-4
ACCEPT_FIT_RESIDUAL = 1e-6
MAX_LEAKAGE = 1e-8
MIN_MODULUS = 0.1
MIN_FIT_SAMPLES = 16
WEIGHT_TOL = 1e-12
SECTORS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class RegimeError(ValueError):
    """The simulation left the regime in which its phase is meaningful."""


class NyquistError(RegimeError):
    """Time samples too sparse to unwrap the phase unambiguously."""


@dataclass(frozen=True)
class SecularFit:
    rate: float
    residual: float
    intercept: float = 0.0
    n_samples: int = 0


@dataclass(frozen=True)
class PhaseReport:
    """Outcome of :func:`extract_phase_difference`.

    ``delta_phi`` is ``rate(+1 at r_R) - rate(-1 at r_L) - 2 E_C`` (solenoid
    present).  ``acquired_phase = -delta_phi * tau`` is the relative phase the
    right branch gains over the left one in the state, which is the quantity
    to compare with the classical ``analytic_delta_phi``.
    """

    sector_rates: dict
    delta_phi: float
    delta_phi_raw: float
    analytic_delta_phi: float
    coefficient_ratio: float
    truncation_leakage: float
    ir_sensitivity: float
    fit_residual: float
    closed_form_delta_phi: float = float("nan")
    acquired_phase: float = float("nan")
    tau: float = 1.0
    method: str = "dense"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sector_rates"] = {f"{sc:+d},{ss:+d}": v for (sc, ss), v in self.sector_rates.items()}
        return d


@dataclass(frozen=True)
class HeisenbergResult:
    op: OperatorMatrix
    expectation: float


@dataclass(frozen=True)
class VisibilityFit:
    visibility: float
    chi: float
    phase_rate: float
    residual: float
    times: np.ndarray = field(repr=False)
    qx: np.ndarray = field(repr=False)
    qy: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class HeisenbergDecomposition:
    theta: dict
    alpha_op: OperatorMatrix
    beta_op: OperatorMatrix

    def identity_error(self) -> float:
        a, b = self.alpha_op.toarray(), self.beta_op.toarray()
        return float(np.max(np.abs(a @ a + b @ b - np.eye(a.shape[0]))))


# --------------------------------------------------------------------------- #
# amplitudes and fits
# --------------------------------------------------------------------------- #

def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise ValueError("need at least one time")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing and start at t >= 0")
    return t


def _components(H: OperatorMatrix, initial: StateVector, target: StateVector):
    """Energies, overlap coefficients and weights of the eigencomponents involved."""
    E, coef, weight = [], [], []
    for idx, evals, evecs in H.spectral_blocks:
        a, b = initial.amplitudes[idx], target.amplitudes[idx]
        if not (np.any(a) or np.any(b)):
            continue
        ci = evecs.conj().T @ a
        ct = evecs.conj().T @ b
        E.append(evals)
        coef.append(np.conj(ct) * ci)
        weight.append(np.maximum(np.abs(ci) ** 2, np.abs(ct) ** 2))
    if not E:
        return np.zeros(0), np.zeros(0, complex), np.zeros(0)
    return np.concatenate(E), np.concatenate(coef), np.concatenate(weight)


def rate_bound(H: OperatorMatrix, state: StateVector, weight_tol: float = WEIGHT_TOL) -> float:
    """Largest |energy| among eigencomponents of ``state`` with weight above ``weight_tol``."""
    E, _, w = _components(H, state, state)
    sig = w > weight_tol
    return float(np.max(np.abs(E[sig]))) if np.any(sig) else 0.0


def nyquist_spacing(rate: float) -> float:
    """Largest spacing keeping the phase step per sample below pi/2."""
    return math.inf if rate == 0 else 0.5 * math.pi / rate


def vacuum_amplitude_series(H: OperatorMatrix, initial: StateVector, target: StateVector,
                            times, weight_tol: float = WEIGHT_TOL, chunk: int = 512) -> np.ndarray:
    """``<target| exp(-i H t) |initial>`` at each of ``times``.

    Raises :class:`NyquistError` when the largest sample spacing would let the
    phase advance by pi/2 or more between samples for some significant
    eigencomponent.
    """
    _check_same_space(H, initial)
    _check_same_space(H, target)
    t = _check_times(times)
    E, coef, w = _components(H, initial, target)
    sig = w > weight_tol
    bound = float(np.max(np.abs(E[sig]))) if np.any(sig) else 0.0
    if t.size > 1:
        dt = float(np.max(np.diff(t)))
        if dt * bound >= 0.5 * math.pi:
            raise NyquistError(f"sample spacing {dt:.4g} too coarse for phase rate bound {bound:.4g}; "
                               f"use spacing below {nyquist_spacing(bound):.4g}")
    out = np.empty(t.size, dtype=complex)
    for lo in range(0, t.size, chunk):
        out[lo:lo + chunk] = np.exp(-1j * np.outer(t[lo:lo + chunk], E)) @ coef
    return out


def fit_secular_rate(series, times, transient_cut: Optional[float] = None,
                     omega_min: Optional[float] = None,
                     max_residual: float = MAX_FIT_RESIDUAL) -> SecularFit:
    """Least-squares fit of ``unwrap(arg series) = -rate t + c`` over ``t > transient_cut``.

    ``transient_cut`` defaults to ``10 / omega_min`` when ``omega_min`` is
    given, else 0.  The residual is the RMS deviation of the unwrapped phase.
    """
    z = np.asarray(series, dtype=complex).reshape(-1)
    t = _check_times(times)
    if z.shape != t.shape:
        raise ValueError("series and times differ in length")
    if transient_cut is None:
        transient_cut = 10.0 / omega_min if omega_min else 0.0
    keep = t > transient_cut if transient_cut > 0 else np.ones(t.size, bool)
    if np.count_nonzero(keep) < MIN_FIT_SAMPLES:
        raise RegimeError(f"only {np.count_nonzero(keep)} samples beyond t = {transient_cut:g}; "
                          f"need at least {MIN_FIT_SAMPLES}")
    zk, tk = z[keep], t[keep]
    mod = np.abs(zk)
    if np.min(mod) <= MIN_MODULUS:
        raise RegimeError(f"amplitude modulus fell to {np.min(mod):.3g} (<= {MIN_MODULUS}); "
                          "coupling too strong for a secular phase")
    phase = np.unwrap(np.angle(zk))
    # centre t for a well-conditioned fit
    t0 = tk.mean()
    slope, c = np.polyfit(tk - t0, phase, 1)
    resid = phase - (slope * (tk - t0) + c)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    if rms > max_residual:
        raise RegimeError(f"secular fit residual {rms:.3g} exceeds {max_residual:g}")
    return SecularFit(float(-slope), rms, float(c - slope * t0), int(tk.size))


def _leakage_mask(grid: ModeGrid) -> np.ndarray:
    space = hilbert_space(grid)
    idx = np.arange(space.total_dim)
    local = np.array(np.unravel_index(idx, space.dims))
    top = np.zeros(space.total_dim, bool)
    for i, n in enumerate(grid.truncations):
        top |= local[i + 1] == n
    return top


def _evolved_states(H: OperatorMatrix, psi: StateVector, times) -> np.ndarray:
    """Rows are ``exp(-i H t) psi`` for each t."""
    t = np.asarray(times, dtype=float)
    out = np.zeros((t.size, psi.space.total_dim), dtype=complex)
    for idx, evals, evecs in H.spectral_blocks:
        a = psi.amplitudes[idx]
        if not np.any(a):
            continue
        c = evecs.conj().T @ a
        out[:, idx] = (np.exp(-1j * np.outer(t, evals)) * c) @ evecs.T
    return out


def _ir_sensitivity(cfg: PhysicalConfig, grid: ModeGrid) -> float:
    """Share of the closed-form phase difference carried by modes with omega < 2 omega_min."""
    G = solenoid_coupling(cfg, grid)
    low = grid.omega < 2.0 * grid.omega.min()

    def part(mask):
        total = 0.0
        for s_c in (1, -1):
            r_b, p_b = cfg.branch(s_c)
            C = ab_model.charge_coupling(cfg, grid, p_b) * np.exp(1j * (grid.k_vecs @ r_b))
            total += -s_c * 2.0 * np.sum((np.real(C * np.conj(G)) / grid.omega)[mask])
        return total

    full = part(np.ones(len(grid), bool))
    return float(abs(part(low)) / abs(full)) if full != 0 else 0.0


def _analytic(cfg: PhysicalConfig) -> float:
    ideal = not cfg.current_elements
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return analytic_phase_difference(cfg, cfg.r_L, cfg.r_R, cfg.v_vec, cfg.v_vec_L, ideal=ideal)


# --------------------------------------------------------------------------- #
# phase difference
# --------------------------------------------------------------------------- #

def _dense_rates(cfg, grid, dim_budget, t_window, samples_per_step):
    H = build_hamiltonian(cfg, grid, "superposed", dim_budget)
    w_min = float(grid.omega.min())
    cut = 10.0 / w_min
    t_end = cut + t_window / w_min
    mask = _leakage_mask(grid)
    probe = np.concatenate([np.pi / grid.omega, np.linspace(0.0, min(t_end, 200.0 / w_min), 65)])
    probe = np.unique(probe)
    rates, residual, leakage = {}, 0.0, 0.0
    for s_c, s_s in SECTORS:
        psi = sector_state(grid, s_c, s_s)
        bound = max(rate_bound(H, psi), 1e-12)
        dt = nyquist_spacing(bound) / samples_per_step
        n = max(int(math.ceil(t_end / dt)) + 1, 4 * MIN_FIT_SAMPLES)
        times = np.linspace(0.0, t_end, n)
        try:
            series = vacuum_amplitude_series(H, psi, psi, times)
            fit = fit_secular_rate(series, times, transient_cut=cut)
        except RegimeError as exc:
            raise RegimeError(f"sector (s_c={s_c:+d}, s_s={s_s:+d}): {exc}") from exc
        rates[(s_c, s_s)] = fit.rate
        residual = max(residual, fit.residual)
        states = _evolved_states(H, psi, probe)
        leakage = max(leakage, float(np.max(np.sum(np.abs(states[:, mask]) ** 2, axis=1))))
    return rates, residual, leakage


def _single_mode_ground(lam2: np.ndarray, omega: np.ndarray, n_max: int) -> np.ndarray:
    """Ground energy of ``omega a^dag a + lambda a + conj(lambda) a^dag`` truncated at ``n_max``.

    Continued-fraction fixed point ``E = -|lambda|^2 / D_1(E)`` with
    ``D_n = n omega - E - (n+1)|lambda|^2 / D_{n+1}``; accurate to relative
    machine precision for small couplings, where an eigensolver would only be
    accurate relative to ``n_max * omega``.
    """
    E = -lam2 / omega
    for _ in range(200):
        D = n_max * omega - E
        for n in range(n_max - 1, 0, -1):
            D = n * omega - E - (n + 1) * lam2 / D
        new = -lam2 / D
        if np.all(np.abs(new - E) <= 1e-15 * np.abs(new) + 1e-300):
            return new
        E = new
    raise RegimeError("single-mode ground energy did not converge; coupling too strong")


def _spectral_rates(cfg, grid, chunk=65536):
    n_max = grid.n_max
    d = n_max + 1
    sq = np.sqrt(np.arange(1, d, dtype=float))
    rates, leakage = {}, 0.0
    for sec in sector_decompose(cfg, grid):
        lam = sec.lambda_per_mode
        lam2 = np.abs(lam) ** 2
        strong = lam2 / grid.omega ** 2 > 0.05
        if np.any(strong):
            raise RegimeError(f"sector ({sec.s_c:+d}, {sec.s_s:+d}): {np.count_nonzero(strong)} modes "
                              "with mu > 0.05")
        E0 = _single_mode_ground(lam2, grid.omega, n_max)
        rates[(sec.s_c, sec.s_s)] = float(sec.const_energy + np.sum(E0))
        for lo in range(0, len(grid), chunk):
            l = lam[lo:lo + chunk]
            w = grid.omega[lo:lo + chunk]
            h = np.zeros((l.size, d, d), dtype=complex)
            h[:, np.arange(d), np.arange(d)] = w[:, None] * np.arange(d)
            h[:, np.arange(d - 1), np.arange(1, d)] = l[:, None] * sq
            h[:, np.arange(1, d), np.arange(d - 1)] = np.conj(l)[:, None] * sq
            ev, V = np.linalg.eigh(h)
            phase = np.exp(-1j * ev * (np.pi / w)[:, None])
            psi = np.einsum("mij,mj,mj->mi", V, phase, np.conj(V[:, 0, :]))
            leakage = max(leakage, float(np.max(np.abs(psi[:, -1]) ** 2)))
    return rates, 0.0, leakage


def extract_phase_difference(cfg: PhysicalConfig, grid: ModeGrid, tau: float = 1.0,
                             method: str = "auto", dim_budget: int = DEFAULT_DIM_BUDGET,
                             t_window: float = 4000.0, samples_per_step: float = 2.0) -> PhaseReport:
    """First-principles phase difference between the branches, solenoid present.

    ``method`` is ``"dense"`` (full Hamiltonian, fitted vacuum amplitudes),
    ``"spectral"`` (per-sector product of truncated single-mode problems) or
    ``"auto"`` (dense when within ``dim_budget``).  The dense fit window is
    ``[10, 10 + t_window] / omega_min``.
    """
    if method == "auto":
        method = "dense" if hilbert_space(grid).total_dim <= dim_budget else "spectral"
    if method == "dense":
        rates, residual, leakage = _dense_rates(cfg, grid, dim_budget, t_window, samples_per_step)
    elif method == "spectral":
        rates, residual, leakage = _spectral_rates(cfg, grid)
    else:
        raise ValueError(f"method must be 'dense', 'spectral' or 'auto', got {method!r}")
    if leakage >= MAX_LEAKAGE:
        raise RegimeError(f"truncation leakage {leakage:.3g} >= {MAX_LEAKAGE:g}; raise n_max")
    if residual >= ACCEPT_FIT_RESIDUAL:
        raise RegimeError(f"fit residual {residual:.3g} >= {ACCEPT_FIT_RESIDUAL:g}; couplings too strong")
    raw = rates[(1, 1)] - rates[(-1, 1)]
    delta = raw - 2.0 * cfg.E_C
    return PhaseReport(
        sector_rates=rates, delta_phi=delta, delta_phi_raw=raw,
        analytic_delta_phi=_analytic(cfg), coefficient_ratio=COEFFICIENT_RATIO,
        truncation_leakage=leakage, ir_sensitivity=_ir_sensitivity(cfg, grid),
        fit_residual=residual, closed_form_delta_phi=quantum_phase_difference(cfg, grid),
        acquired_phase=-delta * tau, tau=tau, method=method)


# --------------------------------------------------------------------------- #
# Heisenberg picture
# --------------------------------------------------------------------------- #

def heisenberg_qx(cfg: PhysicalConfig, grid: ModeGrid, t: float,
                  dim_budget: int = 2 ** 11) -> HeisenbergResult:
    """``U^dag q_x U`` by direct conjugation and its value in ``|+>_c |0>_F |1>_s``."""
    H = build_hamiltonian(cfg, grid, "superposed", dim_budget)
    U = propagator(H, t)
    unit_err = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    assert unit_err < NORM_TOL, f"propagator not unitary ({unit_err:.3e})"
    qx = charge_operator(grid, "x").toarray()
    op = OperatorMatrix(H.space, U.conj().T @ qx @ U)
    psi = reference_state(grid, "+", 1)
    val = np.vdot(psi.amplitudes, op.sparse @ psi.amplitudes)
    return HeisenbergResult(op, float(val.real))


def heisenberg_visibility(cfg: PhysicalConfig, grid: ModeGrid, times=None,
                          dim_budget: int = DEFAULT_DIM_BUDGET, t_window: float = 400.0) -> VisibilityFit:
    """Fit ``<q_x>(t) = V cos(rate t + chi)`` in the reference state.

    ``z = <q_x> + i <q_y>`` carries the phase; its unwrapped argument is fitted
    linearly past the ``10 / omega_min`` transient and ``V`` is the mean of
    ``|z|`` there.  The residual is the RMS of ``<q_x> - V cos(rate t + chi)``.
    """
    H = build_hamiltonian(cfg, grid, "superposed", dim_budget)
    psi = reference_state(grid, "+", 1)
    w_min = float(grid.omega.min())
    cut = 10.0 / w_min
    if times is None:
        bound = max(rate_bound(H, psi), 1e-12)
        t_end = cut + t_window / w_min
        n = max(int(math.ceil(2 * t_end / nyquist_spacing(bound))) + 1, 4 * MIN_FIT_SAMPLES)
        times = np.linspace(0.0, t_end, n)
    t = _check_times(times)
    states = _evolved_states(H, psi, t)
    qx_op = charge_operator(grid, "x").sparse
    qy_op = charge_operator(grid, "y").sparse
    qx = np.real(np.einsum("ti,ti->t", states.conj(), (qx_op @ states.T).T))
    qy = np.real(np.einsum("ti,ti->t", states.conj(), (qy_op @ states.T).T))
    keep = t > cut
    if np.count_nonzero(keep) < MIN_FIT_SAMPLES:
        raise RegimeError("too few samples beyond the transient")
    z = (qx + 1j * qy)[keep]
    phase = np.unwrap(np.angle(z))
    t0 = t[keep].mean()
    slope, c = np.polyfit(t[keep] - t0, phase, 1)
    chi = float(np.angle(np.exp(1j * (c - slope * t0))))
    V = float(np.mean(np.abs(z)))
    resid = qx[keep] - V * np.cos(slope * t[keep] + chi)
    return VisibilityFit(V, chi, float(slope), float(np.sqrt(np.mean(resid ** 2))), t, qx, qy)


def heisenberg_decomposition(cfg: PhysicalConfig, grid: ModeGrid, branch: int = 1) -> HeisenbergDecomposition:
    """``theta`` eigenvalues and the field operators ``alpha = cos X``, ``beta = sin X``.

    For a charge held sharply on ``branch`` the relative phase rotation rate
    of ``q_x`` is ``2 theta`` with ``theta(s_s) = E_C - s_s * cross``, and the
    field argument is ``X = (c a + conj(c) a^dag) / omega`` with ``c`` the
    charge coupling of that branch.  Single-mode grids only.
    """
    if len(grid) != 1:
        raise ValueError("heisenberg_decomposition is provided for single-mode grids only")
    cross = cross_term(cfg, grid, branch)
    theta = {1: cfg.E_C - cross, -1: cfg.E_C + cross}
    r_b, p_b = cfg.branch(branch)
    c = complex(ab_model.charge_coupling(cfg, grid, p_b)[0] * np.exp(1j * (grid.k_vecs[0] @ r_b)))
    a = annihilator(grid.n_max)
    X = (c * a + np.conj(c) * a.conj().T) / float(grid.omega[0])
    ev, V = np.linalg.eigh(X)
    alpha = (V * np.cos(ev)) @ V.conj().T
    beta = (V * np.sin(ev)) @ V.conj().T
    space = HilbertSpec((BosonMode(grid.n_max, "k0"),))
    return HeisenbergDecomposition(theta, OperatorMatrix(space, alpha), OperatorMatrix(space, beta))
