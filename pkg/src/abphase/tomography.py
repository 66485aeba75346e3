"""Two-electron tomography of the partial phase without closing the loop.

Electrons A and B each occupy a left and a right spatial mode; the register
has four fermionic modes in the frozen order ``(A_L, A_R, B_L, B_R)`` and all
signs come from the Jordan-Wigner ladder algebra.

Encoded qubits live in the one-particle-per-side sector.  On each side
``|0>_enc`` has B on that side and ``|1>_enc`` has A there.  The encoded
states are ``c_L(e_L) c_R(e_R) |vac>`` with ``c_L(0) = b_BL^dag``,
``c_L(1) = b_AL^dag``, ``c_R(0) = b_BR^dag`` and ``c_R(1) = -b_AR^dag``.  The
minus sign on the right is a convention: it absorbs the exchange sign so the
protocol state reads ``(e^{i phi_B}|01> + e^{i dphi}|10>) / sqrt 2`` in the
sector and ``<X_L X_R> = cos(dphi - phi_B) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .config import PhysicalConfig
from .modes import ModeGrid
from .quantum_core import (FermionMode, HilbertSpec, OperatorMatrix, StateVector, commutator,
                           fermionic_ladders)

MODE_NAMES = ("A_L", "A_R", "B_L", "B_R")
MODE_INDEX = {name: i for i, name in enumerate(MODE_NAMES)}
SIDE_MODES = {"L": ("A_L", "B_L"), "R": ("A_R", "B_R")}
REQUIRED_SETTINGS = ("XX", "YX")
SUPERSELECTION_NOTE = ("local observables must conserve the particle number of their side; "
                       "number-changing operators such as b + b^dag are excluded by the "
                       "fermionic superselection rule and cannot be measured")
HERMITIAN_TOL = 1e-12
SECTOR_FLOOR = 1e-12

SPACE = HilbertSpec(tuple(FermionMode(n) for n in MODE_NAMES))
_LADDERS = {name: fermionic_ladders(SPACE, i) for i, name in enumerate(MODE_NAMES)}


def b(name: str) -> OperatorMatrix:
    return _LADDERS[name][0]


def bdag(name: str) -> OperatorMatrix:
    return _LADDERS[name][1]


def number(name: str) -> OperatorMatrix:
    return bdag(name) @ b(name)


def side_number(side: str) -> OperatorMatrix:
    a, c = SIDE_MODES[side]
    return number(a) + number(c)


def total_number() -> OperatorMatrix:
    return side_number("L") + side_number("R")


def vacuum() -> StateVector:
    return StateVector.basis(SPACE, (0, 0, 0, 0))


@dataclass(frozen=True)
class FermionRegister:
    state: StateVector
    modes: tuple = MODE_NAMES

    def number_expectation(self) -> float:
        psi = self.state.amplitudes
        return float(np.vdot(psi, total_number().sparse @ psi).real)


@dataclass(frozen=True)
class LocalObservable:
    side: str
    matrix: OperatorMatrix
    name: str = ""

    def __post_init__(self):
        if self.side not in SIDE_MODES:
            raise ValueError(f"side must be 'L' or 'R', got {self.side!r}")


@dataclass(frozen=True)
class Validation:
    valid: bool
    diagnostics: tuple = ()

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class Setting:
    name: str
    left: LocalObservable
    right: LocalObservable


@dataclass(frozen=True)
class RegroupReport:
    amplitudes: dict
    sector_state: Optional[np.ndarray]
    sector_weight: float
    particle_number: int
    flagged: bool = False
    message: str = ""


@dataclass(frozen=True)
class TomographyResult:
    phase_estimate: float
    sector_weight: float
    correlators: dict
    shots: int
    standard_error: float
    correlator_errors: dict = field(default_factory=dict)
    seed: Optional[int] = None
    ground_truth: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "phase_estimate": self.phase_estimate, "sector_weight": self.sector_weight,
            "correlators": dict(self.correlators), "correlator_errors": dict(self.correlator_errors),
            "shots": self.shots, "standard_error": self.standard_error, "seed": self.seed,
            "ground_truth": self.ground_truth,
        }


# --------------------------------------------------------------------------- #
# encoded operators
# --------------------------------------------------------------------------- #

def _encoded_flip(side: str):
    """``|1><0|_enc`` on one side: moves the side's particle from B to A."""
    sign = -1.0 if side == "R" else 1.0
    a, c = SIDE_MODES[side]
    return (bdag(a) @ b(c)) * sign


def encoded_pauli(side: str, which: str) -> LocalObservable:
    """Encoded X, Y or Z of one side (standard Pauli matrices in the encoded basis)."""
    up = _encoded_flip(side)
    down = up.dag()
    if which == "X":
        m = up + down
    elif which == "Y":
        m = up * 1j - down * 1j
    elif which == "Z":
        a, c = SIDE_MODES[side]
        m = number(c) - number(a)
    else:
        raise ValueError(f"unknown encoded Pauli {which!r}")
    return LocalObservable(side, m, f"{which}_{side}")


def default_settings() -> tuple:
    """The minimal set: ``XX`` and ``YX`` (first letter left, second right)."""
    return tuple(Setting(l + r, encoded_pauli("L", l), encoded_pauli("R", r)) for l, r in ("XX", "YX"))


# --------------------------------------------------------------------------- #
# operations
# --------------------------------------------------------------------------- #

def prepare_protocol_state(delta_phi: float, offset_phi_B: float = 0.0,
                           include_B: bool = True) -> FermionRegister:
    """``(1/2)(b_AR^dag + e^{i dphi} b_AL^dag)(b_BR^dag + e^{i phi_B} b_BL^dag)|vac>``.

    ``include_B=False`` drops the reference electron and returns the
    single-electron state ``(b_AR^dag + e^{i dphi} b_AL^dag)|vac> / sqrt 2``.
    """
    op_a = bdag("A_R") + bdag("A_L") * np.exp(1j * delta_phi)
    vac = vacuum()
    if include_B:
        op_b = bdag("B_R") + bdag("B_L") * np.exp(1j * offset_phi_B)
        psi = op_a @ (op_b @ vac)
        scale = 0.5
    else:
        psi = op_a @ vac
        scale = 1 / math.sqrt(2)
    return FermionRegister(StateVector(SPACE, scale * psi.amplitudes))


def swap_electron_labels(reg: FermionRegister) -> FermionRegister:
    """Apply the unitary exchanging the labels A and B (``b_A* <-> b_B*``)."""
    perm = {"A_L": "B_L", "A_R": "B_R", "B_L": "A_L", "B_R": "A_R"}
    out = np.zeros(SPACE.total_dim, dtype=complex)
    amps = reg.state.amplitudes
    for idx in np.flatnonzero(amps):
        occ = SPACE.local_indices(int(idx))
        psi = vacuum()
        for name, n in reversed(list(zip(MODE_NAMES, occ))):
            if n:
                psi = bdag(perm[name]) @ psi
        out += amps[idx] * psi.amplitudes
    return FermionRegister(StateVector(SPACE, out))


def _encoded_basis():
    """``{|01>_enc, |10>_enc}`` of the one-particle-per-side sector as fermionic states."""
    vac = vacuum()
    s01 = bdag("B_L") @ ((bdag("A_R") * -1.0) @ vac)
    s10 = bdag("A_L") @ (bdag("B_R") @ vac)
    return s01.amplitudes, s10.amplitudes


def regroup_left_right(reg: FermionRegister) -> RegroupReport:
    """Rewrite the state in left/right occupations and isolate the one-per-side sector.

    Amplitudes are keyed ``((nA, nB)_L, (nA, nB)_R)``.  The register must be
    a particle-number eigenstate.
    """
    psi = reg.state.amplitudes
    N = total_number().sparse @ psi
    n_val = float(np.vdot(psi, N).real)
    n_int = int(round(n_val))
    if np.linalg.norm(N - n_int * psi) > 1e-10:
        raise ValueError("register is not in a definite particle-number sector")
    amps = {}
    for idx in np.flatnonzero(np.abs(psi) > 0):
        aL, aR, bL, bR = SPACE.local_indices(int(idx))
        amps[((aL, bL), (aR, bR))] = complex(psi[idx])
    e01, e10 = _encoded_basis()
    c = np.array([np.vdot(e01, psi), np.vdot(e10, psi)])
    weight = float(np.sum(np.abs(c) ** 2))
    if weight < SECTOR_FLOOR:
        return RegroupReport(amps, None, weight, n_int, True,
                             "one-particle-per-side sector is empty: nothing to measure locally")
    return RegroupReport(amps, c / math.sqrt(weight), weight, n_int)


def validate_local_observable(obs: LocalObservable, max_entries: int = 4) -> Validation:
    """Hermitian, number-conserving on its side, and supported on that side only."""
    diags = []
    m = obs.matrix
    herm = m.hermiticity_error()
    if herm > HERMITIAN_TOL:
        diags.append(f"not Hermitian: max |O - O^dag| = {herm:.3e}")
    comm = commutator(m, side_number(obs.side)).sparse.tocoo()
    bad = [(i, j, v) for i, j, v in zip(comm.row, comm.col, comm.data) if v != 0]
    if bad:
        diags.append(f"[O, N_{obs.side}] != 0: {SUPERSELECTION_NOTE}")
        for i, j, v in bad[:max_entries]:
            diags.append(f"  entry ({SPACE.local_indices(int(i))}, {SPACE.local_indices(int(j))}) = {v:.6g}")
    other = "R" if obs.side == "L" else "L"
    for name in SIDE_MODES[other]:
        for lad, label in ((b(name), f"b_{name}"), (bdag(name), f"b_{name}^dag")):
            err = commutator(m, lad).sparse
            if err.nnz and np.max(np.abs(err.data)) > 0:
                diags.append(f"acts outside side {obs.side}: does not commute with {label}")
                break
    return Validation(not diags, tuple(diags))


def _spectral_projectors(op: OperatorMatrix, decimals: int = 9):
    ev, V = np.linalg.eigh(op.toarray())
    keys = np.round(ev, decimals)
    out = []
    for val in np.unique(keys):
        cols = V[:, keys == val]
        out.append((float(val), cols @ cols.conj().T))
    return out


def measure_correlators(reg: FermionRegister, settings: Sequence[Setting] = None, shots: int = 0,
                        seed: Optional[int] = 0) -> TomographyResult:
    """``<O_L O_R>`` per setting; exact for ``shots=0``, sampled otherwise.

    Each setting gets its own ``shots`` projective measurements of the
    commuting pair, drawn from an independent child of ``SeedSequence(seed)``.
    """
    settings = default_settings() if settings is None else tuple(settings)
    if shots < 0:
        raise ValueError("shots must be >= 0")
    for s in settings:
        if s.left.side != "L" or s.right.side != "R":
            raise ValueError(f"setting {s.name}: needs a left and a right observable")
        for obs in (s.left, s.right):
            v = validate_local_observable(obs)
            if not v:
                raise ValueError(f"setting {s.name}: invalid observable {obs.name}: " + "; ".join(v.diagnostics))
    psi = reg.state.amplitudes
    streams = np.random.SeedSequence(seed).spawn(len(settings))
    corr, errs = {}, {}
    for s, ss in zip(settings, streams):
        if shots == 0:
            corr[s.name] = float(np.vdot(psi, (s.left.matrix @ s.right.matrix).sparse @ psi).real)
            errs[s.name] = 0.0
            continue
        vals, probs = [], []
        for a, PL in _spectral_projectors(s.left.matrix):
            PLpsi = PL @ psi
            for c, PR in _spectral_projectors(s.right.matrix):
                vals.append(a * c)
                probs.append(float(np.vdot(PLpsi, PR @ PLpsi).real))
        probs = np.clip(np.array(probs), 0.0, None)
        probs /= probs.sum()
        counts = np.random.default_rng(ss).multinomial(shots, probs)
        vals = np.array(vals)
        mean = float(counts @ vals / shots)
        var = float(counts @ (vals - mean) ** 2 / max(shots - 1, 1))
        corr[s.name] = mean
        errs[s.name] = math.sqrt(var / shots)
    weight = regroup_left_right(reg).sector_weight
    return TomographyResult(float("nan"), weight, corr, shots, float("nan"), errs, seed)


def reconstruct_phase(result: TomographyResult) -> TomographyResult:
    """``atan2(<YX>, <XX>)`` in (-pi, pi], with a delta-method standard error."""
    missing = [k for k in REQUIRED_SETTINGS if k not in result.correlators]
    if missing:
        raise ValueError(f"missing settings {missing}; required: {list(REQUIRED_SETTINGS)}")
    if result.sector_weight <= 0:
        raise ValueError("sector weight is zero: no phase to reconstruct")
    x, y = result.correlators["XX"], result.correlators["YX"]
    est = math.atan2(y, x)
    if result.shots > 0:
        sx, sy = result.correlator_errors["XX"], result.correlator_errors["YX"]
        r2 = x * x + y * y
        se = math.sqrt((x * x * sy * sy + y * y * sx * sx) / (r2 * r2)) if r2 > 0 else float("inf")
    else:
        se = 0.0
    return replace(result, phase_estimate=est, standard_error=se)


def end_to_end_protocol(cfg: PhysicalConfig, grid: Optional[ModeGrid] = None, shots: int = 0,
                        quantum: bool = False, seed: Optional[int] = 0,
                        offset_phi_B: float = 0.0, tau: float = 1.0) -> TomographyResult:
    """Phase from the physics layer, then prepare, measure and reconstruct.

    The fast path uses the classical ``phi(r_R) - phi(r_L)``; the quantum path
    uses the acquired phase of :func:`extract_phase_difference`.
    """
    if quantum:
        from .phase_extraction import extract_phase_difference
        if grid is None:
            raise ValueError("the quantum path needs a mode grid")
        truth = extract_phase_difference(cfg, grid, tau=tau).acquired_phase
    else:
        from .analytic_em import analytic_phase_difference
        truth = tau * analytic_phase_difference(cfg, cfg.r_L, cfg.r_R, cfg.v_vec, cfg.v_vec_L,
                                                ideal=not cfg.current_elements)
    reg = prepare_protocol_state(truth, offset_phi_B)
    res = reconstruct_phase(measure_correlators(reg, default_settings(), shots, seed))
    return replace(res, ground_truth=float(truth))
