import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abphase import ab_model as ab
from abphase.config import make_config
from abphase.modes import ModeGrid
from abphase.phase_extraction import (NyquistError, RegimeError, extract_phase_difference,
                                      fit_secular_rate, heisenberg_decomposition, heisenberg_qx,
                                      heisenberg_visibility, vacuum_amplitude_series)
from abphase.quantum_core import (HilbertSpec, OperatorMatrix, Qubit, StateVector,
                                  evolve, expectation, propagator)

from helpers import desk_config, desk_grid


# vacuum_amplitude_series

def test_series_diagonal_and_t0():
    space = HilbertSpec((Qubit(),))
    H = OperatorMatrix(space, np.diag([0.7, -0.2]))
    psi = StateVector.basis(space, (0,))
    t = np.linspace(0, 10, 50)
    np.testing.assert_allclose(vacuum_amplitude_series(H, psi, psi, t), np.exp(-0.7j * t), atol=1e-14)
    plus = StateVector(space, [1, 1j], normalize=True)
    assert vacuum_amplitude_series(H, plus, psi, [0.0])[0] == pytest.approx(psi.inner(plus))


def test_series_matches_polaron_single_mode():
    cfg = desk_config(B0=1e-2, p=1e-3)
    grid = ModeGrid.box_modes([[1.0, 0.0, 0.0]], volume=0.05, n_max=6)
    H = ab.build_hamiltonian(cfg, grid, "R")
    sec = ab.sector_problem(cfg, grid, 1, 1)
    psi = ab.sector_state(grid, 1, 1)
    t = np.linspace(0, 200, 2001)
    z = vacuum_amplitude_series(H, psi, psi, t)
    assert np.max(np.abs(z - ab.polaron_amplitude(sec, grid, t))) < 1e-7


def test_series_rejects_coarse_spacing_and_bad_times():
    space = HilbertSpec((Qubit(),))
    H = OperatorMatrix(space, np.diag([3.0, 0.0]))
    psi = StateVector.basis(space, (0,))
    with pytest.raises(NyquistError, match="use spacing below 0.52"):
        vacuum_amplitude_series(H, psi, psi, [0.0, 1.0, 2.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        vacuum_amplitude_series(H, psi, psi, [0.0, 0.5, 0.5])
    with pytest.raises(ValueError):
        vacuum_amplitude_series(H, psi, psi, [-1.0, 0.0])


# fit_secular_rate

def test_fit_examples():
    t = np.linspace(0, 10, 200)
    fit = fit_secular_rate(np.exp(-2.5j * t), t)
    assert fit.rate == pytest.approx(2.5, abs=1e-12)
    assert fit.residual < 1e-12
    assert fit_secular_rate(np.full(t.size, 0.8 + 0.1j), t).rate == pytest.approx(0.0, abs=1e-14)


def test_fit_polaron_rate_is_const_minus_lambda_squared():
    grid = ModeGrid.box_modes([[1.0, 0.0, 0.0]])
    sec = ab.SectorProblem(1, 1, np.array([0.1 + 0j]), 0.3)
    t = np.linspace(0, 20000, 80001)
    fit = fit_secular_rate(ab.polaron_amplitude(sec, grid, t), t, omega_min=1.0, max_residual=1e-2)
    assert fit.rate == pytest.approx(0.3 - 0.01, abs=1e-6)


def test_fit_rejections():
    t = np.linspace(0, 10, 200)
    with pytest.raises(RegimeError, match="need at least 16"):
        fit_secular_rate(np.exp(-1j * t), t, transient_cut=9.5)
    with pytest.raises(RegimeError, match="modulus"):
        fit_secular_rate(np.exp(-1j * t) * np.exp(-t), t)
    noisy = np.exp(-1j * t + 0.3j * np.sin(7 * t))
    with pytest.raises(RegimeError, match="residual"):
        fit_secular_rate(noisy, t)


# extract_phase_difference

def test_extract_zero_solenoid_coupling():
    rep = extract_phase_difference(desk_config(B0=0.0), desk_grid(), method="dense")
    assert abs(rep.delta_phi) < 1e-8


def test_extract_mirror_swap_negates():
    grid = desk_grid()
    a = extract_phase_difference(desk_config(), grid, method="dense")
    b = extract_phase_difference(desk_config(r_L=[1.0, 0.2, 0.0], r_R=[-1.0, 0.2, 0.0]), grid, method="dense")
    assert b.delta_phi == pytest.approx(-a.delta_phi, rel=1e-6)


def test_extract_matches_closed_form_and_report_fields():
    cfg, grid = desk_config(), desk_grid()
    rep = extract_phase_difference(cfg, grid, method="dense")
    assert rep.delta_phi == pytest.approx(ab.quantum_phase_difference(cfg, grid), rel=1e-6)
    assert rep.fit_residual < 1e-6 and rep.truncation_leakage < 1e-8
    assert rep.delta_phi_raw - rep.delta_phi == pytest.approx(2 * cfg.E_C)
    assert rep.acquired_phase == pytest.approx(-rep.delta_phi)
    assert rep.coefficient_ratio == 0.25
    d = rep.to_dict()
    assert set(d["sector_rates"]) == {"+1,+1", "+1,-1", "-1,+1", "-1,-1"}
    spec = extract_phase_difference(cfg, grid, method="spectral")
    assert spec.delta_phi == pytest.approx(rep.delta_phi, rel=1e-6)
    with pytest.raises(ValueError, match="method"):
        extract_phase_difference(cfg, grid, method="magic")


def test_extract_reports_failing_sector():
    cfg = desk_config(B0=0.2)
    grid = ModeGrid.box_modes([[1.0, 0.0, 0.0]], volume=1e-3, n_max=4)
    with pytest.raises(RegimeError, match="sector"):
        extract_phase_difference(cfg, grid, method="dense")


# Heisenberg picture

def test_heisenberg_free_charge_conserves_qx():
    cfg = make_config(B0=0.0, solenoid=None, p_vec=[0, 0, 0], E_C=0.0, E_S=0.0)
    res = heisenberg_qx(cfg, desk_grid(k=[[1.0, 0, 0]], n_max=2), 3.7)
    assert res.expectation == pytest.approx(1.0, abs=1e-12)


def test_heisenberg_no_relative_phase_source():
    # identical charge coupling on both branches: nearly coincident points, G = 0, E_C = 0
    cfg = make_config(B0=0.0, solenoid=None, p_vec=[0, 1e-2, 0], E_C=0.0,
                      r_L=[0.0, 0.0, 0.0], r_R=[1e-9, 0.0, 0.0])
    grid = ModeGrid.box_modes([[1.0, 0.0, 0.0]], volume=0.5, n_max=4)
    fit = heisenberg_visibility(cfg, grid, t_window=100)
    assert abs(fit.phase_rate) < 1e-9
    assert 0 < fit.visibility <= 1
    assert np.all(np.abs(fit.qy) < 1e-8)
    for t in (5.0, 40.0):
        assert heisenberg_qx(cfg, grid, t).expectation <= 1.0


def test_heisenberg_generic_matches_fitted_cosine():
    cfg, grid = desk_config(), desk_grid()
    fit = heisenberg_visibility(cfg, grid)
    rep = extract_phase_difference(cfg, grid, method="dense")
    assert fit.phase_rate == pytest.approx(rep.delta_phi_raw, rel=1e-6)
    for t in (300.0, 1234.5):
        val = heisenberg_qx(cfg, grid, t).expectation
        assert val == pytest.approx(fit.visibility * np.cos(rep.delta_phi_raw * t + fit.chi), abs=1e-5)
    other = heisenberg_qx(desk_config(B0=3e-3), grid, 1234.5).expectation
    assert abs(other - heisenberg_qx(cfg, grid, 1234.5).expectation) > 1e-6


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.1, 50))
def test_heisenberg_schrodinger_consistency_and_qz(seed, t):
    rng = np.random.default_rng(seed)
    cfg = desk_config(B0=rng.uniform(1e-3, 2e-2), p=rng.uniform(1e-4, 5e-3),
                      E_C=rng.normal(), E_S=rng.normal())
    grid = ModeGrid.box_modes(rng.normal(size=(1, 3)) + 0.2, volume=rng.uniform(0.05, 1), n_max=3)
    res = heisenberg_qx(cfg, grid, t)
    H = ab.build_hamiltonian(cfg, grid, "superposed")
    psi = ab.reference_state(grid, "+", 1)
    schro = expectation(ab.charge_operator(grid, "x"), evolve(H, t, psi))
    assert abs(res.expectation - schro) < 1e-10
    U = propagator(H, t)
    qz = ab.charge_operator(grid, "z").toarray()
    assert np.max(np.abs(U.conj().T @ qz @ U - qz)) < 1e-10


def test_visibility_tends_to_one_without_charge_coupling():
    grid = desk_grid()
    vs = [heisenberg_visibility(desk_config(p=p), grid, t_window=200).visibility for p in (1e-3, 1e-4, 0.0)]
    assert all(0 < v <= 1 for v in vs)
    assert vs[0] < vs[1] < vs[2]
    assert vs[2] == pytest.approx(1.0, abs=1e-12)


def test_phase_accumulates_linearly():
    cfg, grid = desk_config(), desk_grid()
    fit = heisenberg_visibility(cfg, grid)
    keep = fit.times > 10 / grid.omega.min()
    phase = np.unwrap(np.angle((fit.qx + 1j * fit.qy)[keep]))
    t = fit.times[keep]
    resid = phase - (fit.phase_rate * t + fit.chi)
    assert np.sqrt(np.mean((resid - np.round(resid / (2 * np.pi)) * 2 * np.pi) ** 2)) < 1e-6


def test_decomposition_identity_and_theta():
    cfg = desk_config()
    grid = ModeGrid.box_modes([[0.9, 0.3, 0.2]], volume=0.15, n_max=10)
    dec = heisenberg_decomposition(cfg, grid)
    assert dec.identity_error() < 1e-12
    cross = ab.cross_term(cfg, grid, 1)
    assert dec.theta[1] == pytest.approx(cfg.E_C - cross)
    assert dec.theta[-1] == pytest.approx(cfg.E_C + cross)
    with pytest.raises(ValueError, match="single-mode"):
        heisenberg_decomposition(cfg, desk_grid())
