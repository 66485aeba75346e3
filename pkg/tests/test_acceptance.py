"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a short detail string; the outcomes are printed as one
PASS/FAIL line per criterion at the end of the pytest run.
"""

import json
import math
import time

import numpy as np
import pytest

from abphase import ab_model as ab
from abphase import analytic_em as em
from abphase import cli
from abphase import tomography as tm
from abphase.config import PathSpec, SolenoidSpec, make_config
from abphase.modes import ModeGrid
from abphase.phase_extraction import (extract_phase_difference, heisenberg_qx, heisenberg_visibility,
                                      nyquist_spacing, rate_bound, vacuum_amplitude_series)
from abphase.quantum_core import propagator

from helpers import desk_config, desk_grid, random_box_config

KERNEL_GRID = dict(k_min=1e-5, k_max=60.0, radial_nodes=260, theta_nodes=320, phi_nodes=8,
                   charge_cutoff=15.0)


@pytest.mark.criterion(1, "polaron-oracle equivalence")
def test_criterion_1_polaron_oracle(record_property):
    rng = np.random.default_rng(20261016)
    start = time.perf_counter()
    worst, count = 0.0, 0
    for i in range(24):
        n_modes = 1 if i % 2 == 0 else 2
        n_max = 8 if n_modes == 1 else 7
        cfg, grid = random_box_config(rng, n_modes, rng.uniform(0.005, 0.05), n_max)
        H = ab.build_hamiltonian(cfg, grid, "superposed")
        t_end = 60.0 / float(grid.omega.min())
        for sec in ab.sector_decompose(cfg, grid):
            assert np.sum(ab.sector_mu(sec, grid)) <= 0.05 + 1e-12
            psi = ab.sector_state(grid, sec.s_c, sec.s_s)
            n = int(math.ceil(2 * t_end / nyquist_spacing(rate_bound(H, psi)))) + 1
            times = np.linspace(0.0, t_end, n)
            z = vacuum_amplitude_series(H, psi, psi, times)
            worst = max(worst, float(np.max(np.abs(z - ab.polaron_amplitude(sec, grid, times)))))
        count += 1
    elapsed = time.perf_counter() - start
    record_property("detail", f"{count} configs, max |delta| {worst:.2e}, {elapsed:.2f} s")
    assert count >= 20
    assert worst <= 1e-7
    assert elapsed < 10.0


@pytest.mark.criterion(2, "quantum vs closed-form phase difference")
def test_criterion_2_quantum_vs_closed_form(record_property):
    cases = [
        (desk_config(), desk_grid()),
        (desk_config(B0=1e-3), desk_grid(n_max=4)),
        (desk_config(B0=2e-3, r_L=[-0.8, -0.3, 0.1], r_R=[1.2, 0.5, -0.2], E_C=-0.4),
         desk_grid(k=[[1.0, -0.2, 0.4], [0.3, 0.8, -0.6]])),
        (desk_config(p=5e-4), desk_grid(n_max=8, volume=0.3)),
    ]
    worst, slowest = 0.0, 0.0
    for cfg, grid in cases:
        assert ab.hilbert_space(grid).total_dim <= 2 ** 12
        t0 = time.perf_counter()
        rep = extract_phase_difference(cfg, grid, method="dense")
        slowest = max(slowest, time.perf_counter() - t0)
        closed = ab.quantum_phase_difference(cfg, grid)
        worst = max(worst, abs(rep.delta_phi - closed) / abs(closed))
    record_property("detail", f"max rel err {worst:.2e}, slowest {slowest:.2f} s")
    assert worst <= 1e-6
    assert slowest < 60.0


@pytest.mark.criterion(3, "continuum limit")
def test_criterion_3_continuum_limit(record_property):
    sol = SolenoidSpec(radius=0.25, loops=5, elements_per_loop=24, half_height=0.5)
    cfg = make_config(B0=2.0, solenoid=sol, p_vec=[0, 1e-3, 0], r_L=[-1, 0.2, 0], r_R=[1, 0.2, 0])
    analytic = em.analytic_phase_difference(cfg, cfg.r_L, cfg.r_R, cfg.v_vec)
    kgrid = ModeGrid.spherical(**KERNEL_GRID)
    calibration = em.kernel_identity_check(kgrid, [0, 1, 0], [0, 1, 0], [0, 0, 8.0]).normalization
    errs = []
    for nr, nt in [(16, 12), (24, 18), (32, 24), (48, 32)]:
        grid = ModeGrid.spherical(1e-4, 60.0, nr, nt, charge_cutoff=10.0, n_max=3)
        rep = extract_phase_difference(cfg, grid, method="spectral")
        errs.append(abs(rep.acquired_phase / calibration - analytic) / abs(analytic))
    record_property("detail", "rel err " + ", ".join(f"{e:.1e}" for e in errs)
                    + f"; calibration {calibration:.6f}")
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 0.01


@pytest.mark.criterion(4, "kernel identity")
def test_criterion_4_kernel_identity(record_property):
    t0 = time.perf_counter()
    grid = ModeGrid.spherical(**KERNEL_GRID)
    k_max = grid.k_range()[1]
    rs = np.geomspace(50.0 / k_max, 500.0 / k_max, 7)
    ratios = np.array([em.kernel_identity_check(grid, [0, 1, 0], [0, 1, 0], [0, 0, r]).ratio for r in rs])
    elapsed = time.perf_counter() - t0
    spread = float(ratios.max() / ratios.min() - 1.0)
    record_property("detail", f"ratio spread {spread:.3%} over r in [{rs[0]:.3g}, {rs[-1]:.3g}], "
                              f"ratio*8pi {ratios.mean() * 8 * math.pi:.5f}, {elapsed:.1f} s")
    assert np.all(k_max * rs >= 50.0 - 1e-9)
    assert rs[-1] / rs[0] >= 10.0 - 1e-9
    assert spread < 0.01
    assert elapsed < 30.0


@pytest.mark.criterion(5, "Boyer formula")
def test_criterion_5_boyer(record_property):
    cfg = make_config(B0=2.0, solenoid=None)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        x, y = rng.uniform(-4, 4, size=2)
        if math.hypot(x, y) < 0.5:
            continue
        v = rng.uniform(1e-5, 1e-3)
        got = em.interaction_energy(cfg, [x, y, rng.uniform(-1, 1)], [0, v, 0], ideal=True)
        ref = em.boyer_energy(cfg.q, v, cfg.B0, cfg.S_cross, x, y)
        worst = max(worst, abs(got - ref) / abs(ref))
    overlap = 0.0
    for r_c in ([1.0, 0.2, 0.0], [-0.7, 0.9, 0.3], [2.0, -1.5, 0.0]):
        v = [0.0, 1e-3, 0.0]
        ref = em.interaction_energy(cfg, r_c, v, ideal=True)
        overlap = max(overlap, abs(em.field_overlap_energy(cfg, r_c, v)["total"] - ref) / abs(ref))
    record_property("detail", f"closed form {worst:.1e}, overlap oracle {overlap:.1e}")
    assert worst <= 1e-9
    assert overlap <= 0.02


@pytest.mark.criterion(6, "flux recovery")
def test_criterion_6_flux_recovery(record_property):
    def total(rho, t_loop):
        cfg = make_config(B0=2.0, solenoid=None, path=PathSpec(rho=rho, t_loop=t_loop))
        return em.path_sweep(cfg).total_phase, cfg.q * cfg.B0 * cfg.S_cross

    base, flux = total(1.0, 4000.0)
    # a decade in radius at fixed speed, and a decade either way in traversal time
    variants = [total(rho, t)[0] for rho, t in ((10.0, 40000.0), (1.0, 40000.0), (1.0, 400.0))]
    rel = abs(base - flux) / flux
    inv = max(abs(v - base) / abs(base) for v in variants)
    record_property("detail", f"rel err {rel:.1e}, invariance {inv:.1e}")
    assert rel <= 1e-6
    assert inv <= 1e-9


@pytest.mark.criterion(7, "Heisenberg picture")
def test_criterion_7_heisenberg(record_property):
    grid = desk_grid()
    qz_dev = 0.0
    cfg = desk_config()
    H = ab.build_hamiltonian(cfg, grid, "superposed")
    qz = ab.charge_operator(grid, "z").toarray()
    for t in (1.0, 37.0, 900.0):
        U = propagator(H, t)
        qz_dev = max(qz_dev, float(np.max(np.abs(U.conj().T @ qz @ U - qz))))
    B0s = [0.5e-3, 1e-3, 1.5e-3, 2e-3, 2.5e-3]
    fitted, raw, resid = [], [], 0.0
    for B0 in B0s:
        c = desk_config(B0=B0)
        fit = heisenberg_visibility(c, grid)
        resid = max(resid, fit.residual)
        fitted.append(fit.phase_rate)
        raw.append(ab.quantum_phase_difference(c, grid, retain_offset=True))
        # the directly conjugated operator agrees with the fitted form
        point = heisenberg_qx(c, grid, 1500.0).expectation
        resid = max(resid, abs(point - fit.visibility * math.cos(fit.phase_rate * 1500.0 + fit.chi)))
    slope_fit = np.polyfit(B0s, fitted, 1)[0]
    slope_raw = np.polyfit(B0s, raw, 1)[0]
    monotone = all(np.sign(b - a) == np.sign(raw[-1] - raw[0]) for a, b in zip(fitted, fitted[1:]))
    slope_err = abs(slope_fit - slope_raw) / abs(slope_raw)
    record_property("detail", f"q_z dev {qz_dev:.1e}, residual {resid:.1e}, slope rel err {slope_err:.1e}")
    assert qz_dev <= 1e-10
    assert resid < 1e-5
    assert monotone
    assert slope_err <= 0.01


@pytest.mark.criterion(8, "tomography fidelity")
def test_criterion_8_tomography(record_property):
    rng = np.random.default_rng(8)
    exact = 0.0
    for dphi in rng.uniform(-math.pi, math.pi, 100):
        est = tm.reconstruct_phase(tm.measure_correlators(tm.prepare_protocol_state(dphi))).phase_estimate
        exact = max(exact, abs((est - dphi + math.pi) % (2 * math.pi) - math.pi))
    weight = tm.regroup_left_right(tm.prepare_protocol_state(0.5)).sector_weight
    reg = tm.prepare_protocol_state(0.5)
    hits = 0
    for seed in range(500):
        res = tm.reconstruct_phase(tm.measure_correlators(reg, shots=10 ** 5, seed=seed))
        hits += abs(res.phase_estimate - 0.5) < 3 * res.standard_error
    record_property("detail", f"exact err {exact:.1e}, weight-1/2 {weight - 0.5:.1e}, "
                              f"coverage {hits}/500")
    assert exact < 1e-9
    assert abs(weight - 0.5) <= 1e-12
    assert hits >= 495


@pytest.mark.criterion(9, "superselection suite")
def test_criterion_9_superselection(record_property):
    observables = [s.left for s in tm.default_settings()] + [s.right for s in tm.default_settings()]
    observables += [tm.encoded_pauli(side, p) for side in "LR" for p in "XYZ"]
    checked = [tm.validate_local_observable(o) for o in observables]
    for o in observables:
        n_side = tm.side_number(o.side)
        assert (o.matrix @ n_side - n_side @ o.matrix).sparse.count_nonzero() == 0, o.name
    bad = tm.validate_local_observable(tm.LocalObservable("L", tm.b("A_L") + tm.bdag("A_L"), "b+b^dag"))
    record_property("detail", f"{sum(map(bool, checked))}/{len(checked)} valid; b+b^dag rejected: "
                              f"{not bad.valid}")
    assert all(checked)
    assert not bad.valid
    assert any(tm.SUPERSELECTION_NOTE in d for d in bad.diagnostics)


@pytest.mark.criterion(10, "determinism")
def test_criterion_10_determinism(tmp_path, record_property):
    scenarios = {
        "Tomography": 'kind = "Tomography"\nseed = 3\n[scenario]\nshots = 100000\n',
        "PhaseDifference": 'kind = "PhaseDifference"\n',
        "PathSweep": 'kind = "PathSweep"\n',
    }
    identical = 0
    for kind, text in scenarios.items():
        cfg = tmp_path / f"{kind}.toml"
        cfg.write_text(text)
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{kind}-{rep}"
            assert cli.main(["run", str(cfg), "--out-dir", str(out), "--quiet"]) == 0
            blobs.append(tuple(p.read_bytes() for p in sorted(out.iterdir())))
        json.loads(blobs[0][0])
        identical += blobs[0] == blobs[1]
    record_property("detail", f"{identical}/{len(scenarios)} scenarios byte-identical")
    assert identical == len(scenarios)
