"""Scenario configuration files and the scenario kinds behind the command line.

A scenario file is TOML.  Only ``kind`` is required; every other key has a
default listed in ``DEFAULTS``.  Physical keys may carry a unit suffix
(``B0_T``, ``rho_um``, ``q_e``...) and are converted to natural units once,
using ``[units] length_scale_m``; keys without a suffix are already natural.
"""

from __future__ import annotations

import copy
import hashlib
import math
import re
import warnings
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from . import ab_model, analytic_em, phase_extraction, tomography
from .config import (UNIT_SUFFIXES, ConfigError, PathSpec, PhysicalConfig, SolenoidSpec,
                     make_config, to_natural)
from .modes import ModeGrid

SCHEMA_VERSION = "abphase.report/1"
SWEEP_SCHEMA_VERSION = "abphase.sweep/1"
KINDS = ("SectorPhase", "PhaseDifference", "Heisenberg", "PathSweep", "Tomography",
         "IdentityCheck", "ConvergenceSweep")
SWEEP_AXES = ("n_max", "radial_nodes", "angular_nodes", "k_max", "path_samples")
CONVERGED_FLOOR = 1e-12

DEFAULTS = {
    "seed": 0,
    "units": {"length_scale_m": 1e-6},
    "physical": {
        "q": None,  # None -> elementary charge
        "m": 1.0,
        "p_vec": [0.0, 1e-3, 0.0],
        "p_vec_L": None,
        "E_C": 0.3,
        "E_S": 0.2,
        "r_L": [-1.0, 0.2, 0.0],
        "r_R": [1.0, 0.2, 0.0],
        "r_s": [0.0, 0.0, 0.0],
        "B0": 1.5e-3,
    },
    "solenoid": {"ideal": False, "radius": 0.25, "loops": 3, "elements_per_loop": 12,
                 "half_height": 0.3},
    "path": {"kind": "circular", "rho": 1.0, "t_loop": 4000.0, "sample_count": 129},
    "grid": {
        "type": None,  # None -> "spherical" for IdentityCheck, else "box"
        "k_vecs": [[0.9, 0.3, 0.2], [-0.4, 1.1, 0.5]],
        "volume": 0.15,
        "n_max": 2,
        "k_min": 1e-5,
        "k_max": 60.0,
        "radial_nodes": 260,
        "angular_nodes": 320,
        "phi_nodes": 8,
        "charge_cutoff": None,  # None -> k_max / 6 (k_max / 4 for IdentityCheck)
        "polarization_axis": [0.0, 1.0, 0.0],
    },
    "scenario": {
        "tau": 1.0,
        "method": "auto",
        "s_c": 1,
        "s_s": 1,
        "t": 10.0,
        "t_window": 400.0,
        "series_samples": 512,
        "shots": 0,
        "offset_phi_B": 0.0,
        "quantum": False,
        "ideal": True,
        "orientation": 0.0,
        "p_vec": [0.0, 1.0, 0.0],
        "j_vec": [0.0, 1.0, 0.0],
        "delta_r": [[0.0, 0.0, 0.8333333333333334], [0.0, 0.0, 1.0], [0.0, 0.0, 2.0],
                    [0.0, 0.0, 4.0], [0.0, 0.0, 8.333333333333334]],
    },
    "sweep": {"target": "SectorPhase", "axis": "n_max", "values": [2, 3, 4, 5, 6, 7, 8]},
    "output": {"report": "report.json", "series": "series.csv"},
}

# natural-unit dimension of each physical key, used to validate suffixes
PHYSICAL_DIMENSIONS = {
    "q": "charge", "m": "mass", "p_vec": "momentum", "p_vec_L": "momentum",
    "E_C": "energy", "E_S": "energy", "r_L": "length", "r_R": "length", "r_s": "length",
    "B0": "field",
}
LENGTH_KEYS = {"solenoid": ("radius", "half_height"), "path": ("rho",)}
TIME_KEYS = {"path": ("t_loop",)}


class ScenarioError(ConfigError):
    """Invalid scenario file; ``line``/``column`` are set for syntax errors."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.line = line
        self.column = column


def git_blob_sha1(data: bytes) -> str:
    """Content hash as git computes it for a blob."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def parse_toml(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ScenarioError(f"config parse error: {exc}", line, col) from exc


def _split_suffix(key: str, known) -> tuple:
    """``'B0_T' -> ('B0', 'T')``; exact names win over suffix splitting."""
    if key in known:
        return key, None
    base, _, suffix = key.rpartition("_")
    if base in known and suffix in UNIT_SUFFIXES:
        return base, suffix
    raise ScenarioError(f"unknown key {key!r}")


def _ingest_section(raw: dict, section: str, length_scale: float, dims: dict) -> dict:
    out = {}
    for key, value in raw.items():
        base, suffix = _split_suffix(key, DEFAULTS[section])
        if base in out:
            raise ScenarioError(f"[{section}] {base!r} given more than once")
        if suffix is not None:
            expected = dims.get(base)
            got = UNIT_SUFFIXES[suffix][0]
            if expected is not None and got not in (expected, "natural"):
                raise ScenarioError(f"[{section}] {key}: suffix {suffix!r} is a {got}, expected {expected}")
            value = to_natural(value, suffix, length_scale)
        out[base] = value
    return out


@dataclass(frozen=True)
class Scenario:
    kind: str
    seed: int
    raw: dict
    settings: dict
    source_sha1: str

    def section(self, name: str) -> dict:
        return self.settings[name]


def load_scenario(text: str, seed: Optional[int] = None, shots: Optional[int] = None) -> Scenario:
    """Parse, merge with defaults and convert units; does not build physics objects."""
    raw = parse_toml(text)
    if "kind" not in raw:
        raise ScenarioError("missing required key 'kind'")
    kind = raw["kind"]
    if kind not in KINDS:
        raise ScenarioError(f"unknown kind {kind!r}; expected one of {list(KINDS)}")
    settings = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key in ("kind", "seed"):
            continue
        if key not in DEFAULTS or not isinstance(DEFAULTS[key], dict):
            raise ScenarioError(f"unknown top-level key {key!r}")
        if not isinstance(value, dict):
            raise ScenarioError(f"{key!r} must be a table")
    units = {**settings["units"], **_ingest_section(raw.get("units", {}), "units", 1.0, {})}
    L0 = float(units["length_scale_m"])
    settings["units"] = units
    for section in ("physical", "solenoid", "path", "grid", "scenario", "sweep", "output"):
        dims = dict(PHYSICAL_DIMENSIONS) if section == "physical" else {}
        for k in LENGTH_KEYS.get(section, ()):
            dims[k] = "length"
        for k in TIME_KEYS.get(section, ()):
            dims[k] = "time"
        settings[section].update(_ingest_section(raw.get(section, {}), section, L0, dims))
    settings["seed"] = int(raw.get("seed", DEFAULTS["seed"]) if seed is None else seed)
    if shots is not None:
        settings["scenario"]["shots"] = int(shots)
    return Scenario(kind, settings["seed"], raw, settings, git_blob_sha1(text.encode("utf-8")))


# --------------------------------------------------------------------------- #
# physics objects
# --------------------------------------------------------------------------- #

def build_config(settings: dict) -> PhysicalConfig:
    phys = {k: v for k, v in settings["physical"].items() if v is not None}
    path = PathSpec(**settings["path"])
    sol = dict(settings["solenoid"])
    ideal = bool(sol.pop("ideal"))
    spec = None if ideal else SolenoidSpec(**sol)
    B0 = phys.pop("B0")
    kwargs = dict(phys, path=path)
    if ideal:
        kwargs["S_cross"] = math.pi * sol["radius"] ** 2
    return make_config(B0=B0, solenoid=spec, **kwargs)


def build_grid(settings: dict, kind: str) -> ModeGrid:
    g = settings["grid"]
    gtype = g["type"] or ("spherical" if kind == "IdentityCheck" else "box")
    if gtype == "box":
        return ModeGrid.box_modes(g["k_vecs"], volume=g["volume"], n_max=int(g["n_max"]),
                                  polarization_axis=tuple(g["polarization_axis"]))
    if gtype == "spherical":
        cutoff = g["charge_cutoff"]
        if cutoff is None:
            cutoff = g["k_max"] / (4.0 if kind == "IdentityCheck" else 6.0)
        return ModeGrid.spherical(g["k_min"], g["k_max"], int(g["radial_nodes"]), int(g["angular_nodes"]),
                                  phi_nodes=int(g["phi_nodes"]), charge_cutoff=cutoff,
                                  n_max=int(g["n_max"]), polarization_axis=tuple(g["polarization_axis"]))
    raise ScenarioError(f"unknown grid type {gtype!r}")


# --------------------------------------------------------------------------- #
# scenario kinds; each returns (result dict, csv text or None, discrepancy, metric)
# --------------------------------------------------------------------------- #

def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _sector_phase(settings, cfg, grid):
    sc = settings["scenario"]
    s_c, s_s = int(sc["s_c"]), int(sc["s_s"])
    H = ab_model.build_hamiltonian(cfg, grid, "superposed")
    sector = ab_model.sector_problem(cfg, grid, s_c, s_s)
    psi = ab_model.sector_state(grid, s_c, s_s)
    w_min = float(grid.omega.min())
    t_end = 100.0 / w_min
    bound = max(phase_extraction.rate_bound(H, psi), 1e-12)
    n = max(int(sc["series_samples"]), int(math.ceil(2 * t_end / phase_extraction.nyquist_spacing(bound))) + 1)
    times = np.linspace(0.0, t_end, n)
    series = phase_extraction.vacuum_amplitude_series(H, psi, psi, times)
    oracle = ab_model.polaron_amplitude(sector, grid, times)
    err = float(np.max(np.abs(series - oracle)))
    closed = ab_model.sector_phase_rate(sector, grid)
    # the oracle comparison stands on its own; a rejected secular fit is reported, not fatal
    try:
        fit = phase_extraction.fit_secular_rate(series, times, omega_min=w_min)
        fitted, resid, fit_error = fit.rate, fit.residual, ""
    except phase_extraction.RegimeError as exc:
        fitted, resid, fit_error = None, None, str(exc)
    result = {"s_c": s_c, "s_s": s_s, "fitted_rate": fitted, "fit_residual": resid,
              "fit_error": fit_error, "closed_form_rate": closed, "max_amplitude_error": err,
              "sum_mu": float(np.sum(ab_model.sector_mu(sector, grid)))}
    rows = zip(times, series.real, series.imag, oracle.real, oracle.imag)
    csv = _csv(("time", "amplitude_re", "amplitude_im", "polaron_re", "polaron_im"), rows)
    return result, csv, err, closed


def _phase_difference(settings, cfg, grid):
    sc = settings["scenario"]
    rep = phase_extraction.extract_phase_difference(cfg, grid, tau=float(sc["tau"]), method=sc["method"])
    ref = rep.analytic_delta_phi
    disc = abs(rep.acquired_phase - ref) / abs(ref) if ref != 0 else abs(rep.acquired_phase)
    return rep.to_dict(), None, disc, rep.acquired_phase


def _heisenberg(settings, cfg, grid):
    sc = settings["scenario"]
    fit = phase_extraction.heisenberg_visibility(cfg, grid, t_window=float(sc["t_window"]))
    point = phase_extraction.heisenberg_qx(cfg, grid, float(sc["t"]))
    raw = ab_model.quantum_phase_difference(cfg, grid, retain_offset=True)
    result = {"visibility": fit.visibility, "chi": fit.chi, "phase_rate": fit.phase_rate,
              "fit_residual": fit.residual, "delta_phi_raw": raw, "t": float(sc["t"]),
              "expectation_at_t": point.expectation}
    model = fit.visibility * np.cos(fit.phase_rate * fit.times + fit.chi)
    csv = _csv(("time", "qx", "qy", "qx_model"), zip(fit.times, fit.qx, fit.qy, model))
    disc = abs(fit.phase_rate - raw) / abs(raw) if raw else abs(fit.phase_rate)
    return result, csv, disc, fit.phase_rate


def _path_sweep(settings, cfg, grid):
    sc = settings["scenario"]
    res = analytic_em.path_sweep(cfg, ideal=bool(sc["ideal"]), orientation=float(sc["orientation"]))
    expected = cfg.q * cfg.flux
    disc = abs(res.total_phase - expected) / abs(expected) if expected else abs(res.total_phase)
    result = {"total_phase": res.total_phase, "expected_flux_phase": expected,
              "quadrature_error": res.quadrature_error, "speed": res.speed,
              "sample_count": len(res.samples)}
    return result, res.csv_text(), disc, res.total_phase


def _tomography(settings, cfg, grid):
    sc = settings["scenario"]
    res = tomography.end_to_end_protocol(cfg, grid, shots=int(sc["shots"]), quantum=bool(sc["quantum"]),
                                         seed=settings["seed"], offset_phi_B=float(sc["offset_phi_B"]),
                                         tau=float(sc["tau"]))
    d = res.to_dict()
    disc = abs(res.phase_estimate - res.ground_truth)
    return d, None, disc, res.phase_estimate


def _identity_check(settings, cfg, grid):
    sc = settings["scenario"]
    rows, ratios = [], []
    for dr in sc["delta_r"]:
        chk = analytic_em.kernel_identity_check(grid, sc["p_vec"], sc["j_vec"], dr, q=cfg.q, m=cfg.m)
        r = float(np.linalg.norm(dr))
        rows.append((r, chk.lhs, chk.rhs, chk.ratio, chk.normalization))
        ratios.append(chk.ratio)
    ratios = np.array(ratios)
    spread = float(np.max(ratios) / np.min(ratios) - 1.0) if np.all(ratios > 0) else float("nan")
    norms = np.array([row[4] for row in rows])
    result = {"ratios": ratios.tolist(), "ratio_spread": spread,
              "calibration_ratio": float(ratios[-1]), "normalization": float(norms[-1]),
              "delta_r": [row[0] for row in rows]}
    csv = _csv(("delta_r", "lhs", "rhs", "ratio", "normalization"), rows)
    return result, csv, float(abs(norms[-1] - 1.0)), float(ratios[-1])


RUNNERS = {
    "SectorPhase": _sector_phase,
    "PhaseDifference": _phase_difference,
    "Heisenberg": _heisenberg,
    "PathSweep": _path_sweep,
    "Tomography": _tomography,
    "IdentityCheck": _identity_check,
}


def _needs_grid(kind: str, settings: dict) -> bool:
    if kind == "PathSweep":
        return False
    if kind == "Tomography":
        return bool(settings["scenario"]["quantum"])
    return True


def run_kind(kind: str, settings: dict):
    """Build objects and run one scenario kind: ``(result, csv, discrepancy, metric)``."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = build_config(settings)
        grid = build_grid(settings, kind) if _needs_grid(kind, settings) else None
        result, csv, disc, metric = RUNNERS[kind](settings, cfg, grid)
    result = dict(result)
    result["warnings"] = sorted({str(w.message) for w in caught})
    return result, csv, disc, metric


def apply_axis(settings: dict, axis: str, value) -> dict:
    s = copy.deepcopy(settings)
    if axis == "n_max":
        s["grid"]["n_max"] = int(value)
    elif axis == "radial_nodes":
        s["grid"]["radial_nodes"] = int(value)
    elif axis == "angular_nodes":
        s["grid"]["angular_nodes"] = int(value)
        s["grid"]["phi_nodes"] = max(int(s["grid"]["phi_nodes"]), 1)
    elif axis == "k_max":
        s["grid"]["k_max"] = float(value)
    elif axis == "path_samples":
        s["path"]["sample_count"] = int(value)
    else:
        raise ScenarioError(f"unknown sweep axis {axis!r}; expected one of {list(SWEEP_AXES)}")
    return s


def convergence_sweep(settings: dict, target: str, axis: str, values) -> dict:
    """Rerun ``target`` for each axis value and judge convergence.

    ``monotone`` holds when the discrepancy never increases (values below
    ``CONVERGED_FLOOR`` count as converged); ``last_two_change`` is the
    relative change of the scenario metric over the final refinement.
    """
    if target not in RUNNERS:
        raise ScenarioError(f"sweep target must be one of {list(RUNNERS)}, got {target!r}")
    if axis not in SWEEP_AXES:
        raise ScenarioError(f"unknown sweep axis {axis!r}; expected one of {list(SWEEP_AXES)}")
    vals = list(values)
    if len(vals) < 2:
        raise ScenarioError("a sweep needs at least two values")
    diffs = np.diff(np.asarray(vals, dtype=float))
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ScenarioError("sweep values must be strictly monotone")
    rows = []
    for v in vals:
        try:
            _, _, disc, metric = run_kind(target, apply_axis(settings, axis, v))
            rows.append({"value": v, "status": "ok", "discrepancy": disc, "metric": metric, "error": ""})
        except Exception as exc:  # recorded per value; the sweep continues
            rows.append({"value": v, "status": "error", "discrepancy": None, "metric": None,
                         "error": f"{type(exc).__name__}: {exc}"})
    ok = [r for r in rows if r["status"] == "ok"]
    d = [r["discrepancy"] for r in ok]
    monotone = len(ok) == len(rows) and all(b <= a or b < CONVERGED_FLOOR for a, b in zip(d, d[1:]))
    last_two = None
    if len(ok) >= 2 and ok[-2]["metric"] not in (None, 0):
        last_two = abs(ok[-1]["metric"] - ok[-2]["metric"]) / abs(ok[-2]["metric"])
    return {"target": target, "axis": axis, "values": vals, "rows": rows,
            "monotone": monotone, "last_two_change": last_two}


def sweep_csv(sweep: dict) -> str:
    lines = ["value,status,discrepancy,metric"]
    for r in sweep["rows"]:
        d = "" if r["discrepancy"] is None else repr(float(r["discrepancy"]))
        m = "" if r["metric"] is None else repr(float(r["metric"]))
        lines.append(f"{r['value']!r},{r['status']},{d},{m}")
    return "\n".join(lines) + "\n"


def run_scenario_settings(scn: Scenario) -> tuple:
    """``(result dict, csv text or None)`` for a loaded scenario."""
    if scn.kind == "ConvergenceSweep":
        sw = scn.settings["sweep"]
        res = convergence_sweep(scn.settings, sw["target"], sw["axis"], sw["values"])
        return res, sweep_csv(res)
    result, csv, _, _ = run_kind(scn.kind, scn.settings)
    return result, csv


def resolved_summary(settings: dict) -> dict:
    """Natural-unit echo of the merged settings (what was actually simulated)."""
    return {k: v for k, v in settings.items() if k != "output"}


def jsonable(obj: Any):
    """Recursively convert numpy values; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    return obj
