"""Experiment sweeps and case studies producing :class:`SweepReport` tables."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .controller import SETTLING_NOTE, CalibrationTable, SessionResult, run_session, self_check
from .errors import DomainError, EstimationError, MeasurementSaturationError, SccRangeError, ScenarioError
from .identify import IdentifyConfig, estimate_from_pair, two_step_identify
from .measurement import DISTURBANCES, DisturbanceModel, make_probe
from .report import SweepReport
from .scc import voltage_share
from .scenarios import F_NOMINAL, Scenario, nominal_primary_capacitance, with_secondary_resonance
from .tank import TankParams, input_impedance, mutual_inductance, solve_tank, transfer_metrics

TOGGLES = ("none", "load", "scc", "zcd", "all")
ZPA_SCAN = (70e3, 100e3, 50.0)


def _meta(scenario: Scenario, **extra) -> dict:
    meta = {
        "scenario": scenario.name,
        "scenario_hash": scenario.digest(),
        "config": scenario.to_dict(),
        "provenance": dict(scenario.provenance),
    }
    meta.update(extra)
    return meta


def _w(f: float) -> float:
    return 2 * math.pi * f


def sweep_detuning(scenario: Scenario, k_list: Sequence[float], deltas: Sequence[float]) -> SweepReport:
    """Efficiency and power factor over coupling and detuning at 85 kHz."""
    tank = scenario.tank
    columns = ["k", "delta", "f_s", "eta", "pf", "Pout"]
    rows = []
    for k in k_list:
        M = mutual_inductance(k, tank.Lp, tank.Ls)
        for d in deltas:
            p = tank.with_(M=M, delta=d)
            eta, pf, pout = transfer_metrics(p, _w(F_NOMINAL))
            rows.append([k, d, p.fs, eta, pf, pout])
    return SweepReport(columns, rows, _meta(scenario, operating_frequency=F_NOMINAL))


def zpa_frequencies(params: TankParams, scan: tuple[float, float, float] = ZPA_SCAN) -> list[float]:
    """All roots of ``Im(Zin)`` in the scan window, refined by Brent's method."""
    lo, hi, step = scan
    grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    im = [input_impedance(params, _w(f)).imag for f in grid]
    roots = []
    for i in range(len(grid) - 1):
        a, b = im[i], im[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(brentq(lambda f: input_impedance(params, _w(f)).imag, grid[i], grid[i + 1], xtol=1e-9))
    if im[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def primary_only_frequency(params: TankParams, scan: tuple[float, float, float] = ZPA_SCAN) -> tuple[float, str]:
    """ZPA operating frequency with fixed ``Cp``, nearest 85 kHz.

    Without any root the scan point of least ``|Im(Zin)|`` is returned with
    status ``"no_root"``.
    """
    roots = zpa_frequencies(params, scan)
    if roots:
        return min(roots, key=lambda r: abs(r - F_NOMINAL)), "ok"
    lo, hi, step = scan
    grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    f = float(grid[int(np.argmin([abs(input_impedance(params, _w(g)).imag) for g in grid]))])
    return f, "no_root"


def compare_methods(scenario: Scenario, deltas: Sequence[float]) -> SweepReport:
    """Primary-only ZPA tracking, secondary tracking and double-side tuning per detuning."""
    tank = scenario.tank
    columns = [
        "delta", "f_s",
        "f_primary", "eta_primary", "pf_primary", "status_primary",
        "f_secondary", "eta_secondary", "pf_secondary",
        "f_double", "eta_double", "pf_double",
    ]
    rows = []
    for d in deltas:
        p = tank.with_(delta=d)
        fs = p.fs
        f1, status = primary_only_frequency(p)
        e1, pf1, _ = transfer_metrics(p, _w(f1))
        e2, pf2, _ = transfer_metrics(p, _w(fs))
        p3 = p.with_(Cp=nominal_primary_capacitance(p.Lp, fs))
        e3, pf3, _ = transfer_metrics(p3, _w(fs))
        rows.append([d, fs, f1, e1, pf1, status, fs, e2, pf2, fs, e3, pf3])
    return SweepReport(columns, rows, _meta(scenario, zpa_scan_hz=list(ZPA_SCAN)))


def toggle_model(base: DisturbanceModel, toggle: str) -> DisturbanceModel:
    if toggle == "none":
        return base.only()
    if toggle == "all":
        return base.only(*DISTURBANCES)
    if toggle in DISTURBANCES:
        return base.only(toggle)
    raise DomainError(f"unknown disturbance toggle '{toggle}'")


def _single_step(probe, band: tuple[float, float]) -> float:
    f_m, f_n = band
    return estimate_from_pair(f_m, f_n, probe(f_m), probe(f_n))


def identification_error_sweep(
    scenario: Scenario,
    band: tuple[float, float],
    fs_values: Iterable[float],
    toggles: Sequence[str] = TOGGLES,
    include_esr: bool = False,
) -> SweepReport:
    """Single-step and two-step estimates over true secondary resonance.

    Probes use the uncalibrated pipeline: the SCC is commanded from nominal
    values at each probe frequency.  Coil ESRs are zeroed unless
    ``include_esr``, so the undisturbed column isolates the estimator.
    """
    fs_values = list(fs_values)
    if any(not 78e3 <= f <= 92e3 for f in fs_values):
        raise DomainError("true resonance values must lie within 78-92 kHz")
    cfg = IdentifyConfig(first_band=tuple(band))
    columns = [
        "f_s", "disturbance", "theta_m_deg", "theta_n_deg",
        "single_est", "single_err", "two_step_est", "two_step_err", "steps", "status",
    ]
    rows = []
    for fs in fs_values:
        p = with_secondary_resonance(_esr_view(scenario.tank, include_esr), fs)
        for tog in toggles:
            probe = make_probe(p, scenario.scc, toggle_model(scenario.disturbance, tog))
            status = "ok"
            th_m = th_n = single = two = None
            steps = 0
            try:
                th_m = math.degrees(math.atan(probe(band[0])))
                th_n = math.degrees(math.atan(probe(band[1])))
                single = _single_step(probe, band)
            except (EstimationError, MeasurementSaturationError, SccRangeError) as exc:
                status = f"single-step failed: {exc}"
            res = two_step_identify(probe, cfg)
            steps = res.steps
            if res.f_s_est is not None:
                two = res.f_s_est
            if res.fault:
                status = (status + "; " if status != "ok" else "") + f"two-step fault: {res.diagnostic}"
            rows.append([
                fs, tog, th_m, th_n,
                single, None if single is None else single - fs,
                two, None if two is None else two - fs,
                steps, status,
            ])
    return SweepReport(columns, rows, _meta(scenario, band=list(band), include_esr=include_esr))


def _esr_view(tank: TankParams, include_esr: bool) -> TankParams:
    return tank if include_esr else tank.with_(Rp=0.0, Rs=0.0)


def load_only_two_step_error(
    scenario: Scenario,
    load_gain: float,
    window: tuple[float, float] = (80e3, 84e3),
    step: float = 250.0,
    band: tuple[float, float] = (84e3, 86e3),
    include_esr: bool = False,
) -> float:
    """Largest two-step error over ``window`` with only the load disturbance."""
    model = replace(scenario.disturbance.only("load"), load_dist=load_gain)
    cfg = IdentifyConfig(first_band=tuple(band))
    tank = _esr_view(scenario.tank, include_esr)
    lo, hi = window
    worst = 0.0
    for fs in lo + step * np.arange(int(round((hi - lo) / step)) + 1):
        res = two_step_identify(make_probe(with_secondary_resonance(tank, fs), scenario.scc, model), cfg)
        if res.f_s_est is None:
            raise EstimationError(f"load gain {load_gain!r}: {res.diagnostic}")
        worst = max(worst, abs(res.f_s_est - fs))
    return worst


def calibrate_load_gain(
    scenario: Scenario,
    target_error: float = 0.8e3,
    window: tuple[float, float] = (80e3, 84e3),
    bracket: tuple[float, float] = (0.01, 0.09),
    include_esr: bool = False,
) -> float:
    """Load gain per kHz whose worst two-step error over ``window`` is ``target_error``."""
    def g(x: float) -> float:
        return load_only_two_step_error(scenario, x, window, include_esr=include_esr) - target_error

    lo, hi = bracket
    if g(lo) * g(hi) > 0:
        raise DomainError("target error is not bracketed by the gain interval")
    return brentq(g, lo, hi, xtol=1e-7)


def session_for(scenario: Scenario, tank: Optional[TankParams] = None, calibration: Optional[CalibrationTable] = None) -> SessionResult:
    if scenario.scc is None:
        raise ScenarioError(f"scenario '{scenario.name}' has no SCC; a controller session needs one")
    return run_session(
        tank or scenario.tank, scenario.scc, scenario.disturbance,
        scenario.controller, scenario.tune_mode, calibration,
    )


def session_identification_sweep(scenario: Scenario, fs_values: Iterable[float]) -> SweepReport:
    """Full controller sessions over true secondary resonance.

    The self-check runs once, since it never sees the secondary.  The
    ``two_step_*`` columns rerun the calibrated identification on its own,
    so they are filled even where detection skips it.
    """
    if scenario.scc is None:
        raise ScenarioError(f"scenario '{scenario.name}' has no SCC")
    check = self_check(scenario.tank.Lp, scenario.tank.Rp, scenario.scc, scenario.controller, scenario.disturbance)
    if check.table is None:
        raise ScenarioError(f"self-check produced no calibration: {check.diagnostic}")
    columns = [
        "f_s", "two_step_est", "two_step_err", "f_s_est", "error", "steps", "mode",
        "identify_to_run_s", "pf_after", "diagnostic",
    ]
    rows = []
    table = check.table
    for fs in fs_values:
        tank = with_secondary_resonance(scenario.tank, fs)
        # identification alone, regardless of whether detection would trigger it
        probe = make_probe(tank, scenario.scc, scenario.disturbance, angle_at=lambda f: table.angle_at(f, scenario.scc))
        alone = two_step_identify(probe, scenario.controller.identify)
        res = session_for(scenario, tank, table)
        ident = res.identification
        est = None if ident is None else ident.f_s_est
        rows.append([
            fs, alone.f_s_est, None if alone.f_s_est is None else alone.f_s_est - fs,
            est, None if est is None else est - fs,
            0 if ident is None else ident.steps, res.mode.value,
            res.identify_to_run_time, res.solution.pf, res.diagnostic,
        ])
    return SweepReport(columns, rows, _meta(scenario, settling_assumption=SETTLING_NOTE))


def run_case(scenario: Scenario, calibration: Optional[CalibrationTable] = None) -> tuple[SweepReport, SessionResult]:
    """Before/after comparison for one case scenario.

    Before: 85 kHz with the nominal primary capacitor.  After: the
    controller session's final operating point.
    """
    tank = scenario.tank
    before = solve_tank(tank.with_(Cp=nominal_primary_capacitance(tank.Lp)), _w(F_NOMINAL))
    res = session_for(scenario, calibration=calibration)
    after = res.solution
    ident = res.identification
    est = None if ident is None else ident.f_s_est
    columns = [
        "case", "R_dc", "Re", "tune_mode", "f_s_true", "f_s_est", "error",
        "eta_before", "pf_before", "Pout_before",
        "f_after", "eta_after", "pf_after", "Pout_after", "theta_after_deg",
        "cp0_voltage_share", "identify_to_run_s", "mode", "diagnostic",
    ]
    row = [
        scenario.name, scenario.R_dc, tank.Re, scenario.tune_mode.value, tank.fs, est,
        None if est is None else est - tank.fs,
        before.eta, before.pf, before.Pout,
        res.f, after.eta, after.pf, after.Pout, math.degrees(after.theta),
        voltage_share(scenario.scc.Cp0, scenario.scc.at(res.phi).Csc),
        res.identify_to_run_time, res.mode.value, res.diagnostic,
    ]
    meta = _meta(scenario, settling_assumption=SETTLING_NOTE)
    return SweepReport(columns, [row], meta), res
