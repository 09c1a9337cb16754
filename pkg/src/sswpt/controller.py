"""Primary-side tuning controller.

Sequence: self-check calibration of SCC angles with the secondary absent,
detune detection at the nominal frequency, two-step identification, then
closed-loop retuning of the SCC angle for ZPA or ZVS.  Simulated time
advances ``settle_cycles`` carrier periods per actuation, which is the sole
basis of the reported timing.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, MeasurementSaturationError, SccRangeError, WptError
from .identify import IdentificationResult, IdentifyConfig, two_step_identify
from .measurement import DisturbanceModel, make_probe, measured_phase, realized_capacitance
from .scc import PHI_MAX, PHI_MIN, SccState, forward_capacitance
from .tank import PhasorSolution, TankParams, input_impedance, solve_tank

SETTLING_NOTE = (
    "timing assumes phasor steady state after settle_cycles carrier periods "
    "following each actuation; it is a model-conditional figure, not a hardware measurement"
)


class Mode(str, enum.Enum):
    SELF_CHECK = "SelfCheck"
    IDLE = "Idle"
    IDENTIFY = "Identify"
    TUNE = "Tune"
    RUN = "Run"
    FAULT = "Fault"


class TuneMode(str, enum.Enum):
    ZPA = "ZPA"
    ZVS = "ZVS"


ALLOWED_TRANSITIONS: dict[Mode, frozenset[Mode]] = {
    Mode.SELF_CHECK: frozenset({Mode.SELF_CHECK, Mode.IDLE, Mode.FAULT}),
    Mode.IDLE: frozenset({Mode.IDLE, Mode.IDENTIFY, Mode.RUN, Mode.FAULT}),
    Mode.IDENTIFY: frozenset({Mode.IDENTIFY, Mode.TUNE, Mode.FAULT}),
    Mode.TUNE: frozenset({Mode.TUNE, Mode.RUN, Mode.FAULT}),
    Mode.RUN: frozenset({Mode.RUN, Mode.IDLE}),
    Mode.FAULT: frozenset({Mode.FAULT}),
}
INITIAL_MODES = frozenset({Mode.SELF_CHECK, Mode.IDLE})


def transition_allowed(a: Mode, b: Mode) -> bool:
    return b in ALLOWED_TRANSITIONS[a]


def _default_grid() -> tuple[float, ...]:
    return tuple(float(f) for f in np.arange(79e3, 90e3 + 1.0, 1e3))


@dataclass(frozen=True)
class ControllerConfig:
    """Controller tunables.

    With ``adaptive_gain`` the proportional gain is re-estimated each step as
    the inverse secant slope of angle versus control angle, clipped to
    ``kp_bounds``; ``pi_gains[0]`` is only the starting value.
    """

    theta_ref: float = math.radians(5.0)
    zvs_margin: float = math.radians(2.0)
    pi_gains: tuple[float, float] = (0.4, 0.0)
    adaptive_gain: bool = True
    kp_bounds: tuple[float, float] = (1e-3, 2.0)
    self_check_kp: float = 0.01
    settle_cycles: int = 10
    band: tuple[float, float] = (79e3, 90e3)
    self_check_grid: tuple[float, ...] = field(default_factory=_default_grid)
    f0: float = 85e3
    angle_tol: float = math.radians(0.5)
    hold: int = 3
    max_iter: int = 60
    self_check_max_iter: int = 100
    identify: IdentifyConfig = IdentifyConfig()

    def __post_init__(self) -> None:
        kp, ki = self.pi_gains
        if not self.theta_ref > 0:
            raise DomainError("theta_ref must be positive")
        if not self.zvs_margin >= 0:
            raise DomainError("zvs_margin must be non-negative")
        if not self.settle_cycles >= 1:
            raise DomainError("settle_cycles must be at least 1")
        if not (kp >= 0 and ki >= 0):
            raise DomainError("PI gains must be non-negative")
        lo, hi = self.kp_bounds
        if not 0 < lo <= hi:
            raise DomainError("kp_bounds must satisfy 0 < lo <= hi")
        if not self.band[0] < self.band[1]:
            raise DomainError("band must be increasing")
        if not self.self_check_grid:
            raise DomainError("self_check_grid must not be empty")
        if not (self.angle_tol > 0 and self.hold >= 1 and self.max_iter >= 1 and self.self_check_max_iter >= 1):
            raise DomainError("angle_tol, hold and iteration caps must be positive")

    def dwell(self, f: float) -> float:
        return self.settle_cycles / f

    def target(self, mode: TuneMode) -> float:
        return self.zvs_margin if TuneMode(mode) is TuneMode.ZVS else 0.0


@dataclass(frozen=True)
class PiState:
    phi: float
    integral: float = 0.0


def pi_update(
    state: PiState, error: float, gains: tuple[float, float], phi_max: float = PHI_MAX
) -> PiState:
    """One PI step on the control angle, clamped to ``[pi/2, phi_max]``.

    The integrator is frozen whenever the output clamps.
    """
    kp, ki = gains
    integral = state.integral + error
    phi = state.phi + kp * error + ki * integral
    if phi > phi_max:
        return PiState(phi_max, state.integral)
    if phi < PHI_MIN:
        return PiState(PHI_MIN, state.integral)
    return PiState(phi, integral)


@dataclass(frozen=True)
class TraceRecord:
    t: float
    mode: Mode
    f: float
    phi: float
    theta_meas: float
    note: str = ""


@dataclass
class SessionTrace:
    records: list[TraceRecord] = field(default_factory=list)

    @property
    def t_end(self) -> float:
        return self.records[-1].t if self.records else 0.0

    def add(self, t: float, mode: Mode, f: float, phi: float, theta: float, note: str = "") -> TraceRecord:
        if self.records and not t > self.records[-1].t:
            raise DomainError(f"trace time must increase: {t!r} after {self.records[-1].t!r}")
        rec = TraceRecord(t, Mode(mode), f, phi, theta, note)
        self.records.append(rec)
        return rec

    def extend(self, records: list[TraceRecord]) -> None:
        for r in records:
            self.add(r.t, r.mode, r.f, r.phi, r.theta_meas, r.note)

    @property
    def final_mode(self) -> Optional[Mode]:
        return self.records[-1].mode if self.records else None

    def transitions_valid(self) -> bool:
        if not self.records:
            return True
        if self.records[0].mode not in INITIAL_MODES:
            return False
        times_ok = all(b.t > a.t for a, b in zip(self.records, self.records[1:]))
        modes_ok = all(transition_allowed(a.mode, b.mode) for a, b in zip(self.records, self.records[1:]))
        return times_ok and modes_ok

    def identify_to_run_time(self) -> Optional[float]:
        """Time from the decision to identify until Run is entered.

        Measured from the last record before the first Identify record.
        """
        idx = next((i for i, r in enumerate(self.records) if r.mode is Mode.IDENTIFY), None)
        if idx is None:
            return None
        start = self.records[idx - 1].t if idx > 0 else 0.0
        run = next((r for r in self.records[idx:] if r.mode is Mode.RUN), None)
        return None if run is None else run.t - start


class CalibrationTable:
    """Self-check result: control angle per grid frequency.

    Lookups between grid points interpolate ``C*w^2`` linearly in frequency,
    which is nearly constant for a fixed inductance, and invert back to an
    angle.  Outside the grid the end value is held.
    """

    HEADER = "# frequency_hz phi_rad"

    def __init__(self, freqs, phis) -> None:
        f = [float(x) for x in freqs]
        p = [float(x) for x in phis]
        if len(f) != len(p) or not f:
            raise DomainError("calibration table needs equal, non-empty columns")
        if any(b <= a for a, b in zip(f, f[1:])):
            raise DomainError("calibration frequencies must be strictly increasing")
        if any(not PHI_MIN <= x <= PHI_MAX for x in p):
            raise DomainError("calibration angle outside the SCC domain")
        self.freqs = tuple(f)
        self.phis = tuple(p)

    def __len__(self) -> int:
        return len(self.freqs)

    def __eq__(self, other) -> bool:
        return isinstance(other, CalibrationTable) and (self.freqs, self.phis) == (other.freqs, other.phis)

    def angle_at(self, f: float, scc: SccState) -> float:
        if f in self.freqs:
            return self.phis[self.freqs.index(f)]
        y = [forward_capacitance(scc.Cp0, scc.Cp1, p) * (2 * math.pi * fi) ** 2 for fi, p in zip(self.freqs, self.phis)]
        c = float(np.interp(f, self.freqs, y)) / (2 * math.pi * f) ** 2
        lo = forward_capacitance(scc.Cp0, scc.Cp1, PHI_MIN)
        hi = forward_capacitance(scc.Cp0, scc.Cp1, PHI_MAX)
        return scc.angle_for(min(max(c, lo), hi))

    def to_text(self) -> str:
        lines = [self.HEADER] + [f"{f!r} {p!r}" for f, p in zip(self.freqs, self.phis)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CalibrationTable":
        freqs, phis = [], []
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DomainError(f"line {n}: expected two columns, got {len(parts)}")
            try:
                freqs.append(float(parts[0]))
                phis.append(float(parts[1]))
            except ValueError as exc:
                raise DomainError(f"line {n}: {exc}") from None
        return cls(freqs, phis)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CalibrationTable":
        return cls.from_text(Path(path).read_text())


@dataclass
class LoopResult:
    phi: float
    theta: float
    converged: bool
    measurements: int
    records: list[TraceRecord]
    t_end: float


def _regulate(
    measure: Callable[[float], float],
    phi0: float,
    target: float,
    f: float,
    config: ControllerConfig,
    mode: Mode,
    t0: float,
    kp0: float,
    hold: int,
    max_iter: int,
) -> LoopResult:
    """Closed loop on the control angle at fixed frequency ``f``.

    Each measurement follows one settle window.  Stops after ``hold``
    consecutive readings within ``angle_tol`` of ``target``.  The angle is
    assumed to rise with the control angle, so readings on either side of
    the target bracket the solution and steps leaving the bracket bisect.
    """
    kp_lo, kp_hi = config.kp_bounds
    ki = config.pi_gains[1]
    state = PiState(phi0)
    kp = kp0
    prev: Optional[tuple[float, float]] = None
    below: Optional[float] = None  # largest angle seen reading under target
    above: Optional[float] = None  # smallest angle seen reading over target
    streak = 0
    t = t0
    records: list[TraceRecord] = []
    theta = float("nan")
    for n in range(1, max_iter + 1):
        theta = measure(state.phi)
        t += config.dwell(f)
        records.append(TraceRecord(t, mode, f, state.phi, theta))
        err = target - theta
        streak = streak + 1 if abs(err) < config.angle_tol else 0
        if streak >= hold:
            return LoopResult(state.phi, theta, True, n, records, t)
        if err > 0:
            below = state.phi if below is None else max(below, state.phi)
        elif err < 0:
            above = state.phi if above is None else min(above, state.phi)
        if config.adaptive_gain and prev is not None and state.phi != prev[0]:
            slope = (theta - prev[1]) / (state.phi - prev[0])
            if slope > 0:
                kp = min(max(1.0 / slope, kp_lo), kp_hi)
        prev = (state.phi, theta)
        nxt = pi_update(state, err, (kp, ki))
        if below is not None and above is not None and not below < nxt.phi < above:
            # step left the known bracket around the target: bisect instead
            nxt = PiState(0.5 * (below + above), state.integral)
        state = nxt
    return LoopResult(state.phi, theta, False, max_iter, records, t)


def _start_angle(scc: SccState, c_target: float) -> float:
    try:
        return scc.angle_for(c_target)
    except SccRangeError:
        return PHI_MAX if c_target > scc.c_reachable else PHI_MIN


@dataclass
class SelfCheckResult:
    table: Optional[CalibrationTable]
    fault: bool
    failing: list[float]
    records: list[TraceRecord]
    diagnostic: str = ""


def self_check(
    Lp: float,
    Rp: float,
    scc: SccState,
    config: ControllerConfig = ControllerConfig(),
    model: DisturbanceModel = DisturbanceModel(),
    t0: float = 0.0,
) -> SelfCheckResult:
    """Calibrate control angles on the primary loop alone (secondary absent).

    Each grid point starts from the nominal inverse and is regulated until
    the loop angle is within tolerance; points that do not converge inside
    the iteration cap are reported as failing.  On a fault ``table`` still
    holds the points that did converge.
    """
    if not (Lp > 0 and Rp >= 0):
        raise DomainError("Lp must be positive and Rp non-negative")
    freqs: list[float] = []
    phis: list[float] = []
    failing: list[float] = []
    records: list[TraceRecord] = []
    t = t0
    for f in sorted(config.self_check_grid):
        w = 2 * math.pi * f

        def measure(phi: float, w=w, f=f) -> float:
            cp = realized_capacitance(scc.at(phi).commanded, model)
            theta = math.atan2(w * Lp - 1.0 / (w * cp), Rp)
            if model.zcd_in_self_check:
                theta = measured_phase(theta, f, model)
            return theta

        phi0 = _start_angle(scc, 1.0 / (w * w * Lp))
        res = _regulate(measure, phi0, 0.0, f, config, Mode.SELF_CHECK, t, config.self_check_kp, 1, config.self_check_max_iter)
        records.extend(res.records)
        t = res.t_end
        if res.converged:
            freqs.append(f)
            phis.append(res.phi)
        else:
            failing.append(f)
    table = CalibrationTable(freqs, phis) if freqs else None
    if failing:
        listed = ", ".join(f"{f / 1e3:g}" for f in failing)
        return SelfCheckResult(
            table, True, failing, records,
            f"significant primary capacitance deviation: no convergence at {listed} kHz",
        )
    return SelfCheckResult(table, False, [], records)


def closed_loop_angle(
    params: TankParams, scc: SccState, phi: float, f: float, model: DisturbanceModel, zcd: bool
) -> float:
    """Input angle with the secondary present, as read by the controller."""
    cp = realized_capacitance(scc.at(phi).commanded, model)
    theta = cmath.phase(input_impedance(params.with_(Cp=cp), 2 * math.pi * f))
    return measured_phase(theta, f, model) if zcd else theta


def tune_to_target(
    params: TankParams,
    scc: SccState,
    f: float,
    mode: TuneMode,
    config: ControllerConfig = ControllerConfig(),
    model: DisturbanceModel = DisturbanceModel(),
    phi0: Optional[float] = None,
    t0: float = 0.0,
) -> LoopResult:
    """Regulate the SCC angle at ``f`` until the input angle reaches the mode target."""
    lo, hi = config.band
    if not lo <= f <= hi:
        raise DomainError(f"tuning frequency {f!r} Hz outside band [{lo!r}, {hi!r}]")
    if phi0 is None:
        phi0 = _start_angle(scc, 1.0 / ((2 * math.pi * f) ** 2 * params.Lp))
    return _regulate(
        lambda phi: closed_loop_angle(params, scc, phi, f, model, model.zcd_in_tune),
        phi0, config.target(mode), f, config, Mode.TUNE, t0,
        config.pi_gains[0], config.hold, config.max_iter,
    )


@dataclass
class SessionResult:
    trace: SessionTrace
    identification: Optional[IdentificationResult]
    solution: PhasorSolution
    mode: Mode
    phi: float
    f: float
    calibration: Optional[CalibrationTable]
    diagnostic: str = ""

    @property
    def identify_to_run_time(self) -> Optional[float]:
        return self.trace.identify_to_run_time()


def _final_solution(params: TankParams, scc: SccState, phi: float, f: float, model: DisturbanceModel) -> PhasorSolution:
    cp = realized_capacitance(scc.at(phi).commanded, model)
    return solve_tank(params.with_(Cp=cp), 2 * math.pi * f)


def run_session(
    params: TankParams,
    scc: SccState,
    model: DisturbanceModel = DisturbanceModel(),
    config: ControllerConfig = ControllerConfig(),
    mode: TuneMode = TuneMode.ZPA,
    calibration: Optional[CalibrationTable] = None,
) -> SessionResult:
    """Simulate one controller session from power-up to Run or Fault.

    ``params`` describes the physical tank; only the probe and loop
    callbacks see it, never the identification logic.  Without a
    ``calibration`` table a self-check is run first; if it fails only at
    some grid points the session continues with the partial table and the
    closed loop decides whether an uncalibrated frequency is reachable.
    """
    trace = SessionTrace()
    t = 0.0
    f0 = config.f0
    idle_note = "detune check at nominal frequency"
    warning = ""

    def fault(f: float, phi: float, theta: float, note: str, ident=None) -> SessionResult:
        lo, hi = config.band
        clamped = min(max(f, lo), hi)
        trace.add(trace.t_end + 1.0 / clamped, Mode.FAULT, clamped, phi, theta, f"{note}; frequency limited to {clamped / 1e3:g} kHz")
        sol = _final_solution(params, scc, phi, clamped, model)
        return SessionResult(trace, ident, sol, Mode.FAULT, phi, clamped, calibration, note)

    if calibration is None:
        check = self_check(params.Lp, params.Rp, scc, config, model, t0=t)
        trace.extend(check.records)
        t = trace.t_end
        table = check.table
        if check.fault:
            if table is None or not table.freqs[0] <= f0 <= table.freqs[-1]:
                last = check.records[-1]
                return fault(last.f, last.phi, last.theta_meas, check.diagnostic)
            # partial calibration: points outside it rely on the closed loop
            warning = f"{check.diagnostic}; continuing with partial calibration"
            idle_note = warning
        calibration = table

    def angle_at(f: float) -> float:
        return calibration.angle_at(f, scc)

    phi = angle_at(f0)
    try:
        theta0 = closed_loop_angle(params, scc, phi, f0, model, zcd=True)
    except WptError as exc:
        return fault(f0, phi, float("nan"), f"detection failed: {exc}")
    t += config.dwell(f0)
    trace.add(t, Mode.IDLE, f0, phi, theta0, idle_note)

    if abs(theta0) <= config.theta_ref:
        trace.add(t + 1.0 / f0, Mode.RUN, f0, phi, theta0, "within reference angle; no identification")
        sol = _final_solution(params, scc, phi, f0, model)
        return SessionResult(trace, None, sol, Mode.RUN, phi, f0, calibration, warning)

    probe = make_probe(params, scc, model, angle_at=angle_at)

    def timed_probe(f: float) -> float:
        nonlocal t
        phi_p = angle_at(f)
        tangent = probe(f)
        t += config.dwell(f)
        trace.add(t, Mode.IDENTIFY, f, phi_p, math.atan(tangent), "probe")
        return tangent

    ident = two_step_identify(timed_probe, config.identify)
    if ident.fault:
        f_bad = ident.f_s_est if ident.f_s_est is not None else f0
        return fault(f_bad, phi, theta0, f"identification fault: {ident.diagnostic}", ident)

    f_op = ident.f_s_est
    try:
        loop = tune_to_target(params, scc, f_op, mode, config, model, phi0=angle_at(f_op), t0=t)
    except (SccRangeError, MeasurementSaturationError, DomainError) as exc:
        return fault(f_op, phi, theta0, f"tuning failed: {exc}", ident)
    trace.extend(loop.records)
    if not loop.converged:
        return fault(f_op, loop.phi, loop.theta, f"tuning did not converge within {config.max_iter} measurements", ident)
    trace.add(trace.t_end + 1.0 / f_op, Mode.RUN, f_op, loop.phi, loop.theta, f"{TuneMode(mode).value} reached")
    sol = _final_solution(params, scc, loop.phi, f_op, model)
    return SessionResult(trace, ident, sol, Mode.RUN, loop.phi, f_op, calibration, warning)
