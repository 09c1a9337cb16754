"""What the primary-side controller actually observes.

A probe nulls the primary reactance with the SCC, solves the full tank and
returns the impedance-angle tangent after three disturbances: SCC capacitance
tolerance, a frequency-dependent load shift and a zero-crossing timing error.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .errors import DomainError, MeasurementSaturationError
from .scc import SccState
from .tank import TankParams, input_impedance

DISTURBANCES = ("load", "scc", "zcd")


@dataclass(frozen=True)
class DisturbanceModel:
    """Measurement disturbances, each with an enable flag.

    ``load_dist`` is the fractional change of ``Re`` per kHz of probe offset
    from ``f_ref``.  The timing error always corrupts open-loop readings;
    ``zcd_in_self_check`` and ``zcd_in_tune`` decide whether it also reaches
    the two SCC regulation loops.
    """

    zcd_dt: float = 200e-9
    scc_tol: float = 0.02
    load_dist: float = 0.0
    f_ref: float = 85e3
    zcd_on: bool = True
    scc_on: bool = True
    load_on: bool = True
    zcd_in_self_check: bool = True
    zcd_in_tune: bool = False

    def __post_init__(self) -> None:
        if abs(self.zcd_dt) > 2e-6:
            raise DomainError(f"|zcd_dt| must not exceed 2 us, got {self.zcd_dt!r}")
        if abs(self.scc_tol) > 0.1:
            raise DomainError(f"|scc_tol| must not exceed 0.1, got {self.scc_tol!r}")
        if abs(self.load_dist) > 0.5:
            raise DomainError(f"|load_dist| must not exceed 0.5, got {self.load_dist!r}")
        if not self.f_ref > 0:
            raise DomainError("f_ref must be positive")

    @classmethod
    def none(cls) -> "DisturbanceModel":
        return cls(zcd_on=False, scc_on=False, load_on=False)

    def only(self, *names: str) -> "DisturbanceModel":
        """Copy with exactly the named disturbances enabled."""
        unknown = set(names) - set(DISTURBANCES)
        if unknown:
            raise DomainError(f"unknown disturbance(s): {sorted(unknown)}")
        return replace(self, load_on="load" in names, scc_on="scc" in names, zcd_on="zcd" in names)

    @property
    def effective_tolerance(self) -> float:
        return self.scc_tol if self.scc_on else 0.0

    def load_factor(self, f: float) -> float:
        if not self.load_on:
            return 1.0
        factor = 1.0 + self.load_dist * (f - self.f_ref) / 1e3
        if not factor > 0:
            raise DomainError(f"load model gives non-positive resistance at {f!r} Hz")
        return factor


def measured_phase(theta_true: float, f: float, model: DisturbanceModel) -> float:
    """Angle reported by the zero-crossing detector."""
    if not f > 0:
        raise DomainError(f"frequency must be positive, got {f!r}")
    if not model.zcd_on:
        return theta_true
    return theta_true + 2 * math.pi * f * model.zcd_dt


def realized_capacitance(commanded: float, model: DisturbanceModel) -> float:
    return commanded * (1.0 + model.effective_tolerance)


def probe_impedance_angle(
    params: TankParams,
    scc: Optional[SccState],
    f: float,
    model: DisturbanceModel,
    phi: Optional[float] = None,
) -> float:
    """Measured tangent of the input-impedance angle at probe frequency ``f``.

    Without ``phi`` the SCC is commanded to ``1/(w^2 Lp)`` from nominal
    values (``scc=None`` stands for an ideal compensator).  With ``phi`` the
    given control angle is applied instead, as a calibrated controller does.
    """
    if not f > 0:
        raise DomainError(f"frequency must be positive, got {f!r}")
    w = 2 * math.pi * f
    if phi is not None:
        if scc is None:
            raise DomainError("a control angle needs an SCC")
        c_cmd = scc.at(phi).commanded
    else:
        c_cmd = 1.0 / (w * w * params.Lp)
        if scc is not None:
            scc.angle_for(c_cmd)  # raises SccRangeError when unreachable
    probe_params = params.with_(
        Cp=realized_capacitance(c_cmd, model),
        Re=params.Re * model.load_factor(f),
    )
    theta_true = cmath.phase(input_impedance(probe_params, w))
    theta = measured_phase(theta_true, f, model)
    if abs(theta) >= math.pi / 2:
        raise MeasurementSaturationError(
            f"measured angle {math.degrees(theta):.2f} deg at {f:.1f} Hz has no finite tangent"
        )
    return math.tan(theta)


def make_probe(
    params: TankParams,
    scc: Optional[SccState],
    model: DisturbanceModel,
    angle_at: Optional[Callable[[float], float]] = None,
) -> Callable[[float], float]:
    """Bind a probe callback ``f -> tangent`` for the identifier.

    ``angle_at`` maps a frequency to a calibrated control angle; without it
    the nominal inverse is used.
    """

    def probe(f: float) -> float:
        phi = angle_at(f) if angle_at is not None else None
        return probe_impedance_angle(params, scc, f, model, phi=phi)

    return probe
