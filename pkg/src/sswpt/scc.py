"""Switch-controlled capacitor (SCC) model.

A capacitor ``Cp1`` is shunted by an anti-series MOSFET pair; the control
angle ``phi`` in ``[pi/2, pi)`` sets the fundamental-frequency equivalent
capacitance.  A fixed capacitor ``Cp0`` in series bounds the total.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.optimize import bisect

from .errors import DomainError, SccRangeError

PHI_MIN = math.pi / 2
PHI_MAX = math.pi - 1e-3


def scc_equivalent_capacitance(Cp1: float, phi: float) -> float:
    """Fundamental equivalent capacitance of the switched branch."""
    if not PHI_MIN <= phi <= PHI_MAX:
        raise DomainError(f"control angle {phi!r} outside [pi/2, {PHI_MAX!r}]")
    return math.pi * Cp1 / (2 * math.pi - 2 * phi + math.sin(2 * phi))


def effective_primary_capacitance(Cp0: float, Csc: float) -> float:
    """Series combination of the fixed and switched capacitors."""
    if not (Cp0 > 0 and Csc > 0):
        raise DomainError("capacitances must be positive")
    return Cp0 * Csc / (Cp0 + Csc)


def forward_capacitance(Cp0: float, Cp1: float, phi: float) -> float:
    """Commanded effective primary capacitance at control angle ``phi``."""
    return effective_primary_capacitance(Cp0, scc_equivalent_capacitance(Cp1, phi))


@dataclass(frozen=True)
class RangeCheck:
    passed: bool
    required: tuple[float, float]
    attainable: tuple[float, float]  # half-open: upper end is a supremum

    def __bool__(self) -> bool:
        return self.passed


def capacitance_range_check(Cp0: float, Cp1: float, Lp: float, f_min: float, f_max: float) -> RangeCheck:
    """Check that the SCC can null the primary reactance across a band.

    Passes iff ``[1/(w_max^2 Lp), 1/(w_min^2 Lp)]`` sits inside
    ``[Cp0*Cp1/(Cp0+Cp1), Cp0)``.  A zero-width band is allowed.
    """
    if not (Cp0 > 0 and Cp1 > 0 and Lp > 0 and f_min > 0 and f_max > 0):
        raise DomainError("all values must be positive")
    if f_min > f_max:
        raise DomainError("f_min must not exceed f_max")
    c_min = Cp0 * Cp1 / (Cp0 + Cp1)
    lo = 1.0 / ((2 * math.pi * f_max) ** 2 * Lp)
    hi = 1.0 / ((2 * math.pi * f_min) ** 2 * Lp)
    # 1e-12 relative slack so an endpoint computed two ways still counts as inside
    passed = lo >= c_min * (1 - 1e-12) and hi < Cp0
    return RangeCheck(passed, (lo, hi), (c_min, Cp0))


def angle_for_capacitance(target_Cp: float, Cp0: float, Cp1: float, rtol: float = 1e-10) -> float:
    """Control angle giving ``target_Cp``; bisection on the monotone forward map."""
    c_lo = forward_capacitance(Cp0, Cp1, PHI_MIN)
    c_hi = forward_capacitance(Cp0, Cp1, PHI_MAX)
    if math.isclose(target_Cp, c_lo, rel_tol=1e-12):
        return PHI_MIN
    if not c_lo <= target_Cp <= c_hi:
        raise SccRangeError(
            f"target {target_Cp:.6g} F outside attainable [{c_lo:.6g}, {c_hi:.6g}] F"
        )
    if target_Cp == c_hi:
        return PHI_MAX
    return bisect(
        lambda p: forward_capacitance(Cp0, Cp1, p) - target_Cp,
        PHI_MIN,
        PHI_MAX,
        xtol=1e-15,
        rtol=rtol * 1e-3,
        maxiter=200,
    )


def voltage_share(Cp0: float, Csc: float) -> float:
    """Fraction of the series-capacitor voltage carried by ``Cp0``."""
    return (1 / Cp0) / (1 / Cp0 + 1 / Csc)


@dataclass(frozen=True)
class SccState:
    """SCC hardware plus its present control angle.

    ``tolerance`` is the signed deviation of the realised capacitance from
    the commanded one.
    """

    Cp0: float
    Cp1: float
    phi: float = PHI_MIN
    tolerance: float = 0.0

    def __post_init__(self) -> None:
        if not (self.Cp0 > 0 and self.Cp1 > 0):
            raise DomainError("Cp0 and Cp1 must be positive")
        if not PHI_MIN <= self.phi <= PHI_MAX:
            raise DomainError(f"control angle {self.phi!r} outside [pi/2, {PHI_MAX!r}]")
        if abs(self.tolerance) > 0.1:
            raise DomainError(f"|tolerance| must not exceed 0.1, got {self.tolerance!r}")

    @property
    def Csc(self) -> float:
        return scc_equivalent_capacitance(self.Cp1, self.phi)

    @property
    def commanded(self) -> float:
        return effective_primary_capacitance(self.Cp0, self.Csc)

    @property
    def realized(self) -> float:
        return self.commanded * (1.0 + self.tolerance)

    @property
    def c_min(self) -> float:
        return self.Cp0 * self.Cp1 / (self.Cp0 + self.Cp1)

    @property
    def c_reachable(self) -> float:
        """Largest commanded capacitance inside the guarded angle range."""
        return forward_capacitance(self.Cp0, self.Cp1, PHI_MAX)

    def at(self, phi: float) -> "SccState":
        return replace(self, phi=phi)

    def with_tolerance(self, tolerance: float) -> "SccState":
        return replace(self, tolerance=tolerance)

    def angle_for(self, target_Cp: float) -> float:
        return angle_for_capacitance(target_Cp, self.Cp0, self.Cp1)

    def range_check(self, Lp: float, f_min: float, f_max: float) -> RangeCheck:
        return capacitance_range_check(self.Cp0, self.Cp1, Lp, f_min, f_max)
