"""Fundamental-harmonic steady state of a series-series compensated WPT tank.

All phasors are RMS with an ``exp(+j*omega*t)`` convention, so inductive
reactance is positive imaginary.  Functions are pure and scalar.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

from .errors import DomainError, SingularSystemError

_COUPLING_SLACK = 1e-12


def resonant_frequency(L: float, C: float) -> float:
    """Angular resonant frequency ``1/sqrt(L*C)`` in rad/s."""
    if not (L > 0 and C > 0):
        raise DomainError(f"resonant_frequency needs L > 0 and C > 0, got L={L!r}, C={C!r}")
    return 1.0 / math.sqrt(L * C)


def detuned_secondary_capacitance(Cs0: float, delta: float) -> float:
    """Secondary capacitance after a fractional deviation ``delta`` from ``Cs0``."""
    if not Cs0 > 0:
        raise DomainError(f"Cs0 must be positive, got {Cs0!r}")
    if not 1.0 + delta > 0:
        raise DomainError(f"1 + delta must be positive, got delta={delta!r}")
    return Cs0 * (1.0 + delta)


def coupling_coefficient(M: float, Lp: float, Ls: float) -> float:
    """Magnetic coupling ``k = M / sqrt(Lp*Ls)``; raises if k > 1."""
    if not (Lp > 0 and Ls > 0):
        raise DomainError("Lp and Ls must be positive")
    if M < 0:
        raise DomainError(f"M must be non-negative, got {M!r}")
    k = M / math.sqrt(Lp * Ls)
    if k > 1.0 + _COUPLING_SLACK:
        raise DomainError(f"coupling coefficient {k:.6g} exceeds 1")
    return k


def mutual_inductance(k: float, Lp: float, Ls: float) -> float:
    """Inverse of :func:`coupling_coefficient`."""
    if not 0.0 <= k <= 1.0:
        raise DomainError(f"k must lie in [0, 1], got {k!r}")
    return k * math.sqrt(Lp * Ls)


def fha_load_resistance(R_dc: float) -> float:
    """AC-equivalent resistance ``8/pi^2 * R_dc`` seen by a diode-bridge rectifier."""
    if not R_dc > 0:
        raise DomainError(f"dc load must be positive, got {R_dc!r}")
    return 8.0 / math.pi**2 * R_dc


@dataclass(frozen=True)
class TankParams:
    """Electrical description of the SS-WPT tank.

    ``Cp`` is the effective primary capacitance, either a fixed part or the
    value realised by the SCC.  ``Cs0`` is the nominal secondary capacitor and
    ``delta`` its fractional deviation.  ``Up`` is the RMS fundamental of the
    inverter output voltage.
    """

    Lp: float
    Rp: float
    Ls: float
    Rs: float
    M: float
    Cs0: float
    Cp: float
    Re: float
    Up: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("Lp", "Ls", "Cp", "Cs0", "Re"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("Rp", "Rs", "Up", "M"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.M > math.sqrt(self.Lp * self.Ls) * (1.0 + _COUPLING_SLACK):
            raise DomainError("M exceeds sqrt(Lp*Ls)")
        if not -0.5 <= self.delta <= 0.5:
            raise DomainError(f"delta must lie in [-0.5, 0.5], got {self.delta!r}")

    @property
    def Cs(self) -> float:
        return detuned_secondary_capacitance(self.Cs0, self.delta)

    @property
    def k(self) -> float:
        return coupling_coefficient(self.M, self.Lp, self.Ls)

    @property
    def fs(self) -> float:
        """Secondary natural resonance in Hz."""
        return resonant_frequency(self.Ls, self.Cs) / (2 * math.pi)

    @property
    def fp(self) -> float:
        """Primary natural resonance in Hz."""
        return resonant_frequency(self.Lp, self.Cp) / (2 * math.pi)

    def with_(self, **changes) -> "TankParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PhasorSolution:
    omega: float
    Ip: complex
    Is: complex
    Zin: complex
    theta: float
    eta: float
    pf: float
    Pout: float
    Xp: float
    Xs: float

    @property
    def f(self) -> float:
        return self.omega / (2 * math.pi)

    @property
    def Pin(self) -> float:
        return (self.Zin.real * abs(self.Ip) ** 2)


def _check_omega(omega: float) -> None:
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega!r}")


def reactances(params: TankParams, omega: float) -> tuple[float, float]:
    """Net loop reactances ``(Xp, Xs)`` of the primary and secondary meshes."""
    _check_omega(omega)
    Xp = omega * params.Lp - 1.0 / (omega * params.Cp)
    Xs = omega * params.Ls - 1.0 / (omega * params.Cs)
    return Xp, Xs


def input_impedance(params: TankParams, omega: float) -> complex:
    """Closed-form input impedance: primary loop plus reflected secondary."""
    Xp, Xs = reactances(params, omega)
    Rsec = params.Rs + params.Re
    den = Rsec**2 + Xs**2
    wm2 = (omega * params.M) ** 2
    return complex(params.Rp + wm2 * Rsec / den, Xp - wm2 * Xs / den)


def _efficiency(params: TankParams, omega: float, Xs: float) -> float:
    Rsec = params.Rs + params.Re
    wm2 = (omega * params.M) ** 2
    num = wm2 * params.Re
    if num == 0.0:
        return 0.0
    return num / ((Rsec**2 + Xs**2) * params.Rp + wm2 * Rsec)


def transfer_metrics(params: TankParams, omega: float) -> tuple[float, float, float]:
    """Return ``(eta, pf, Pout)`` at ``omega``.

    ``eta`` is the ac-ac efficiency, which does not depend on ``Xp``.
    """
    Xp, Xs = reactances(params, omega)
    eta = _efficiency(params, omega, Xs)
    Zin = input_impedance(params, omega)
    pf = Zin.real / abs(Zin)
    Ip = params.Up / Zin
    Is = -1j * omega * params.M * Ip / complex(params.Rs + params.Re, Xs)
    return eta, pf, abs(Is) ** 2 * params.Re


def solve_tank(params: TankParams, omega: float) -> PhasorSolution:
    """Solve the two-mesh KVL system for the coil currents at ``omega``.

    Uses direct elimination of the 2x2 complex system; the closed forms in
    :func:`input_impedance` and :func:`transfer_metrics` are kept separate so
    they can cross-check this path.
    """
    Xp, Xs = reactances(params, omega)
    z11 = complex(params.Rp, Xp)
    z12 = 1j * omega * params.M
    z22 = complex(params.Rs + params.Re, Xs)
    det = z11 * z22 - z12 * z12
    scale = max(abs(z11 * z22), abs(z12 * z12), 1e-300)
    if abs(det) <= 1e-14 * scale:
        raise SingularSystemError(f"KVL matrix is singular at omega={omega:.6g} rad/s")
    Up = complex(params.Up)
    Ip = Up * z22 / det
    Is = -z12 * Up / det
    Zin = det / z22
    theta = cmath.phase(Zin)
    pf = math.cos(theta)
    return PhasorSolution(
        omega=omega,
        Ip=Ip,
        Is=Is,
        Zin=Zin,
        theta=theta,
        eta=_efficiency(params, omega, Xs),
        pf=pf,
        Pout=abs(Is) ** 2 * params.Re,
        Xp=Xp,
        Xs=Xs,
    )
