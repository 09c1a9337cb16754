"""Secondary resonant-frequency identification from primary-side angles.

With the primary reactance nulled and ESRs neglected, the input-impedance
angle satisfies ``tan(theta) = (1/(w Cs) - w Ls) / Re``.  The ratio of two
such tangents eliminates ``Re`` and yields ``Ls*Cs`` in closed form, hence
the secondary resonance.  :func:`two_step_identify` wraps this in the
two-step perturb-and-observe band selection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import EstimationError, MeasurementSaturationError, SccRangeError

_K_DEGENERATE = 1e-6


def ideal_tangent(Ls: float, Cs: float, Re: float, f: float) -> float:
    """Signed input-angle tangent of the ideal (lossless primary) tank."""
    w = 2 * math.pi * f
    return (1.0 / (w * Cs) - w * Ls) / Re


@dataclass(frozen=True)
class ProbePair:
    f_m: float
    f_n: float
    tan_theta_m: float
    tan_theta_n: float

    @property
    def k_mn(self) -> float:
        return self.tan_theta_m / self.tan_theta_n

    @property
    def ls_cs_product(self) -> float:
        """``Ls*Cs`` implied by the pair (read-only by-product)."""
        wm = 2 * math.pi * self.f_m
        wn = 2 * math.pi * self.f_n
        k = self.k_mn
        return (wn - k * wm) / (wm * wn * (wm - k * wn))


def estimate_from_pair(f_m: float, f_n: float, tan_m: float, tan_n: float) -> float:
    """Secondary resonance in Hz from tangents measured at ``f_m`` and ``f_n``.

    Returns ``f_n`` when ``tan_n`` is exactly zero (the probe sits on the
    resonance).  Raises :class:`EstimationError` for indistinguishable probes
    or a non-positive radicand.
    """
    if f_m == f_n or f_m <= 0 or f_n <= 0:
        raise EstimationError(f"probe frequencies must be distinct and positive: {f_m}, {f_n}")
    if tan_n == 0.0:
        return f_n
    k = tan_m / tan_n
    if not math.isfinite(k) or abs(k - 1.0) < _K_DEGENERATE:
        raise EstimationError(f"tangent ratio k_mn={k!r} cannot separate the probes")
    wm = 2 * math.pi * f_m
    wn = 2 * math.pi * f_n
    radicand = wm * wn * (wm - k * wn) / (wn - k * wm)
    if not radicand > 0 or not math.isfinite(radicand):
        raise EstimationError(f"non-positive radicand {radicand!r} (k_mn={k!r})")
    return math.sqrt(radicand) / (2 * math.pi)


@dataclass(frozen=True)
class IdentifyConfig:
    first_band: tuple[float, float] = (84e3, 86e3)
    upper_band: tuple[float, float] = (86e3, 88e3)
    lower_band: tuple[float, float] = (84e3, 82e3)
    limits: tuple[float, float] = (79e3, 90e3)


def select_probe_band(
    estimate: float, config: IdentifyConfig = IdentifyConfig()
) -> Optional[tuple[float, float]]:
    """Second probe band for a first-step estimate, or ``None`` to accept it.

    Estimates on the first band's edges are accepted.
    """
    lo, hi = sorted(config.first_band)
    if estimate > hi:
        return config.upper_band
    if estimate < lo:
        return config.lower_band
    return None


@dataclass
class IdentificationResult:
    f_s_est: Optional[float]
    pairs_used: list[ProbePair] = field(default_factory=list)
    steps: int = 0
    in_band: bool = False
    fault: bool = True
    diagnostic: str = ""
    probes: int = 0
    first_estimate: Optional[float] = None

    @property
    def ls_cs_product(self) -> Optional[float]:
        return self.pairs_used[-1].ls_cs_product if self.pairs_used else None


ProbeFn = Callable[[float], float]


def two_step_identify(probe: ProbeFn, config: IdentifyConfig = IdentifyConfig()) -> IdentificationResult:
    """Two-step perturb-and-observe identification.

    ``probe(f)`` returns the signed angle tangent measured at ``f``.  Readings
    are cached, so a frequency shared by both bands is probed once.
    """
    readings: dict[float, float] = {}

    def read(f: float) -> float:
        if f not in readings:
            readings[f] = probe(f)
        return readings[f]

    result = IdentificationResult(f_s_est=None)

    def run_pair(band: tuple[float, float]) -> float:
        f_m, f_n = band
        result.steps += 1
        pair = ProbePair(f_m, f_n, read(f_m), read(f_n))
        result.pairs_used.append(pair)
        return estimate_from_pair(f_m, f_n, pair.tan_theta_m, pair.tan_theta_n)

    try:
        estimate = run_pair(config.first_band)
        result.first_estimate = estimate
        second = select_probe_band(estimate, config)
        if second is not None:
            estimate = run_pair(second)
    except (EstimationError, MeasurementSaturationError, SccRangeError) as exc:
        result.probes = len(readings)
        result.diagnostic = f"step {result.steps}: {exc}"
        return result

    lo, hi = config.limits
    result.f_s_est = estimate
    result.in_band = lo <= estimate <= hi
    result.fault = not result.in_band
    result.probes = len(readings)
    if result.fault:
        result.diagnostic = f"estimate {estimate / 1e3:.3f} kHz outside [{lo / 1e3:g}, {hi / 1e3:g}] kHz"
    return result
