import math

import numpy as np
import pytest

from sswpt.scc import SccState
from sswpt.tank import TankParams, fha_load_resistance, mutual_inductance

TWO_PI = 2 * math.pi

LP1, LS1 = 119e-6, 92.23e-6
ALIGNED = dict(Lp=118.27e-6, Ls=91.95e-6, M=19.45e-6)
MISALIGNED = dict(Lp=118.30e-6, Ls=91.58e-6, M=11.78e-6)


def w(f):
    return TWO_PI * f


def table1_params(k=0.15, Re=10.0, delta=0.0, Up=40.0):
    return TankParams(
        Lp=LP1, Rp=0.3, Ls=LS1, Rs=0.3, M=mutual_inductance(k, LP1, LS1),
        Cs0=38.01e-9, Cp=29.46e-9, Re=Re, Up=Up, delta=delta,
    )


def table2_params(coil=ALIGNED, Cs=40.79e-9, R_dc=8.0, Rp=0.3, Rs=0.3):
    return TankParams(
        Lp=coil["Lp"], Rp=Rp, Ls=coil["Ls"], Rs=Rs, M=coil["M"], Cs0=Cs,
        Cp=1 / (w(85e3) ** 2 * coil["Lp"]), Re=fha_load_resistance(R_dc),
        Up=2 * math.sqrt(2) / math.pi * 40.0,
    )


def table2_scc():
    return SccState(Cp0=35.21e-9, Cp1=98.56e-9)


def mna_solve(p: TankParams, omega: float):
    """Modified nodal analysis of the SS tank; independent of the mesh solver.

    Nodes: 1 source, 2 after Rp, 3 after Cp (Lp to ground), 4 top of Ls,
    5 after Cs, 6 after Rs (Re to ground).  Returns (Zin, Ip, Is) with Is
    the current through Re.
    """
    s = 1j * omega
    n = 6
    Y = np.zeros((n + 1, n + 1), complex)
    b = np.zeros(n + 1, complex)

    def stamp(a, c, y):
        for i, j, v in ((a, a, y), (c, c, y), (a, c, -y), (c, a, -y)):
            if i and j:
                Y[i - 1, j - 1] += v

    stamp(1, 2, 1 / p.Rp)
    stamp(2, 3, s * p.Cp)
    stamp(4, 5, s * p.Cs)
    stamp(5, 6, 1 / p.Rs)
    stamp(6, 0, 1 / p.Re)
    gamma = np.linalg.inv(np.array([[p.Lp, p.M], [p.M, p.Ls]])) / s
    for a, na in enumerate((3, 4)):
        for c, nc in enumerate((3, 4)):
            Y[na - 1, nc - 1] += gamma[a, c]
    Y[0, n] = Y[n, 0] = 1.0
    b[n] = p.Up
    v = np.linalg.solve(Y, b)[:n]
    Ip = (v[0] - v[1]) / p.Rp
    Is = v[5] / p.Re
    return p.Up / Ip, Ip, Is


def bisect_root(fn, lo, hi, rel=1e-13, max_iter=200):
    """Plain bisection used as a brute-force oracle."""
    flo = fn(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0 or (hi - lo) < rel * abs(mid):
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture
def t1():
    return table1_params()


@pytest.fixture
def case1_params():
    return table2_params()


@pytest.fixture
def scc2():
    return table2_scc()
