"""Instantaneous eigensystem of the harmonic Hamiltonian and adiabaticity diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import eval_hermite

from . import units
from .errors import GridTooCoarseError
from .potentials import Gauge, HarmonicParams, TrajectoryScan


@dataclass(frozen=True)
class InstantaneousState:
    """Harmonic-oscillator eigenfunction |n_G(t)> centred at x0.

    ``gamma`` is sqrt(m omega) in eV; ``gamma_nm`` the same width parameter
    in nm^-1.  The PZW phase factor carried by the Lorentz and Coulomb states
    only affects the phase, so it is recorded as a tag and never evaluated.
    """

    n: int
    gamma: float
    x0: float
    gauge: Gauge
    t: float
    pzw_factor: str = "identity"

    @classmethod
    def from_params(cls, n: int, hp: HarmonicParams) -> "InstantaneousState":
        tag = "identity" if hp.gauge is Gauge.MULTIPOLAR else "U_G^dagger"
        return cls(n=n, gamma=hp.gamma, x0=hp.x0, gauge=hp.gauge, t=hp.t, pzw_factor=tag)

    @property
    def gamma_nm(self) -> float:
        return self.gamma / units.HBAR_C

    @property
    def norm(self) -> float:
        g = self.gamma_nm
        return math.sqrt(g / (math.sqrt(math.pi) * 2**self.n * math.factorial(self.n)))

    def wavefunction(self, x) -> np.ndarray:
        """Real amplitude on positions x (nm), normalised in nm^-1/2."""
        xi = self.gamma_nm * (np.asarray(x) - self.x0)
        return self.norm * np.exp(-0.5 * xi * xi) * eval_hermite(self.n, xi)


def eigenenergy(n: int, hp: HarmonicParams) -> float:
    """(n + 1/2) hbar omega_G(t) in eV."""
    if n < 0:
        raise ValueError("level index must be non-negative")
    return (n + 0.5) * hp.omega


def position_matrix_element(n: int, m: int, hp: HarmonicParams) -> float:
    """<n|(x - x0)|m> in nm, from the ladder-operator representation."""
    if n < 0 or m < 0:
        raise ValueError("level indices must be non-negative")
    if abs(n - m) != 1:
        return 0.0
    return math.sqrt(max(n, m)) * units.HBAR_C / (math.sqrt(2.0) * hp.gamma)


@dataclass
class AdiabaticityReport:
    gauge: Gauge
    t: np.ndarray
    r01: np.ndarray
    max_r01: float
    argmax_t: float

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.r01.tolist()))

    @property
    def r10(self) -> np.ndarray:
        return self.r01


def r01_closed_form(x0_dot, omega, mass: float):
    """|<0|dH/dt|1>| / (E1 - E0)^2 for a harmonic well translating at x0_dot (nm/ns).

    dH/dt = -k x0_dot (x - x0) + (k_dot/2)(x - x0)^2 and the second term has no
    0-1 element by parity, leaving |x0_dot/c| sqrt(m / (2 omega)).
    """
    beta0 = np.abs(x0_dot) / units.C_NM_PER_NS
    return beta0 * np.sqrt(mass / (2 * np.asarray(omega)))


def _r01_series(t, x0, omega, mass):
    return r01_closed_form(CubicSpline(t, x0, bc_type="natural")(t, 1), omega, mass)


def adiabaticity_parameter(hp_series: Sequence[HarmonicParams] | TrajectoryScan,
                           check: bool = True, rtol: float = 0.01) -> AdiabaticityReport:
    """r01(t) along a scan, with x0_dot from a natural cubic spline.

    With ``check`` the peak value is recomputed from every other sample and
    must agree within ``rtol``; otherwise GridTooCoarseError is raised.
    """
    scan = hp_series if isinstance(hp_series, TrajectoryScan) else TrajectoryScan(
        hp_series[0].gauge, list(hp_series))
    mass = scan.params[0].mass
    r = _r01_series(scan.t, scan.x0, scan.omega, mass)
    i = int(np.argmax(r))
    max_r = float(r[i])
    if check and max_r > 0 and len(scan.t) >= 7:
        sub = slice(None, None, 2)
        t_half = scan.t[sub]
        if t_half[-1] != scan.t[-1]:
            t_half = np.append(t_half, scan.t[-1])
            x_half = np.append(scan.x0[sub], scan.x0[-1])
        else:
            x_half = scan.x0[sub]
        coarse = r01_closed_form(CubicSpline(t_half, x_half, bc_type="natural")(scan.t[i], 1),
                                 scan.omega[i], mass)
        if abs(coarse - max_r) > rtol * max_r:
            raise GridTooCoarseError(
                f"peak r01 changes from {coarse:.6g} to {max_r:.6g} under grid refinement")
    return AdiabaticityReport(gauge=scan.gauge, t=scan.t, r01=r, max_r01=max_r, argmax_t=float(scan.t[i]))


ADIABATICITY_COLUMNS = ("t_ns", "gauge", "r01")


def adiabaticity_rows(reports: Sequence[AdiabaticityReport]):
    rows = []
    for i in range(len(reports[0].t)):
        for rep in reports:
            rows.append((float(rep.t[i]), rep.gauge.value, float(rep.r01[i])))
    return rows
