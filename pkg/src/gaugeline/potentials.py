"""Scalar potential of the trapped electron in the Lorentz, Coulomb and
multipolar gauges, and its instantaneous harmonic approximation.

Everything is expressed as the electron's potential energy q*phi (q = -e) in
eV, with x and the cluster position in nm.  The electron sits between two
fixed negative charges at x = +-l; a point cluster of N protons moves along a
line parallel to the wire at impact distance Y.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import units
from .errors import (ConfinementError, ConvergenceError, DomainError, GaugelineError,
                     MultipleRootsError)


class Gauge(enum.Enum):
    LORENTZ = "lorentz"
    COULOMB = "coulomb"
    MULTIPOLAR = "multipolar"

    @classmethod
    def parse(cls, name: str) -> "Gauge":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown gauge {name!r}") from None


ALL_GAUGES = (Gauge.LORENTZ, Gauge.COULOMB, Gauge.MULTIPOLAR)


@dataclass(frozen=True)
class SystemConfig:
    """Physical scenario.

    ``transit_ns`` overrides the kinematics only: when set, the cluster crosses
    the span in that time regardless of ``beta``.  This is what makes a moving
    cluster with beta = 0 gauge factors expressible.
    """

    N: float = 1e12
    beta: float = 0.1
    l: float = 6.33
    Y_over_l: float = 1e6
    span_Y: float = 100.0
    electron_mass: float = units.ELECTRON_MASS
    cluster_charge_sign: int = 1
    transit_ns: float | None = None

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ValueError("beta must satisfy 0 <= beta < 1")
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if not self.l > 0 or not self.Y_over_l > 0 or not self.span_Y > 0:
            raise ValueError("l, Y and span must be positive")
        if not self.electron_mass > 0:
            raise ValueError("electron mass must be positive")
        if self.cluster_charge_sign not in (1, -1):
            raise ValueError("cluster_charge_sign must be +1 or -1")
        if self.transit_ns is not None and not self.transit_ns > 0:
            raise ValueError("transit_ns must be positive")
        if self.beta == 0 and self.transit_ns is None:
            raise ValueError("beta = 0 needs an explicit transit_ns")

    @property
    def Y(self) -> float:
        return self.Y_over_l * self.l

    @property
    def contraction(self) -> float:
        """1 - beta^2."""
        return 1.0 - self.beta * self.beta

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ClusterTrajectory:
    """Straight-line motion L(t) = v (t - t_mid), from -span*Y at t=0 to +span*Y at t=T."""

    v: float  # nm/ns
    t_mid: float  # ns

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "ClusterTrajectory":
        half = cfg.span_Y * cfg.Y
        if cfg.transit_ns is not None:
            T = cfg.transit_ns
            v = 2 * half / T
        else:
            v = cfg.beta * units.C_NM_PER_NS
            T = 2 * half / v
        return cls(v=v, t_mid=T / 2)

    @property
    def duration(self) -> float:
        return 2 * self.t_mid

    def position(self, t):
        return self.v * (np.asarray(t) - self.t_mid) if np.ndim(t) else self.v * (t - self.t_mid)


def transit_time(cfg: SystemConfig) -> float:
    """Total transit duration T in ns."""
    return ClusterTrajectory.from_config(cfg).duration


@dataclass(frozen=True)
class HarmonicParams:
    gauge: Gauge
    t: float  # ns
    x0: float  # nm
    k: float  # eV / nm^2
    omega: float  # eV
    phi0: float  # eV, dynamically inert
    mass: float = units.ELECTRON_MASS

    @property
    def omega_per_s(self) -> float:
        return units.energy_to_angular_frequency(self.omega)

    @property
    def gamma(self) -> float:
        """sqrt(m omega) in eV (inverse oscillator length in natural units)."""
        return math.sqrt(self.mass * self.omega)


def omega_from_k(k, mass: float):
    """Oscillator energy hbar*omega in eV from a spring constant in eV/nm^2."""
    return units.HBAR_C * np.sqrt(np.asarray(k) / mass) if np.ndim(k) else units.HBAR_C * math.sqrt(k / mass)


def unperturbed_omega(cfg: SystemConfig) -> float:
    """hbar*omega (eV) of the two-fixed-charge trap alone: sqrt(4 alpha hbar c / (m l^3))."""
    return omega_from_k(4 * units.coulomb_coupling() / cfg.l**3, cfg.electron_mass)


# -- potential energy and its x-derivatives -------------------------------------

def _cluster_denominator_sq(gauge: Gauge, cfg: SystemConfig, d):
    if gauge is Gauge.COULOMB:
        return d * d + cfg.Y**2
    return d * d + cfg.contraction * cfg.Y**2


def _cluster_strength(gauge: Gauge, cfg: SystemConfig) -> float:
    # q * (charge of cluster) / 4pi for the electron, in eV nm
    s = -cfg.cluster_charge_sign * cfg.N * units.coulomb_coupling()
    if gauge is Gauge.MULTIPOLAR:
        s *= cfg.contraction
    return s


def cluster_gradient(gauge: Gauge, cfg: SystemConfig, x, L):
    """d/dx of the cluster part of the electron potential energy, eV/nm.

    For the multipolar gauge this is -q E_x of the moving charge.
    """
    d = x - L
    D2 = _cluster_denominator_sq(gauge, cfg, d)
    return -_cluster_strength(gauge, cfg) * d / (D2 * np.sqrt(D2))


def cluster_curvature(gauge: Gauge, cfg: SystemConfig, x, L):
    d = x - L
    D2 = _cluster_denominator_sq(gauge, cfg, d)
    D3 = D2 * np.sqrt(D2)
    return _cluster_strength(gauge, cfg) * (3 * d * d / (D3 * D2) - 1 / D3)


def fixed_potential(cfg: SystemConfig, x):
    a = units.coulomb_coupling()
    return a * (1 / (cfg.l + x) + 1 / (cfg.l - x))


def fixed_gradient(cfg: SystemConfig, x):
    a = units.coulomb_coupling()
    return a * (1 / (cfg.l - x) ** 2 - 1 / (cfg.l + x) ** 2)


def fixed_curvature(cfg: SystemConfig, x):
    a = units.coulomb_coupling()
    return 2 * a * (1 / (cfg.l + x) ** 3 + 1 / (cfg.l - x) ** 3)


def potential_gradient(gauge: Gauge, cfg: SystemConfig, x, L):
    """First-order Taylor coefficient of q*phi_G about x, eV/nm."""
    g = fixed_gradient(cfg, x)
    if cfg.N:
        g = g + cluster_gradient(gauge, cfg, x, L)
    return g


def potential_curvature(gauge: Gauge, cfg: SystemConfig, x, L):
    """Second derivative of q*phi_G at x, eV/nm^2 (twice the quadratic coefficient)."""
    k = fixed_curvature(cfg, x)
    if cfg.N:
        k = k + cluster_curvature(gauge, cfg, x, L)
    return k


def _exact_potential(gauge: Gauge, cfg: SystemConfig, x, L):
    u = fixed_potential(cfg, x)
    if cfg.N:
        D2 = _cluster_denominator_sq(gauge, cfg, x - L)
        u = u - cfg.cluster_charge_sign * cfg.N * units.coulomb_coupling() / np.sqrt(D2)
    return u


def _check_inside(cfg: SystemConfig, x):
    if np.any(np.abs(np.asarray(x)) >= cfg.l):
        raise DomainError(f"|x| must be < l = {cfg.l} nm (potential singular at the fixed charges)")


def scalar_potential_at(gauge: Gauge, cfg: SystemConfig, x, L, x0_guess: float = 0.0):
    """q*phi_G(x) for the cluster at position L (nm)."""
    _check_inside(cfg, x)
    if gauge is Gauge.MULTIPOLAR:
        hp = fit_at(gauge, cfg, L, x0_guess)
        return hp.phi0 + 0.5 * hp.k * (np.asarray(x) - hp.x0) ** 2
    return _exact_potential(gauge, cfg, x, L)


def scalar_potential(gauge: Gauge, cfg: SystemConfig, x, t: float):
    """Electron potential energy q*phi_G(x, t) in eV.

    Lorentz and Coulomb use the exact point-charge expressions.  The
    multipolar potential only exists here through its second-order expansion
    about the instantaneous equilibrium, so the quadratic reconstruction is
    returned for it.
    """
    L = ClusterTrajectory.from_config(cfg).position(t)
    return scalar_potential_at(gauge, cfg, x, L)


# -- equilibrium search -----------------------------------------------------------

ROOT_TOL = 1e-12  # nm
MAX_ITER = 100


def _count_roots(gauge: Gauge, cfg: SystemConfig, L, n: int = 401) -> np.ndarray:
    x = np.linspace(-cfg.l, cfg.l, n + 2)[1:-1]
    s = np.sign(potential_gradient(gauge, cfg, x, L))
    exact = x[s == 0]
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return np.sort(np.concatenate([exact, 0.5 * (x[idx] + x[idx + 1])]))


def find_equilibrium(gauge: Gauge, cfg: SystemConfig, L: float, x0_guess: float = 0.0,
                     tol: float = ROOT_TOL, max_iter: int = MAX_ITER) -> float:
    """Safeguarded Newton iteration for the zero of the potential gradient.

    The bracket starts as the whole trap (the gradient diverges to -inf at -l
    and +inf at +l) and shrinks around every evaluated point; a Newton step
    leaving the bracket is replaced by bisection.
    """
    if not -cfg.l < x0_guess < cfg.l:
        raise DomainError("x0_guess must lie inside (-l, l)")
    lo, hi = -cfg.l * (1 - 1e-12), cfg.l * (1 - 1e-12)
    x = x0_guess
    for _ in range(max_iter):
        g = potential_gradient(gauge, cfg, x, L)
        if g == 0.0:
            return x
        if g < 0:
            lo = x
        else:
            hi = x
        k = potential_curvature(gauge, cfg, x, L)
        step = g / k if k > 0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < tol:
            return x_new
        x = x_new
    raise ConvergenceError(f"equilibrium search did not converge in {max_iter} iterations (L={L} nm)")


def fit_at(gauge: Gauge, cfg: SystemConfig, L: float, x0_guess: float = 0.0, t: float = math.nan,
           check_roots: bool = False) -> HarmonicParams:
    """Harmonic parameters for the cluster at position L."""
    if check_roots:
        roots = _count_roots(gauge, cfg, L)
        if len(roots) > 1:
            dist = np.abs(roots - x0_guess)
            near = np.sort(dist)
            if math.isclose(near[0], near[1], rel_tol=1e-9, abs_tol=1e-12):
                raise MultipleRootsError(f"equidistant equilibria at {roots.tolist()} for guess {x0_guess}")
            x0_guess = float(roots[np.argmin(dist)])
    x0 = find_equilibrium(gauge, cfg, L, x0_guess)
    k = float(potential_curvature(gauge, cfg, x0, L))
    if not k > 0:
        raise ConfinementError(f"non-positive spring constant {k} eV/nm^2 at x0={x0} nm")
    if gauge is Gauge.MULTIPOLAR:
        # constant term: the Lienard-Wiechert (Lorentz) potential at the expansion point
        phi0 = float(_exact_potential(Gauge.LORENTZ, cfg, x0, L))
    else:
        phi0 = float(_exact_potential(gauge, cfg, x0, L))
    return HarmonicParams(gauge=gauge, t=t, x0=x0, k=k, omega=omega_from_k(k, cfg.electron_mass),
                          phi0=phi0, mass=cfg.electron_mass)


def quadratic_fit(gauge: Gauge, cfg: SystemConfig, t: float, x0_guess: float = 0.0,
                  check_roots: bool = True) -> HarmonicParams:
    """Equilibrium x0 and spring constant k of gauge ``gauge`` at time t (ns)."""
    L = ClusterTrajectory.from_config(cfg).position(t)
    return fit_at(gauge, cfg, L, x0_guess, t=t, check_roots=check_roots)


# -- trajectory scans -------------------------------------------------------------

@dataclass(frozen=True)
class TimeGridSpec:
    """Coarse uniform grid over the transit plus a refined central window.

    Spacing is uniform in the cluster coordinate u = L/Y; the refined window
    |u| <= refine_half_width_Y uses spacing coarse/refine_factor.
    """

    coarse_points: int = 4001
    refine_factor: int = 100
    refine_half_width_Y: float = 5.0
    t_end_ns: float | None = None  # defaults to the transit time

    def __post_init__(self):
        if self.coarse_points < 3 or self.refine_factor < 1 or self.refine_half_width_Y < 0:
            raise ValueError("invalid time grid spec")


def build_time_grid(cfg: SystemConfig, spec: TimeGridSpec = TimeGridSpec()) -> np.ndarray:
    """Strictly increasing times (ns), mirror-symmetric about closest approach."""
    traj = ClusterTrajectory.from_config(cfg)
    span = cfg.span_Y
    n_half = (spec.coarse_points - 1) // 2
    du = span / n_half
    coarse = du * np.arange(1, n_half + 1)
    w = min(spec.refine_half_width_Y, span)
    if spec.refine_factor > 1 and w > 0:
        fine_du = du / spec.refine_factor
        n_fine = int(round(w / fine_du))
        fine = fine_du * np.arange(1, n_fine + 1)
        coarse = coarse[coarse > fine[-1] + 0.5 * fine_du]
        pos = np.concatenate([fine, coarse])
    else:
        pos = coarse
    u = np.concatenate([-pos[::-1], [0.0], pos])
    t = traj.t_mid + u * (cfg.Y / traj.v)
    t[0], t[-1] = 0.0, traj.duration
    if spec.t_end_ns is not None and spec.t_end_ns != traj.duration:
        t = extend_time_grid(t, spec.t_end_ns)
    return t


def extend_time_grid(t: np.ndarray, t_end: float) -> np.ndarray:
    """Truncate or extend (with the final coarse spacing) a grid to end at t_end."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if t_end <= t[-1]:
        out = t[t < t_end]
        return np.append(out, t_end)
    dt = t[-1] - t[-2]
    n = int(math.ceil((t_end - t[-1]) / dt))
    extra = t[-1] + (t_end - t[-1]) * np.arange(1, n + 1) / n
    return np.concatenate([t, extra])


@dataclass
class TrajectoryScan:
    gauge: Gauge
    params: list[HarmonicParams]
    t: np.ndarray = field(init=False)
    x0: np.ndarray = field(init=False)
    k: np.ndarray = field(init=False)
    omega: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t = np.array([p.t for p in self.params])
        self.x0 = np.array([p.x0 for p in self.params])
        self.k = np.array([p.k for p in self.params])
        self.omega = np.array([p.omega for p in self.params])

    def x0_spline(self) -> CubicSpline:
        return CubicSpline(self.t, self.x0, bc_type="natural")

    def omega_spline(self) -> CubicSpline:
        return CubicSpline(self.t, self.omega, bc_type="natural")

    def k_spline(self) -> CubicSpline:
        return CubicSpline(self.t, self.k, bc_type="natural")

    def __len__(self):
        return len(self.params)


def trajectory_scan(gauge: Gauge, cfg: SystemConfig, time_grid: Sequence[float]) -> TrajectoryScan:
    """Continuation scan: each fit is seeded with the previous equilibrium."""
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("time_grid must be strictly increasing")
    traj = ClusterTrajectory.from_config(cfg)
    out = []
    guess = 0.0
    for i, ti in enumerate(t):
        try:
            hp = fit_at(gauge, cfg, traj.position(float(ti)), guess, t=float(ti), check_roots=(i == 0))
        except GaugelineError as exc:
            exc.t = float(ti)
            exc.args = (f"at t = {float(ti)!r} ns: {exc}",)
            raise
        out.append(hp)
        guess = hp.x0
    return TrajectoryScan(gauge, out)


TRAJECTORY_COLUMNS = ("t_ns", "gauge", "x0_nm", "k_eV_per_nm2", "omega_per_s", "phi0_eV")


def trajectory_rows(scans: Iterable[TrajectoryScan]):
    """Rows ordered by t, then by gauge in the order the scans were given."""
    scans = list(scans)
    if not scans:
        return []
    n = len(scans[0])
    rows = []
    for i in range(n):
        for s in scans:
            p = s.params[i]
            rows.append((p.t, p.gauge.value, p.x0, p.k, p.omega_per_s, p.phi0))
    return rows


def write_trajectory_csv(path, scans: Iterable[TrajectoryScan]) -> None:
    from .io import write_csv

    write_csv(path, TRAJECTORY_COLUMNS, trajectory_rows(scans))
