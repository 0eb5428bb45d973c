"""Brute-force validators for the harmonic reduction, the adiabaticity matrix
element and the Weisskopf-Wigner decay.

None of these routines share code paths with the quantities they check:
eigenvalues come from a finite-difference Hamiltonian, dH/dt from explicit
time differences of that Hamiltonian, and decay from direct integration of
the amplitude equations against a discrete bath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal

from . import units
from .dynamics import CouplingModel, Detuning
from .errors import (DiscretizationError, HalvingConsistencyError, RecurrenceError,
                     StepSizeError)
from .potentials import (ClusterTrajectory, Gauge, SystemConfig, fit_at, quadratic_fit,
                         scalar_potential_at)

HBAR_NS = units.HBAR * 1e9


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_points: int = 4001
    n_modes: int = 0
    omega_window: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.n_points < 3:
            raise ValueError("need at least 3 grid points")

    @classmethod
    def around(cls, cfg: SystemConfig, n_points: int = 4001, margin: float = 0.05) -> "GridSpec":
        """Largest symmetric box keeping ``margin * l`` away from the fixed charges."""
        edge = cfg.l * (1 - margin)
        return cls(-edge, edge, n_points)

    @classmethod
    def wide(cls, cfg: SystemConfig, n_points: int = 4001, half_width: float | None = None) -> "GridSpec":
        """Box for quadratic-only potentials, which have no singularity to avoid."""
        w = 2 * cfg.l if half_width is None else half_width
        return cls(-w, w, n_points)

    def check(self, cfg: SystemConfig) -> None:
        limit = cfg.l * 0.95
        if self.x_min < -limit - 1e-12 or self.x_max > limit + 1e-12:
            raise ValueError("grid must stay at least 0.05 l away from the fixed charges")

    def points(self, n: int | None = None) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points if n is None else n)


def _kinetic_scale(mass: float) -> float:
    # (hbar c)^2 / (2 m) in eV nm^2
    return units.HBAR_C**2 / (2 * mass)


def _tridiagonal_levels(x: np.ndarray, U: np.ndarray, mass: float, n_levels: int):
    """Lowest levels of -(1/2m) d2/dx2 + U with Dirichlet walls at the grid ends."""
    h = x[1] - x[0]
    c = _kinetic_scale(mass) / h**2
    diag = 2 * c + U[1:-1]
    off = -c * np.ones(len(diag) - 1)
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_levels - 1))
    v = v / math.sqrt(h)
    # fix sign so that each state is positive where it peaks first
    for i in range(v.shape[1]):
        j = np.argmax(np.abs(v[:, i]) > 0.5 * np.max(np.abs(v[:, i])))
        if v[j, i] < 0:
            v[:, i] = -v[:, i]
    return w, v


PotentialFn = Callable[[np.ndarray, float], np.ndarray]


def gauge_potential(gauge: Gauge, cfg: SystemConfig, potential: str = "exact") -> PotentialFn:
    """U(x, t) on a grid: exact point-charge form for Lorentz/Coulomb, or the
    quadratic reduction (always used for the multipolar gauge)."""
    traj = ClusterTrajectory.from_config(cfg)

    if potential == "exact" and gauge is not Gauge.MULTIPOLAR:
        def fn(x, t):
            return scalar_potential_at(gauge, cfg, x, traj.position(t))
        return fn
    if potential not in ("exact", "quadratic"):
        raise ValueError("potential must be 'exact' or 'quadratic'")

    def quad(x, t):
        hp = fit_at(gauge, cfg, traj.position(t))
        return hp.phi0 + 0.5 * hp.k * (x - hp.x0) ** 2
    return quad


@dataclass
class EigenResult:
    energies: np.ndarray  # Richardson-extrapolated, eV
    energies_coarse: np.ndarray
    energies_fine: np.ndarray
    x: np.ndarray  # fine grid (interior points)
    vectors: np.ndarray  # fine-grid eigenvectors, normalised with sum |v|^2 dx = 1

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])


def eigensolve_potential(U: PotentialFn, t: float, spec: GridSpec, mass: float = units.ELECTRON_MASS,
                         n_levels: int = 3, rtol: float = 1e-6) -> EigenResult:
    x1 = spec.points()
    x2 = spec.points(2 * (spec.n_points - 1) + 1)
    e1, _ = _tridiagonal_levels(x1, U(x1, t), mass, n_levels)
    e2, v2 = _tridiagonal_levels(x2, U(x2, t), mass, n_levels)
    rich = (4 * e2 - e1) / 3
    scale = np.max(np.abs(rich[1:] - rich[0])) if n_levels > 1 else abs(rich[0])
    if np.max(np.abs(rich - e2)) > rtol * max(scale, np.max(np.abs(rich))):
        raise DiscretizationError(f"Richardson correction {np.max(np.abs(rich - e2)):.3g} eV exceeds tolerance")
    return EigenResult(rich, e1, e2, x2[1:-1], v2)


def grid_eigensolve(gauge: Gauge, cfg: SystemConfig, t: float, spec: GridSpec | None = None,
                    n_levels: int = 3, potential: str = "exact") -> EigenResult:
    """Lowest eigenvalues of the discretised Hamiltonian of one gauge at time t."""
    if spec is None:
        spec = GridSpec.around(cfg) if potential == "exact" and gauge is not Gauge.MULTIPOLAR else GridSpec.wide(cfg)
    if potential == "exact" and gauge is not Gauge.MULTIPOLAR:
        spec.check(cfg)
    return eigensolve_potential(gauge_potential(gauge, cfg, potential), t, spec, cfg.electron_mass, n_levels)


def convergence_order(U: PotentialFn, t: float, spec: GridSpec, mass: float = units.ELECTRON_MASS) -> float:
    """Observed order p of the level gap under successive halvings of the spacing."""
    gaps = []
    n = spec.n_points
    for _ in range(3):
        x = spec.points(n)
        e, _ = _tridiagonal_levels(x, U(x, t), mass, 2)
        gaps.append(e[1] - e[0])
        n = 2 * (n - 1) + 1
    return math.log2(abs(gaps[0] - gaps[1]) / abs(gaps[1] - gaps[2]))


@dataclass
class HdotResult:
    element: float  # |<0|dH/dt|1>| in eV/ns
    gap: float  # eV
    dt: float

    @property
    def r01(self) -> float:
        return self.element * HBAR_NS / self.gap**2


def hdot_matrix_element(U: PotentialFn, t: float, dt: float, spec: GridSpec,
                        mass: float = units.ELECTRON_MASS, rtol: float = 0.01) -> HdotResult:
    """|<0|(H(t+dt) - H(t-dt))/(2 dt)|1>| with grid eigenvectors of H(t).

    The kinetic term cancels in the difference, so only the potential enters.
    Repeated with dt/2; disagreement beyond ``rtol`` raises.
    """
    x = spec.points()
    e, v = _tridiagonal_levels(x, U(x, t), mass, 2)
    h = x[1] - x[0]
    xi = x[1:-1]

    def element(step):
        dU = (U(xi, t + step) - U(xi, t - step)) / (2 * step)
        return abs(float(np.sum(v[:, 0] * dU * v[:, 1]) * h))

    full, half = element(dt), element(dt / 2)
    scale = max(full, half)
    floor = 1e-12 * float(np.max(np.abs(U(xi, t)))) / dt
    if scale > floor and abs(full - half) > rtol * scale:
        raise HalvingConsistencyError(f"<0|dH/dt|1> changes from {full:.6g} to {half:.6g} when dt is halved")
    return HdotResult(element=half, gap=float(e[1] - e[0]), dt=dt / 2)


def finite_difference_hdot(gauge: Gauge, cfg: SystemConfig, t: float, dt: float,
                           spec: GridSpec | None = None, potential: str = "quadratic") -> HdotResult:
    """Numerical |<0|dH/dt|1>| for one gauge.

    The default uses the harmonic Hamiltonian rebuilt from fresh fits at
    t +- dt, so the result can be compared directly with the closed form.
    """
    if spec is None:
        spec = GridSpec.wide(cfg) if potential == "quadratic" else GridSpec.around(cfg)
    if potential == "exact" and gauge is not Gauge.MULTIPOLAR:
        spec.check(cfg)
    return hdot_matrix_element(gauge_potential(gauge, cfg, potential), t, dt, spec, cfg.electron_mass)


def harmonic_reference(gauge: Gauge, cfg: SystemConfig, t: float) -> float:
    """hbar omega from the quadratic fit, for comparison with grid gaps."""
    return quadratic_fit(gauge, cfg, t).omega


# -- discrete-mode bath -------------------------------------------------------------

@dataclass(frozen=True)
class ScaledSystem:
    """Dimensionless two-level emitter coupled to a finite set of modes.

    Mode frequencies are uniform over ``delta0 +- half_band``.  With
    ``flat_band`` every mode gets the resonant coupling and measure, which is
    the density the Markov reduction assumes.
    """

    coupling: CouplingModel
    delta0: float = 1.0
    half_band: float = 0.25
    n_modes: int = 201
    flat_band: bool = False
    delta_of_t: Callable | None = None
    nonadiabatic: Callable | None = None  # kappa(t) = <0|d1/dt>, real

    @property
    def mode_frequencies(self) -> np.ndarray:
        return np.linspace(self.delta0 - self.half_band, self.delta0 + self.half_band, self.n_modes)

    @property
    def spacing(self) -> float:
        """Mode spacing; a lone mode gets unit measure."""
        if self.n_modes == 1:
            return 1.0
        return 2 * self.half_band / (self.n_modes - 1)

    @property
    def recurrence_time(self) -> float:
        if self.n_modes == 1:
            return math.inf  # a single mode is a closed two-level system
        return 2 * math.pi / self.spacing

    def rabi_period(self, t: float = 0.0) -> float:
        """Period of |c1|^2 for one resonant mode: pi / (|g| sqrt(weight))."""
        return math.pi / float(np.abs(self.couplings(t)[0]) * math.sqrt(self.weights()[0]))

    def weights(self) -> np.ndarray:
        """Discretised measure omega^2 d omega / (2 pi)^2."""
        w = self.mode_frequencies
        if self.flat_band:
            w = np.full_like(w, self.delta0)
        return w**2 * self.spacing / (2 * math.pi) ** 2

    def couplings(self, t: float) -> np.ndarray:
        w = self.mode_frequencies
        if self.flat_band:
            w = np.full_like(w, self.delta0)
        return self.coupling.g(w, t)


@dataclass
class ModeEvolution:
    t: np.ndarray
    c1: np.ndarray
    c0k_final: np.ndarray
    mode_frequencies: np.ndarray
    weights: np.ndarray
    c0: np.ndarray | None = None
    norm: np.ndarray = field(default=None)

    @property
    def population(self) -> np.ndarray:
        return np.abs(self.c1) ** 2


def discrete_mode_evolution(system: ScaledSystem, t_max: float, n_samples: int = 2001,
                            rtol: float = 1e-10, atol: float = 1e-12) -> ModeEvolution:
    """Integrate the coupled emitter-mode amplitude equations directly.

    Variables are c1 and c_{0,k} in the interaction picture, so the only
    time dependence is exp(+-i(omega_k t - int Delta)).  With
    ``system.nonadiabatic`` the photon-number-conserving transitions
    (c0 <-> c1 and c_{1,k} <-> c_{0,k}) are switched on.
    """
    if t_max > system.recurrence_time / 3:
        raise RecurrenceError(f"t_max = {t_max} exceeds a third of the recurrence time {system.recurrence_time:.4g}")
    wk = system.mode_frequencies
    w = system.weights()
    M = len(wk)
    dfun = system.delta_of_t
    kappa = system.nonadiabatic
    full = kappa is not None

    if dfun is None:
        def theta(t):
            return system.delta0 * t
    else:
        from scipy.integrate import quad

        def theta(t):
            return quad(dfun, 0.0, t, limit=200, epsabs=1e-13, epsrel=1e-13)[0]

    def rhs(t, y):
        c1 = y[0]
        c0k = y[1:1 + M]
        g = system.couplings(t)
        th = theta(t)
        ph = np.exp(1j * (wk * t - th))
        dy = np.empty_like(y)
        dy[0] = -1j * np.sum(w * g * c0k * np.conj(ph))
        dy[1:1 + M] = -1j * g * c1 * ph
        if full:
            c0 = y[1 + M]
            c1k = y[2 + M:]
            kap = kappa(t)
            e = np.exp(-1j * th)
            dy[1 + M] = -kap * c1 * e
            dy[0] += kap * c0 / e
            dy[1:1 + M] += -kap * c1k * e
            dy[2 + M:] = kap * c0k / e
        return dy

    y0 = np.zeros(1 + M + (1 + M if full else 0), dtype=complex)
    y0[0] = 1.0
    ts = np.linspace(0.0, t_max, n_samples)
    sol = solve_ivp(rhs, (0.0, t_max), y0, method="DOP853", t_eval=ts, rtol=rtol, atol=atol)
    if not sol.success:
        raise StepSizeError(sol.message)
    Y = sol.y
    norm = np.abs(Y[0]) ** 2 + np.sum(w[:, None] * np.abs(Y[1:1 + M]) ** 2, axis=0)
    c0 = None
    if full:
        c0 = Y[1 + M]
        norm = norm + np.abs(c0) ** 2 + np.sum(w[:, None] * np.abs(Y[2 + M:]) ** 2, axis=0)
    return ModeEvolution(t=sol.t, c1=Y[0], c0k_final=Y[1:1 + M, -1], mode_frequencies=wk, weights=w,
                         c0=c0, norm=norm)


def scaled_coupling(gamma_rate: float, background=None, delta0: float = 1.0, mass: float = 1.0) -> CouplingModel:
    """Coupling whose Markov decay rate at delta0 equals ``gamma_rate``."""
    from .dynamics import Background

    background = Background.MULTIPOLAR_B if background is None else background
    # resonant |g|^2 = e^2/(4m) for both backgrounds, Gamma = delta0^2 |g|^2 / (4 pi)
    e2 = 16 * math.pi * mass * gamma_rate / delta0**2
    return CouplingModel(background, e2, mass, lambda t: delta0 * np.ones_like(np.asarray(t, dtype=float)))


def constant_detuning(delta0: float, t_end: float) -> Detuning:
    """Detuning object for a static emitter, usable by the production quadrature."""
    from .potentials import Gauge as _G

    t = np.array([0.0, 0.5 * t_end, t_end])
    return Detuning(_G.MULTIPOLAR, t, delta0, np.zeros(3), np.full(3, delta0))


def fit_log_slope(t: np.ndarray, y: np.ndarray, t_lo: float, t_hi: float) -> float:
    sel = (t >= t_lo) & (t <= t_hi)
    return float(-np.polyfit(t[sel], np.log(y[sel]), 1)[0])


# -- suite ----------------------------------------------------------------------------

# First measured N=0 relative excess of the full-potential gap over the harmonic
# omega at n_points=4001; kept as a regression baseline.
ANHARMONIC_BASELINE = 0.0710065
ANHARMONIC_TOL = 1e-4


@dataclass(frozen=True)
class OracleCheck:
    name: str
    value: float
    reference: float
    residual: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.residual) and self.residual <= self.bound)


ORACLE_COLUMNS = ("check", "value", "reference", "residual", "bound", "passed")


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def check_quadratic_gap(cfg: SystemConfig) -> OracleCheck:
    c0 = cfg.with_(N=0.0)
    gap = grid_eigensolve(Gauge.LORENTZ, c0, 0.0, potential="quadratic").gap
    w = harmonic_reference(Gauge.LORENTZ, c0, 0.0)
    return OracleCheck("quadratic_gap_N0", gap, w, _rel(gap, w), 1e-8)


def check_anharmonic_baseline(cfg: SystemConfig) -> OracleCheck:
    c0 = cfg.with_(N=0.0)
    gap = grid_eigensolve(Gauge.LORENTZ, c0, 0.0, potential="exact").gap
    rel = gap / harmonic_reference(Gauge.LORENTZ, c0, 0.0) - 1
    return OracleCheck("anharmonic_gap_N0", rel, ANHARMONIC_BASELINE, abs(rel - ANHARMONIC_BASELINE),
                       ANHARMONIC_TOL)


def check_convergence_order(cfg: SystemConfig) -> OracleCheck:
    c0 = cfg.with_(N=0.0)
    p = convergence_order(gauge_potential(Gauge.LORENTZ, c0, "exact"), 0.0, GridSpec.around(c0, 1001))
    return OracleCheck("convergence_order", p, 2.0, abs(p - 2.0), 0.2)


def check_gap_ordering(cfg: SystemConfig) -> OracleCheck:
    """Grid gaps at closest approach must be ordered like the fitted omegas."""
    tm = ClusterTrajectory.from_config(cfg).t_mid
    grid = [grid_eigensolve(g, cfg, tm, potential="quadratic").gap for g in (Gauge.LORENTZ, Gauge.COULOMB, Gauge.MULTIPOLAR)]
    fit = [harmonic_reference(g, cfg, tm) for g in (Gauge.LORENTZ, Gauge.COULOMB, Gauge.MULTIPOLAR)]
    same = list(np.argsort(grid)) == list(np.argsort(fit))
    return OracleCheck("gap_ordering_closest_approach", float(same), 1.0, 0.0 if same else 1.0, 0.0)


def check_hdot(gauge: Gauge, cfg: SystemConfig, dt: float = 1e-4) -> OracleCheck:
    from .oscillator import adiabaticity_parameter
    from .potentials import build_time_grid, trajectory_scan

    scan = trajectory_scan(gauge, cfg, build_time_grid(cfg))
    rep = adiabaticity_parameter(scan)
    fd = finite_difference_hdot(gauge, cfg, rep.argmax_t, dt).r01
    return OracleCheck(f"r01_fd_vs_closed_{gauge.value}", fd, rep.max_r01, _rel(fd, rep.max_r01), 0.01)


def check_hdot_static(cfg: SystemConfig, dt: float = 1e-4) -> OracleCheck:
    """With no cluster the Hamiltonian is frozen and the element is pure noise."""
    c0 = cfg.with_(N=0.0)
    res = finite_difference_hdot(Gauge.LORENTZ, c0, 0.5 * transit_time_of(c0), dt)
    return OracleCheck("hdot_N0", res.element, 0.0, res.element, 1e-9)


def breathing_potential(k0: float, rate: float) -> PotentialFn:
    """Synthetic well with fixed centre and spring constant k0 (1 + rate t)."""
    def U(x, t):
        return 0.5 * k0 * (1.0 + rate * t) * np.asarray(x) ** 2
    return U


def check_kdot_parity(cfg: SystemConfig, dt: float = 1e-4) -> OracleCheck:
    c0 = cfg.with_(N=0.0)
    hp = quadratic_fit(Gauge.LORENTZ, c0, 0.0)
    U = breathing_potential(hp.k, 1e-3)
    res = hdot_matrix_element(U, 0.0, dt, GridSpec.wide(c0), c0.electron_mass)
    scale = 0.5 * hp.k * 1e-3 * (units.HBAR_C / hp.gamma) ** 2  # natural size of dH/dt
    return OracleCheck("kdot_parity", res.element / scale, 0.0, res.element / scale, 1e-8)


def transit_time_of(cfg: SystemConfig) -> float:
    return ClusterTrajectory.from_config(cfg).duration


# dimensionless scaled bath: Gamma << bandwidth << delta0
SCALED_GAMMA = 0.005
SCALED_T_MAX = 300.0


def scaled_static_run(gamma_rate: float = SCALED_GAMMA, n_modes: int = 401, t_max: float = SCALED_T_MAX):
    cp = scaled_coupling(gamma_rate)
    sysm = ScaledSystem(cp, n_modes=n_modes, flat_band=True)
    return cp, sysm, discrete_mode_evolution(sysm, t_max, n_samples=601)


def check_rabi() -> OracleCheck:
    s = ScaledSystem(scaled_coupling(1e-3), half_band=0.0, n_modes=1)
    P = s.rabi_period()
    ev = discrete_mode_evolution(s, 1.5 * P, n_samples=3001)
    p, t = ev.population, ev.t
    sel = t > 0.5 * P
    i = int(np.argmax(np.where(sel, p, -1.0)))
    # parabolic refinement of the first revival
    y0, y1, y2 = p[i - 1], p[i], p[i + 1]
    h = t[1] - t[0]
    t_peak = t[i] + 0.5 * h * (y0 - y2) / (y0 - 2 * y1 + y2)
    return OracleCheck("rabi_period", t_peak, P, _rel(t_peak, P), 0.01)


def check_markov(run=None) -> list[OracleCheck]:
    from .dynamics import accumulate_mode_amplitude, decay_rate, evolve_c1

    cp, sysm, ev = scaled_static_run() if run is None else run
    t_max = float(ev.t[-1])
    gamma = float(decay_rate(np.zeros(1), np.full(1, sysm.delta0), cp)[0])
    slope = fit_log_slope(ev.t, ev.population, 0.02 * t_max, 0.5 * t_max)
    checks = [OracleCheck("decay_slope_vs_2gamma", slope, 2 * gamma, _rel(slope, 2 * gamma), 0.05)]

    d = constant_detuning(sysm.delta0, t_max)
    dec = evolve_c1(d, cp, np.linspace(0.0, t_max, 3001))
    wk = ev.mode_frequencies
    amp = accumulate_mode_amplitude(wk, d, dec, cp, t_max)
    g0 = float(np.abs(sysm.couplings(0.0)[0]))
    prof_prod = np.abs(amp) ** 2 / np.abs(cp.g(wk, 0.0)) ** 2
    prof_oracle = np.abs(ev.c0k_final) ** 2 / g0**2
    sel = np.abs(wk - sysm.delta0) <= 3 * gamma
    dev = float(np.max(np.abs(prof_prod[sel] / prof_oracle[sel] - 1)))
    checks.append(OracleCheck("lorentzian_profile", dev, 0.0, dev, 0.05))
    drift = float(np.max(np.abs(ev.norm - ev.norm[0])))
    checks.append(OracleCheck("mode_norm_drift", drift, 0.0, drift, 1e-6))
    return checks


def run_oracle_suite(cfg: SystemConfig, gauges=(Gauge.LORENTZ, Gauge.COULOMB, Gauge.MULTIPOLAR),
                     grid: bool = True, hdot: bool = True, modes: bool = True) -> list[OracleCheck]:
    """Every oracle bound, in a fixed order."""
    out: list[OracleCheck] = []
    if grid:
        out += [check_quadratic_gap(cfg), check_anharmonic_baseline(cfg), check_convergence_order(cfg),
                check_gap_ordering(cfg)]
    if hdot:
        out += [check_hdot(g, cfg) for g in gauges]
        out += [check_hdot_static(cfg), check_kdot_parity(cfg)]
    if modes:
        out += [check_rabi()] + check_markov()
    return out


def oracle_rows(checks: list[OracleCheck]):
    return [(c.name, float(c.value), float(c.reference), float(c.residual), float(c.bound), c.passed)
            for c in checks]
