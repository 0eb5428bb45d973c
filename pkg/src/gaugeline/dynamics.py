"""Weisskopf-Wigner decay of the excited instantaneous state and the transient
emission spectrum.

Internal units: time in ns, angular frequencies (and energies over hbar) in
rad/ns.  Reported frequencies are in s^-1 and the spectral density S is in s,
so that the integral of S over omega (s^-1) is the emitted probability.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from . import units
from .errors import ResolutionError, WindowError
from .io import ensure_finite
from .potentials import (Gauge, SystemConfig, TimeGridSpec, TrajectoryScan, build_time_grid,
                         extend_time_grid, trajectory_scan, transit_time, unperturbed_omega)

HBAR_NS = units.HBAR * 1e9  # eV ns


def ev_to_rad_ns(e):
    return np.asarray(e) / HBAR_NS if np.ndim(e) else e / HBAR_NS


def per_s_to_rad_ns(w):
    return np.asarray(w) * 1e-9 if np.ndim(w) else w * 1e-9


class Background(enum.Enum):
    MULTIPOLAR_B = "multipolar"
    MINIMAL_COUPLING_B = "minimal"

    @classmethod
    def parse(cls, name: str) -> "Background":
        key = name.strip().lower()
        aliases = {"multipolar": cls.MULTIPOLAR_B, "multipolarb": cls.MULTIPOLAR_B,
                   "minimal": cls.MINIMAL_COUPLING_B, "minimalcouplingb": cls.MINIMAL_COUPLING_B,
                   "minimal_coupling": cls.MINIMAL_COUPLING_B, "lorentz": cls.MINIMAL_COUPLING_B,
                   "coulomb": cls.MINIMAL_COUPLING_B}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown background gauge {name!r}") from None


ALL_BACKGROUNDS = (Background.MULTIPOLAR_B, Background.MINIMAL_COUPLING_B)


@dataclass(frozen=True)
class CouplingModel:
    """Dipole coupling of the 1-0 transition to a single x-polarised mode.

    ``omega_of_t`` gives the oscillator frequency omega_G(t), which fixes the
    width parameter gamma^2 = m omega.  All quantities in one frequency unit
    (rad/ns in production, dimensionless in the oracle).  The exp(i k.x0)
    factor is identically 1 because only k perpendicular to x contributes.
    """

    background: Background
    charge_sq: float
    mass: float
    omega_of_t: Callable

    @classmethod
    def physical(cls, background: Background, omega_of_t: Callable, mass_ev: float = units.ELECTRON_MASS):
        return cls(background, 4 * math.pi * units.ALPHA, ev_to_rad_ns(mass_ev), omega_of_t)

    def gamma_sq(self, t):
        return self.mass * self.omega_of_t(t)

    def time_factor(self, t):
        """Time-dependent part of |g|: 1/gamma (multipolar) or gamma (minimal coupling)."""
        gsq = self.gamma_sq(t)
        return 1 / np.sqrt(gsq) if self.background is Background.MULTIPOLAR_B else np.sqrt(gsq)

    def mode_factor(self, omega_k):
        e = math.sqrt(self.charge_sq)
        w = np.asarray(omega_k, dtype=float)
        if self.background is Background.MULTIPOLAR_B:
            return 0.5 * e * np.sqrt(w)
        return 0.5 * e / (self.mass * np.sqrt(w))

    def g(self, omega_k, t):
        """|g(omega_k, t)|, broadcasting over both arguments."""
        return self.mode_factor(omega_k) * self.time_factor(t)


# -- detuning and decay -------------------------------------------------------------

@dataclass
class Detuning:
    """Delta_G(t) on the scan nodes, stored relative to a reference frequency.

    ``offset`` = Delta - omega_ref in rad/ns; the residual phase
    int_0^t (omega_ref - Delta) ds comes from the exact antiderivative of the
    natural cubic spline through ``offset``.
    """

    gauge: Gauge
    t: np.ndarray
    omega_ref: float
    offset: np.ndarray
    omega: np.ndarray  # omega_G(t) in rad/ns, without Berry correction
    spline: CubicSpline = field(init=False, repr=False)
    _integral: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self.spline = CubicSpline(self.t, self.offset, bc_type="natural")
        self._integral = self.spline.antiderivative()

    def __call__(self, t):
        return self.omega_ref + self.spline(t)

    def residual_phase(self, t):
        return -(self._integral(t) - self._integral(self.t[0]))

    @property
    def values(self) -> np.ndarray:
        return self.omega_ref + self.offset


def detuning(scan: TrajectoryScan, gauge: Gauge | None = None, omega_ref_ev: float | None = None,
             berry: Callable | None = None) -> Detuning:
    """Instantaneous transition frequency Delta_G(t).

    Delta = omega_G plus the Berry-connection difference.  Multipolar
    eigenfunctions are real, so the correction vanishes there identically.
    For the other gauges ``berry`` may supply Im(<1|d1/dt> - <0|d0/dt>) in
    rad/ns; the default (None) leaves Delta = omega_G.
    """
    gauge = scan.gauge if gauge is None else gauge
    if omega_ref_ev is None:
        omega_ref_ev = float(scan.omega[0])
    offset = ev_to_rad_ns(scan.omega - omega_ref_ev)
    if berry is not None and gauge is not Gauge.MULTIPOLAR:
        offset = offset + np.asarray(berry(scan.t), dtype=float)
    return Detuning(gauge, scan.t.copy(), ev_to_rad_ns(omega_ref_ev), offset, ev_to_rad_ns(scan.omega))


def decay_rate(t, delta, coupling: CouplingModel):
    """Gamma(t) = Delta^2 |g(Delta, t)|^2 / (4 pi)  (amplitude decay rate).

    Markov limit of the mode integral with measure omega^2 d omega/(2 pi)^2
    and half of the delta function inside [0, t].
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ValueError("decay_rate needs a positive transition frequency")
    out = delta**2 * coupling.g(delta, t) ** 2 / (4 * math.pi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DecayState:
    t: float
    c1: complex
    theta_phase: float  # theta_1 - theta_0 = -int Delta
    berry_phase: float  # gamma_1 - gamma_0


@dataclass
class DecayTrajectory:
    t: np.ndarray
    c1: np.ndarray
    gamma_rate: np.ndarray
    theta_phase: np.ndarray
    berry_phase: np.ndarray

    def state(self, i: int) -> DecayState:
        return DecayState(float(self.t[i]), complex(self.c1[i]), float(self.theta_phase[i]),
                          float(self.berry_phase[i]))

    def __len__(self):
        return len(self.t)


def _cumulative_trapezoid(y, t):
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def evolve_c1(delta: Detuning | Callable, coupling: CouplingModel, time_grid,
              berry: Callable | None = None) -> DecayTrajectory:
    """c1(t) = exp(-int_0^t Gamma), starting from the excited state.

    Gamma is sampled on ``time_grid`` and integrated with the trapezoid rule
    (exact for constant rates).  The dynamic phase -int Delta and the Berry
    phase difference are accumulated alongside.
    """
    t = np.asarray(time_grid, dtype=float)
    d = np.asarray(delta(t), dtype=float)
    rate = np.asarray(decay_rate(t, d, coupling), dtype=float) * np.ones_like(t)
    c1 = np.exp(-_cumulative_trapezoid(rate, t))
    theta = -_cumulative_trapezoid(d, t)
    if berry is not None:
        bp = _cumulative_trapezoid(np.asarray(berry(t), dtype=float), t)
    else:
        bp = np.zeros_like(t)
    return DecayTrajectory(t=t, c1=c1.astype(complex), gamma_rate=rate, theta_phase=theta, berry_phase=bp)


# -- oscillatory quadrature -----------------------------------------------------------

_SMALL_Z = 1e-2
CHUNK = 256


@numba.njit(cache=True, nogil=True)
def _filon_kernel(t, amp, phase, delta, out):
    n = t.shape[0]
    for k in range(delta.shape[0]):
        dl = delta[k]
        acc = 0.0 + 0.0j
        p0 = phase[0] + dl * t[0]
        e0 = complex(math.cos(p0), math.sin(p0))
        for j in range(n - 1):
            h = t[j + 1] - t[j]
            p1 = phase[j + 1] + dl * t[j + 1]
            e1 = complex(math.cos(p1), math.sin(p1))
            a0 = amp[j]
            da = amp[j + 1] - a0
            z = (phase[j + 1] - phase[j]) + dl * h
            if abs(z) < _SMALL_Z:
                zz = 1j * z
                m0 = 1 + zz * (1 / 2 + zz * (1 / 6 + zz * (1 / 24 + zz / 120)))
                m1 = 1 / 2 + zz * (1 / 3 + zz * (1 / 8 + zz * (1 / 30 + zz / 144)))
                acc += h * e0 * (a0 * m0 + da * m1)
            else:
                inv = -1j / z  # 1/(iz)
                acc += h * (((a0 + da) * e1 - a0 * e0) * inv - da * (e1 - e0) * inv * inv)
            e0 = e1
        out[k] = acc


def _filon_panels(t, amp, phase, delta):
    """sum_j int_{t_j}^{t_j+1} A(t) exp(i (phase(t) + delta t)) dt for each delta.

    A and phase are linear on every panel, and each panel integral is exact
    for that interpolant.
    """
    out = np.empty(len(delta), dtype=np.complex128)
    _filon_kernel(t, amp, phase, np.ascontiguousarray(delta, dtype=np.float64), out)
    return out


def oscillatory_integral(t, amp, phase, delta, workers: int = 1) -> np.ndarray:
    """Vectorised Filon-type quadrature over fixed-size frequency chunks.

    Chunking does not depend on ``workers``, so results are identical for any
    worker count.
    """
    t = np.asarray(t, dtype=float)
    amp = np.asarray(amp, dtype=float)
    phase = np.asarray(phase, dtype=float)
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    chunks = [delta[i:i + CHUNK] for i in range(0, len(delta), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda c: _filon_panels(t, amp, phase, c), chunks))
    else:
        parts = [_filon_panels(t, amp, phase, c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0, complex)


def _nodes_until(t, t_f):
    if t_f <= t[0]:
        return t[:1]
    inside = t[t < t_f]
    return np.append(inside, t_f) if inside[-1] != t_f else inside


def accumulate_mode_amplitude(omega_k, delta: Detuning, decay: DecayTrajectory, coupling: CouplingModel,
                              t_f: float, workers: int = 1, verify: bool = False,
                              rtol: float = 1e-2) -> np.ndarray:
    """c_{0,k}(t_f) = -i int_0^t_f g(omega_k, t) c1(t) exp(i[omega_k t - int_0^t Delta]) dt.

    omega_k in rad/ns.  The integrand is handled as a slowly varying envelope
    times exp(i (omega_k - omega_ref) t), with the residual phase
    int (omega_ref - Delta) taken from the detuning spline.  With ``verify``
    the integral is repeated on every second node; a change larger than
    ``rtol`` of the largest amplitude raises ResolutionError.
    """
    omega_k = np.atleast_1d(np.asarray(omega_k, dtype=float))
    if t_f <= decay.t[0]:
        return np.zeros(omega_k.shape, complex)
    t = _nodes_until(decay.t, t_f)
    c1 = np.interp(t, decay.t, decay.c1.real)
    amp = c1 * coupling.time_factor(t)
    psi = delta.residual_phase(t)
    d = omega_k - delta.omega_ref
    raw = oscillatory_integral(t - t[0], amp, psi, d, workers=workers)
    # exp(i d t0) restores the absolute time origin when the grid does not start at 0
    out = -1j * coupling.mode_factor(omega_k) * raw * np.exp(1j * d * t[0])
    if verify and len(t) >= 5:
        sub = np.append(t[:-1:2], t[-1]) if (len(t) - 1) % 2 else t[::2]
        amp2 = np.interp(sub, t, amp)
        raw2 = oscillatory_integral(sub - t[0], amp2, delta.residual_phase(sub), d, workers=workers)
        out2 = -1j * coupling.mode_factor(omega_k) * raw2 * np.exp(1j * d * t[0])
        scale = np.max(np.abs(out))
        err = np.max(np.abs(out - out2))
        if scale > 0 and err > rtol * scale:
            raise ResolutionError(f"halving changes mode amplitudes by {err / scale:.3g} (relative to peak)")
    ensure_finite("accumulate_mode_amplitude", out)
    return out


# -- full spectrum ---------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaGridSpec:
    """Uniform grid of ``points`` over centre +- half_width plus a denser insert (s^-1)."""

    half_width: float = 2 * math.pi * 3e9
    points: int = 24001
    insert_half_width: float = 2 * math.pi * 150e6
    insert_factor: int = 10
    center: float | None = None

    def build(self, center: float) -> np.ndarray:
        c = self.center if self.center is not None else center
        offs = np.linspace(-self.half_width, self.half_width, self.points)
        if self.insert_factor > 1 and self.insert_half_width > 0:
            step = (2 * self.half_width / (self.points - 1)) / self.insert_factor
            n = int(round(self.insert_half_width / step))
            inner = step * np.arange(-n, n + 1)
            outer = offs[np.abs(offs) > inner[-1] + 0.5 * step]
            offs = np.concatenate([outer[outer < 0], inner, outer[outer > 0]])
        return c + offs


@dataclass
class SpectrumResult:
    omega_grid: np.ndarray  # s^-1
    amplitudes: np.ndarray  # c_{0,k}(t_f) in s^(3/2)
    S: np.ndarray  # s
    t_f: float  # ns
    gauge: Gauge
    background: Background
    peak_omega: float
    emitted_probability: float
    c1_final: complex
    omega_ref: float  # s^-1

    @property
    def remaining_probability(self) -> float:
        return abs(self.c1_final) ** 2


def spectral_density(omega_per_s, amplitudes_s):
    """S = omega^2 |c_{0,k}|^2 / (2 pi)^2."""
    return np.asarray(omega_per_s) ** 2 * np.abs(amplitudes_s) ** 2 / (2 * math.pi) ** 2


def peak_location(omega, S) -> float:
    """Vertex of the parabola through the maximum of S and its two neighbours."""
    i = int(np.argmax(S))
    if i == 0 or i == len(S) - 1:
        raise WindowError(f"spectral maximum at grid boundary (omega = {omega[i]!r} s^-1)")
    x = omega[i - 1:i + 2] - omega[i]
    y = S[i - 1:i + 2]
    den = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2])
    a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / den
    b = (x[2] ** 2 * (y[0] - y[1]) + x[1] ** 2 * (y[2] - y[0]) + x[0] ** 2 * (y[1] - y[2])) / den
    if a >= 0:
        return float(omega[i])
    return float(omega[i] - b / (2 * a))


@dataclass
class Pipeline:
    """Intermediate products of one external-gauge run, reusable across backgrounds."""

    cfg: SystemConfig
    gauge: Gauge
    scan: TrajectoryScan
    delta: Detuning


def prepare(gauge: Gauge, cfg: SystemConfig, t_f: float | None = None,
            time_spec: TimeGridSpec = TimeGridSpec(), berry: Callable | None = None) -> Pipeline:
    T = transit_time(cfg)
    t_f = T if t_f is None else t_f
    grid = build_time_grid(cfg, time_spec)
    if t_f != grid[-1]:
        grid = extend_time_grid(grid, t_f)
    scan = trajectory_scan(gauge, cfg, grid)
    ensure_finite("trajectory", scan.x0, scan.k, scan.omega)
    delta = detuning(scan, gauge, omega_ref_ev=unperturbed_omega(cfg), berry=berry)
    ensure_finite("detuning", delta.offset)
    return Pipeline(cfg, gauge, scan, delta)


def spectrum_from_pipeline(pipe: Pipeline, background: Background, t_f: float | None = None,
                           omega_grid=None, workers: int = 1, verify: bool = False) -> SpectrumResult:
    cfg = pipe.cfg
    t_f = float(pipe.scan.t[-1]) if t_f is None else float(t_f)
    omega_ref_s = pipe.delta.omega_ref * 1e9
    if omega_grid is None:
        omega_grid = OmegaGridSpec().build(omega_ref_s)
    omega_grid = np.asarray(omega_grid, dtype=float)
    om_spline = pipe.scan.omega_spline()
    coupling = CouplingModel.physical(background, lambda t: ev_to_rad_ns(om_spline(t)), cfg.electron_mass)
    decay = evolve_c1(pipe.delta, coupling, pipe.scan.t)
    ensure_finite("decay", decay.c1.real)
    amps = accumulate_mode_amplitude(per_s_to_rad_ns(omega_grid), pipe.delta, decay, coupling, t_f,
                                     workers=workers, verify=verify)
    amps_s = amps * 1e-9**1.5  # ns^(3/2) -> s^(3/2)
    S = spectral_density(omega_grid, amps_s)
    ensure_finite("spectrum", S)
    c1_f = complex(np.interp(t_f, decay.t, decay.c1.real))
    return SpectrumResult(omega_grid=omega_grid, amplitudes=amps_s, S=S, t_f=t_f, gauge=pipe.gauge,
                          background=background, peak_omega=peak_location(omega_grid, S),
                          emitted_probability=float(np.trapezoid(S, omega_grid)), c1_final=c1_f,
                          omega_ref=omega_ref_s)


def spectrum(gauge: Gauge, background: Background, cfg: SystemConfig, t_f: float | None = None,
             omega_grid=None, *, time_spec: TimeGridSpec = TimeGridSpec(), workers: int = 1,
             verify: bool = False, berry: Callable | None = None) -> SpectrumResult:
    """Transient emission spectrum accumulated until t_f (ns; default: transit time)."""
    pipe = prepare(gauge, cfg, t_f, time_spec, berry)
    return spectrum_from_pipeline(pipe, background, t_f, omega_grid, workers, verify)


@dataclass
class BackgroundComparison:
    multipolar: SpectrumResult
    minimal: SpectrumResult

    @property
    def difference(self) -> np.ndarray:
        """S(MultipolarB) - S(MinimalCouplingB) on the shared grid."""
        return self.multipolar.S - self.minimal.S

    @property
    def peak_shift(self) -> float:
        return self.multipolar.peak_omega - self.minimal.peak_omega


def compare_backgrounds(gauge: Gauge, cfg: SystemConfig, t_f: float | None = None, omega_grid=None, *,
                        time_spec: TimeGridSpec = TimeGridSpec(), workers: int = 1,
                        verify: bool = False) -> BackgroundComparison:
    pipe = prepare(gauge, cfg, t_f, time_spec)
    res = [spectrum_from_pipeline(pipe, b, t_f, omega_grid, workers, verify) for b in ALL_BACKGROUNDS]
    return BackgroundComparison(*res)


SPECTRUM_COLUMNS = ("omega_per_s", "S", "re_c0k", "im_c0k")


def spectrum_rows(res: SpectrumResult):
    return [(float(w), float(s), float(c.real), float(c.imag))
            for w, s, c in zip(res.omega_grid, res.S, res.amplitudes)]
