"""Acceptance criteria 1-7 at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary under "acceptance criteria". Several criteria need full default
spectra, so the module takes a few minutes.
"""
import filecmp
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gaugeline import cli, units
from gaugeline.config import RunConfig
from gaugeline.dynamics import (Background, CouplingModel, accumulate_mode_amplitude, decay_rate, ev_to_rad_ns,
                                evolve_c1, prepare, spectrum_from_pipeline)
from gaugeline.io import read_csv
from gaugeline.oracle import (ANHARMONIC_BASELINE, ANHARMONIC_TOL, check_anharmonic_baseline,
                              check_convergence_order, check_hdot, check_markov, constant_detuning,
                              scaled_static_run)
from gaugeline.oscillator import adiabaticity_parameter
from gaugeline.potentials import (ALL_GAUGES, Gauge, SystemConfig, TimeGridSpec, build_time_grid, quadratic_fit,
                                  trajectory_scan, transit_time, unperturbed_omega)

QUOTED_UNPERTURBED = 6.3369e13  # s^-1
MHZ = 1e6  # frequencies are quoted as angular values in units of 1e6 s^-1
TARGETS = {("lorentz", "multipolar"): 10 * MHZ, ("lorentz", "coulomb"): 60 * MHZ,
           ("unperturbed", "lorentz"): 120 * MHZ}
BAND = 0.5


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _peaks(path):
    _, rows = read_csv(path)
    return {(r[0], r[1]): float(r[2]) for r in rows}


def _metas(out, background):
    peaks = {}
    for label in [g.value for g in ALL_GAUGES] + ["unperturbed"]:
        meta = dict(line.split("=", 1) for line in
                    (out / f"spectrum_{label}_{background}.csv.meta").read_text().splitlines())
        peaks[label] = float(meta["peak_omega_per_s"])
    return peaks


@pytest.fixture(scope="module")
def default_spectra(tmp_path_factory):
    """Full default spectrum runs with 1 and 8 workers."""
    out = {}
    for w in (1, 8):
        d = tmp_path_factory.mktemp(f"spectrum_w{w}")
        t0 = time.perf_counter()
        assert cli.run_spectrum(RunConfig(), d, workers=w) == cli.EXIT_OK
        out[w] = (d, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def background_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("compare")
    assert cli.run_compare(RunConfig(), d, workers=1) == cli.EXIT_OK
    return d


def _splittings(peaks):
    return {(a, b): peaks[a] - peaks[b] for a, b in TARGETS}


def _in_band(value, target):
    return abs(value - target) <= BAND * abs(target)


def test_criterion_1_unperturbed_peak(cfg):
    c0 = cfg.with_(N=0.0)
    t0 = time.perf_counter()
    pipe = prepare(Gauge.MULTIPOLAR, c0)
    res = spectrum_from_pipeline(pipe, Background.MULTIPOLAR_B)
    elapsed = time.perf_counter() - t0
    derived = math.sqrt(4 * units.ALPHA * units.HBAR_C / (units.ELECTRON_MASS * c0.l**3)) * units.HBAR_C / units.HBAR
    spacing = float(np.min(np.diff(res.omega_grid)))
    rel_quoted = res.peak_omega / QUOTED_UNPERTURBED - 1
    ok = abs(rel_quoted) < 5e-3 and abs(res.peak_omega - derived) <= spacing and elapsed < 300
    report(1, ok, f"peak = {res.peak_omega:.6e} s^-1, vs 6.3369e13: {rel_quoted:+.3%}, "
                  f"|peak - derived| = {abs(res.peak_omega - derived):.3g} (spacing {spacing:.3g}), "
                  f"{elapsed:.0f} s")
    assert res.peak_omega == pytest.approx(6.32e13, rel=1e-3)
    assert abs(rel_quoted) < 5e-3
    assert abs(res.peak_omega - derived) <= spacing
    assert elapsed < 300


def test_criterion_2_gauge_peak_shifts(cfg, default_spectra):
    d, elapsed = default_spectra[1]
    at_T = {lab: p for (lab, bg), p in _peaks(d / "peaks.csv").items() if bg == "multipolar"}
    by_tf = {"T": at_T}

    # same pipelines, accumulated to 0.5 T and 2 T
    T = transit_time(cfg)
    t0 = time.perf_counter()
    jobs = [(g.value, g, cfg) for g in ALL_GAUGES] + [("unperturbed", Gauge.MULTIPOLAR, cfg.with_(N=0.0))]
    pipes = {lab: prepare(g, c, 2 * T) for lab, g, c in jobs}
    for name, tf in (("0.5T", 0.5 * T), ("2T", 2 * T)):
        by_tf[name] = {lab: spectrum_from_pipeline(p, Background.MULTIPOLAR_B, tf).peak_omega
                       for lab, p in pipes.items()}
    elapsed += time.perf_counter() - t0

    split = {k: _splittings(v) for k, v in by_tf.items()}
    bands_T = all(_in_band(split["T"][k], v) for k, v in TARGETS.items())
    u_key = ("unperturbed", "lorentz")
    u_any = any(_in_band(s[u_key], TARGETS[u_key]) for s in split.values())
    p = at_T
    ordering = p["lorentz"] > p["multipolar"] > p["coulomb"] and p["unperturbed"] > p["lorentz"]
    # the band check is binding while +120 is reached at some t_f; otherwise the ordering is
    ok = bands_T if u_any else ordering
    detail = "; ".join(f"{tf}: L-M {s[('lorentz', 'multipolar')]:+.3e}, L-C {s[('lorentz', 'coulomb')]:+.3e}, "
                       f"U-L {s[u_key]:+.3e}" for tf, s in split.items())
    rule = "bands" if u_any else "ordering L > M > C, U > L"
    report(2, ok and elapsed < 7200, f"[{rule}] {detail} (s^-1)")
    assert elapsed < 7200
    if u_any:
        for k, v in TARGETS.items():
            assert _in_band(split["T"][k], v), (k, split["T"][k], v)
    else:
        assert p["lorentz"] > p["multipolar"] > p["coulomb"]
        assert p["unperturbed"] > p["lorentz"], (p["unperturbed"], p["lorentz"])


def test_criterion_3_adiabaticity(cfg):
    t = build_time_grid(cfg)
    worst, fd = {}, {}
    for g in ALL_GAUGES:
        worst[g] = adiabaticity_parameter(trajectory_scan(g, cfg, t)).max_r01
        fd[g] = check_hdot(g, cfg).residual
    ok = all(v < 1e-2 for v in worst.values()) and all(v < 0.01 for v in fd.values())
    report(3, ok, ", ".join(f"{g.value}: max r01 {worst[g]:.3e}, FD residual {fd[g]:.2e}" for g in ALL_GAUGES))
    for g in ALL_GAUGES:
        assert worst[g] < 1e-2
        assert fd[g] < 0.01


def test_criterion_4_background_smallness(background_run):
    _, rows = read_csv(background_run / "background_comparison.csv")
    shifts = {r[0]: abs(float(r[3])) for r in rows}
    p = _metas(background_run, "multipolar")
    labels = [g.value for g in ALL_GAUGES]
    smallest = min(abs(p[a] - p[b]) for i, a in enumerate(labels) for b in labels[i + 1:])
    ok = all(s < 0.1 * smallest for s in shifts.values())
    report(4, ok, ", ".join(f"{g}: |shift| {s:.3g}" for g, s in shifts.items())
           + f" (s^-1) vs 10% of {smallest:.3g}")
    for s in shifts.values():
        assert s < 0.1 * smallest


def _static_coupling(w0):
    return CouplingModel.physical(Background.MULTIPOLAR_B, lambda t: w0 * np.ones_like(np.asarray(t, float)))


def _static_gamma(coupling, w0):
    return float(decay_rate(np.zeros(1), np.full(1, w0), coupling)[0])


def test_criterion_5_property_suite(cfg, default_scans):
    results = {}

    # beta = 0: the three gauges give the same oscillator
    c = SystemConfig(beta=0.0, transit_ns=transit_time(cfg))
    worst = 0.0
    for t in np.linspace(0, transit_time(cfg), 21):
        fits = [quadratic_fit(g, c, t) for g in ALL_GAUGES]
        worst = max(worst, *(abs(f.omega / fits[0].omega - 1) for f in fits[1:]))
    results["beta0_collapse"] = (worst, worst <= 1e-10)

    # N = 0: x0 stays at the centre and omega at the unperturbed value
    c0 = cfg.with_(N=0.0)
    s0 = trajectory_scan(Gauge.LORENTZ, c0, build_time_grid(c0, TimeGridSpec(201, 2)))
    dev = float(np.max(np.abs(s0.omega / unperturbed_omega(cfg) - 1)))
    results["static_limit"] = (dev, dev <= 1e-10 and np.all(s0.x0 == 0.0))

    # mirror symmetry about closest approach
    mirror = 0.0
    for s in default_scans.values():
        xm = np.max(np.abs(s.x0))
        mirror = max(mirror, np.max(np.abs(s.x0 + s.x0[::-1])) / xm,
                     np.max(np.abs(s.omega / s.omega[::-1] - 1)))
    results["mirror"] = (mirror, mirror <= 1e-10)

    w0 = ev_to_rad_ns(unperturbed_omega(cfg))
    cp = _static_coupling(w0)
    gamma = _static_gamma(cp, w0)

    # conservation at 3/Gamma; +-2000 Gamma holds 99.97% of the line weight
    tf = 3 / gamma
    d = constant_detuning(w0, tf)
    dec = evolve_c1(d, cp, np.linspace(0.0, tf, 30001))
    x = np.concatenate([np.linspace(-2000, -20, 3000, endpoint=False), np.linspace(-20, 20, 6001),
                        np.linspace(20, 2000, 3001)[1:]])
    wk = w0 + gamma * x
    amp = accumulate_mode_amplitude(wk, d, dec, cp, tf)
    total = np.trapezoid(wk**2 * np.abs(amp) ** 2 / (2 * math.pi) ** 2, wk) + abs(dec.c1[-1]) ** 2
    results["conservation"] = (abs(total - 1), abs(total - 1) <= 0.01)

    # static Lorentzian: HWHM equals the amplitude decay rate, i.e. half the population rate
    tf = 20 / gamma
    d = constant_detuning(w0, tf)
    dec = evolve_c1(d, cp, np.linspace(0.0, tf, 20001))
    wk = w0 + gamma * np.linspace(-5, 5, 4001)
    S = wk**2 * np.abs(accumulate_mode_amplitude(wk, d, dec, cp, tf)) ** 2
    i = int(np.argmax(S))
    right = np.interp(0.5 * S[i], S[i:][::-1], wk[i:][::-1])
    left = np.interp(0.5 * S[i], S[:i + 1], wk[:i + 1])
    hwhm_rel = 0.5 * (right - left) / (0.5 * (2 * gamma)) - 1
    results["lorentzian_hwhm"] = (abs(hwhm_rel), abs(hwhm_rel) <= 0.02)

    # the two background couplings agree on resonance
    cm = CouplingModel.physical(Background.MINIMAL_COUPLING_B, lambda t: w0 * np.ones_like(np.asarray(t, float)))
    a, b = abs(cp.g(np.array([w0]), 0.0)[0]), abs(cm.g(np.array([w0]), 0.0)[0])
    results["resonance_equality"] = (abs(a / b - 1), abs(a / b - 1) <= 1e-12)

    ok = all(v[1] for v in results.values())
    report(5, ok, ", ".join(f"{k} {v[0]:.2e}{'' if v[1] else ' (!)'}" for k, v in results.items()))
    for k, (value, passed) in results.items():
        assert passed, (k, value)


def test_criterion_6_oracles(cfg):
    slope = check_markov(scaled_static_run())[0]
    order = check_convergence_order(cfg)
    base = check_anharmonic_baseline(cfg)
    ok = slope.residual < 0.05 and abs(order.value - 2) <= 0.2 and base.passed
    report(6, ok, f"Markov slope {slope.residual:.2%}, order {order.value:.4f}, "
                  f"gap baseline {base.value:.6g} (recorded {ANHARMONIC_BASELINE}, tol {ANHARMONIC_TOL})")
    assert slope.residual < 0.05
    assert abs(order.value - 2) <= 0.2
    assert base.passed


def test_criterion_7_determinism(default_spectra):
    (a, _), (b, _) = default_spectra[1], default_spectra[8]
    files = sorted(p.name for p in a.iterdir() if p.suffix == ".csv")
    same = sorted(p.name for p in b.iterdir() if p.suffix == ".csv") == files
    mismatched = [f for f in files if not filecmp.cmp(a / f, b / f, shallow=False)]
    ok = same and not mismatched and len(files) >= 6
    report(7, ok, f"{len(files)} CSVs compared between 1 and 8 workers, {len(mismatched)} differ")
    assert same and not mismatched
