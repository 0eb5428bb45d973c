"""Command-line entry point: ``gaugeline <subcommand> [--config FILE] [--out DIR]``."""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .dynamics import (SPECTRUM_COLUMNS, Background, SpectrumResult, prepare, spectrum_from_pipeline,
                       spectrum_rows)
from .errors import ConfigError, GaugelineError
from .io import ensure_finite, output_dir, write_csv, write_metadata
from .oracle import ORACLE_COLUMNS, oracle_rows, run_oracle_suite
from .oscillator import ADIABATICITY_COLUMNS, adiabaticity_parameter, adiabaticity_rows
from .potentials import (TRAJECTORY_COLUMNS, Gauge, build_time_grid, trajectory_rows, trajectory_scan,
                         transit_time)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _meta(cfg: RunConfig, command: str, **extra) -> dict[str, object]:
    items: dict[str, object] = {"version": __version__, "command": command}
    items.update(extra)
    for k, v in cfg.items().items():
        if k in ("workers", "output_dir"):
            continue  # do not affect results; kept out so artifacts are worker-independent
        items[f"config.{k}"] = v
    return items


def _emit(out: Path, name: str, header, rows, meta: dict[str, object]) -> Path:
    path = write_csv(out / name, header, rows)
    write_metadata(out / (name + ".meta"), meta)
    return path


def _t_f(cfg: RunConfig) -> float:
    return transit_time(cfg.system) if cfg.t_f_ns is None else cfg.t_f_ns


def _grid_meta(cfg: RunConfig) -> dict[str, object]:
    return {k: v for k, v in cfg.items().items() if k.startswith(("omega_", "time_"))}


# -- subcommands -------------------------------------------------------------------

def _scans(cfg: RunConfig):
    sysc = cfg.system
    t = build_time_grid(sysc, cfg.time_spec)
    scans = []
    for g in cfg.gauge:
        s = trajectory_scan(g, sysc, t)
        ensure_finite(f"trajectory ({g.value})", s.x0, s.k, s.omega)
        scans.append(s)
    return scans


def run_trajectory(cfg: RunConfig, out: Path) -> int:
    scans = _scans(cfg)
    _emit(out, "trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(scans),
          _meta(cfg, "trajectory", gauge=",".join(g.value for g in cfg.gauge)))
    return EXIT_OK


def run_adiabaticity(cfg: RunConfig, out: Path) -> int:
    reports = [adiabaticity_parameter(s) for s in _scans(cfg)]
    for r in reports:
        ensure_finite(f"adiabaticity ({r.gauge.value})", r.r01)
    extra = {f"max_r01.{r.gauge.value}": r.max_r01 for r in reports}
    _emit(out, "adiabaticity.csv", ADIABATICITY_COLUMNS, adiabaticity_rows(reports),
          _meta(cfg, "adiabaticity", gauge=",".join(g.value for g in cfg.gauge), **extra))
    for r in reports:
        print(f"{r.gauge.value}: max r01 = {r.max_r01:.6g} at t = {r.argmax_t:.6g} ns")
    return EXIT_OK


def _spectra(cfg: RunConfig, gauges, backgrounds, workers: int) -> dict[tuple[str, Background], SpectrumResult]:
    """Spectra keyed by (gauge name or 'unperturbed', background), one pipeline per gauge."""
    sysc, t_f = cfg.system, _t_f(cfg)
    res = {}
    jobs = [(g.value, g, sysc) for g in gauges]
    jobs.append(("unperturbed", Gauge.MULTIPOLAR, sysc.with_(N=0.0)))
    for label, g, sc in jobs:
        pipe = prepare(g, sc, t_f, cfg.time_spec)
        grid = cfg.omega_spec.build(pipe.delta.omega_ref * 1e9)
        for b in backgrounds:
            res[(label, b)] = spectrum_from_pipeline(pipe, b, t_f, grid, workers, cfg.verify_resolution)
    return res


def _spectrum_name(label: str, b: Background) -> str:
    return f"spectrum_{label}_{b.value}.csv"


def _write_spectra(cfg: RunConfig, out: Path, spectra, command: str) -> None:
    for (label, b), r in spectra.items():
        _emit(out, _spectrum_name(label, b), SPECTRUM_COLUMNS, spectrum_rows(r),
              _meta(cfg, command, gauge=label, background=b.value, t_f_ns=r.t_f,
                    omega_ref_per_s=r.omega_ref, peak_omega_per_s=r.peak_omega, **_grid_meta(cfg)))


PEAK_COLUMNS = ("gauge", "background", "peak_omega_per_s", "emitted_probability", "remaining_probability")
DIFF_COLUMNS = ("background", "a", "b", "peak_a_minus_b_per_s")


def _peak_tables(cfg: RunConfig, spectra):
    labels = [g.value for g in cfg.gauge] + ["unperturbed"]
    peaks, diffs = [], []
    for b in cfg.background:
        for lab in labels:
            r = spectra[(lab, b)]
            peaks.append((lab, b.value, r.peak_omega, r.emitted_probability, r.remaining_probability))
        for a, c in itertools.combinations(labels, 2):
            if a == "unperturbed":
                continue
            if c == "unperturbed":
                a, c = c, a
            diffs.append((b.value, a, c, spectra[(a, b)].peak_omega - spectra[(c, b)].peak_omega))
    return peaks, diffs


def run_spectrum(cfg: RunConfig, out: Path, workers: int | None = None) -> int:
    workers = cfg.workers if workers is None else workers
    spectra = _spectra(cfg, cfg.gauge, cfg.background, workers)
    _write_spectra(cfg, out, spectra, "spectrum")
    peaks, diffs = _peak_tables(cfg, spectra)
    meta = _meta(cfg, "spectrum", t_f_ns=_t_f(cfg))
    _emit(out, "peaks.csv", PEAK_COLUMNS, peaks, meta)
    _emit(out, "peak_differences.csv", DIFF_COLUMNS, diffs, meta)
    for row in diffs:
        print(f"[{row[0]}] peak({row[1]}) - peak({row[2]}) = {row[3]:.6g} s^-1")
    return EXIT_OK


BACKGROUND_COLUMNS = ("gauge", "peak_multipolar_b_per_s", "peak_minimal_b_per_s", "shift_per_s",
                      "max_abs_S_difference")
DEVIATION_COLUMNS = ("t_ns", "gauge", "x0_minus_multipolar_nm", "omega_minus_multipolar_per_s")


def run_compare(cfg: RunConfig, out: Path, workers: int | None = None) -> int:
    """Gauge deviations of x0 and omega from the multipolar values, plus the background comparison."""
    workers = cfg.workers if workers is None else workers
    gauges = tuple(dict.fromkeys(cfg.gauge + (Gauge.MULTIPOLAR,)))
    scans = {s.gauge: s for s in _scans(cfg.with_(gauge=gauges))}
    ref = scans[Gauge.MULTIPOLAR]
    rows = []
    for i in range(len(ref.t)):
        for g in cfg.gauge:
            s = scans[g]
            rows.append((float(s.t[i]), g.value, float(s.x0[i] - ref.x0[i]),
                         float(s.params[i].omega_per_s - ref.params[i].omega_per_s)))
    _emit(out, "gauge_deviation.csv", DEVIATION_COLUMNS, rows, _meta(cfg, "compare-gauges"))

    backgrounds = (Background.MULTIPOLAR_B, Background.MINIMAL_COUPLING_B)
    spectra = _spectra(cfg, cfg.gauge, backgrounds, workers)
    _write_spectra(cfg, out, spectra, "compare-gauges")
    table = []
    for g in cfg.gauge:
        a, b = spectra[(g.value, backgrounds[0])], spectra[(g.value, backgrounds[1])]
        d = a.S - b.S
        ensure_finite("background comparison", d)
        table.append((g.value, a.peak_omega, b.peak_omega, a.peak_omega - b.peak_omega, float(np.max(np.abs(d)))))
        print(f"{g.value}: peak(multipolar B) - peak(minimal B) = {table[-1][3]:.6g} s^-1")
    _emit(out, "background_comparison.csv", BACKGROUND_COLUMNS, table,
          _meta(cfg, "compare-gauges", t_f_ns=_t_f(cfg)))
    return EXIT_OK


def run_oracle(cfg: RunConfig, out: Path) -> int:
    checks = run_oracle_suite(cfg.system, cfg.gauge, cfg.oracle_grid, cfg.oracle_hdot, cfg.oracle_modes)
    _emit(out, "oracle.csv", ORACLE_COLUMNS, oracle_rows(checks), _meta(cfg, "oracle"))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: residual {c.residual:.3g} (bound {c.bound:.3g})")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def _point_dir(axes, values) -> str:
    return "_".join(f"{n}={v!r}" for n, v in zip(axes, values))


def _sweep_point(cfg: RunConfig, axes, values, out: Path):
    """Run one sweep point; returns summary rows (without error column) or raises."""
    pcfg = cfg.with_(**dict(zip(axes, values)), sweep=())
    pdir = out / "points" / _point_dir(axes, values)
    spectra = _spectra(pcfg, pcfg.gauge, pcfg.background[:1], 1)
    _write_spectra(pcfg, pdir, spectra, "spectrum")
    scans = _scans(pcfg)
    r01 = {s.gauge: adiabaticity_parameter(s).max_r01 for s in scans}
    b = pcfg.background[0]
    rows = []
    for g in pcfg.gauge:
        r = spectra[(g.value, b)]
        rows.append((g.value, r.peak_omega, r.emitted_probability, r01[g]))
    return rows


def run_sweep(cfg: RunConfig, out: Path, workers: int | None = None) -> int:
    if not cfg.sweep:
        raise ConfigError("sweep needs at least one 'sweep.<param> = v1,v2,...' line")
    workers = cfg.workers if workers is None else workers
    axes = [name for name, _ in cfg.sweep]
    points = sorted(itertools.product(*(sorted(set(v)) for _, v in cfg.sweep)))

    def job(values):
        try:
            return _sweep_point(cfg, axes, values, out), None
        except (GaugelineError, ValueError) as exc:
            # the summary is a plain comma-separated file without quoting
            msg = " ".join(str(exc).split()).replace(",", ";")
            return None, f"{type(exc).__name__}: {msg}"

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(job, points))

    rows, failed = [], 0
    for values, (res, err) in zip(points, results):
        if err is not None:
            failed += 1
            for g in cfg.gauge:
                rows.append((*values, g.value, float("nan"), float("nan"), float("nan"), err))
        else:
            rows.extend((*values, *r, "") for r in res)
    header = (*axes, "gauge", "peak_omega_per_s", "emitted_probability", "max_r01", "error")
    text_rows = [tuple("nan" if isinstance(v, float) and v != v else v for v in r) for r in rows]
    _emit(out, "sweep_summary.csv", header, text_rows, _meta(cfg, "sweep"))
    if failed:
        print(f"{failed} of {len(points)} sweep points failed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "trajectory": run_trajectory,
    "adiabaticity": run_adiabaticity,
    "spectrum": run_spectrum,
    "compare-gauges": run_compare,
    "oracle": run_oracle,
    "sweep": run_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaugeline", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value config file (defaults apply to absent keys)")
    p.add_argument("--out", help="output directory (falls back to output_dir, then $GAUGELINE_OUT)")
    p.add_argument("--workers", type=int, help="worker threads; results do not depend on it")
    p.add_argument("--seedless", action="store_true",
                   help="reserved: the pipeline uses no random numbers, so this flag is rejected")
    p.add_argument("--version", action="version", version=f"gaugeline {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seedless:
        print("error: --seedless is reserved; the pipeline is deterministic and uses no RNG", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("workers must be >= 1", key="--workers")
            cfg = cfg.with_(workers=args.workers)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = output_dir(args.out, cfg.output_dir)
    try:
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GaugelineError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
