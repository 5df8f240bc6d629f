"""Configuration parsing, batch sweep execution, CSV/manifest emission and
plot-script generation, plus the command-line entry point."""

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .models import ModelSpec
from .paulis import NumericalConsistencyError
from .scan import (
    DETECTORS,
    StepFilterConfig,
    SweepSpec,
    Window,
    extrapolate_to_zero_T,
    filter_finite_size_steps,
    finite_difference,
    locate_extremum,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3

# closed-form vs full-protocol agreement required in validation mode
VALIDATION_TOL = 1e-9


class ConfigError(Exception):
    """Malformed or out-of-range run configuration."""


@dataclass(frozen=True)
class SweepJob:
    spec: SweepSpec
    extrapolate: bool = False


@dataclass(frozen=True)
class RunConfig:
    output_dir: str
    jobs: tuple
    workers: int = 1
    validation_mode: bool = False
    emit_plot_scripts: bool = True


@dataclass
class ResultBundle:
    outdir: Path
    curve_files: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    extrapolations: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


def _require(mapping, key, path, types, default=None, required=False):
    if key not in mapping:
        if required:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return default
    val = mapping[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(f"{path}.{key}: expected {types}, got {type(val).__name__}")
    return val


def _check_unknown(mapping, allowed, path):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown} (allowed: {sorted(allowed)})")


def _parse_model(m, path):
    _check_unknown(m, {"family", "L", "delta", "h", "lam", "gamma"}, path)
    family = _require(m, "family", path, str, required=True)
    L = _require(m, "L", path, int, required=True)
    try:
        if family == "xxz":
            return ModelSpec.xxz(L, float(m.get("delta", 0.0)), float(m.get("h", 0.0)))
        if family == "xy":
            return ModelSpec.xy(L, float(m.get("lam", 0.0)), float(m.get("gamma", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.family: expected 'xxz' or 'xy', got {family!r}")


def _parse_sweep(s, idx):
    path = f"sweeps[{idx}]"
    allowed = {"name", "model", "param", "range", "step", "kt", "detectors",
               "windows", "step_filter", "extrapolate"}
    _check_unknown(s, allowed, path)
    name = _require(s, "name", path, str, required=True)
    model = _parse_model(_require(s, "model", path, dict, required=True), f"{path}.model")
    param = _require(s, "param", path, str, required=True)
    rng = _require(s, "range", path, list, required=True)
    if len(rng) != 2:
        raise ConfigError(f"{path}.range: expected [start, stop]")
    kts = _require(s, "kt", path, list, required=True)
    for kt in kts:
        if not isinstance(kt, (int, float)) or kt <= 0:
            raise ConfigError(f"{path}.kt: temperatures must be positive numbers, got {kt!r}")
    windows = []
    for widx, w in enumerate(s.get("windows", [])):
        wpath = f"{path}.windows[{widx}]"
        _check_unknown(w, {"lo", "hi", "order"}, wpath)
        try:
            windows.append(Window(lo=float(_require(w, "lo", wpath, (int, float), required=True)),
                                  hi=float(_require(w, "hi", wpath, (int, float), required=True)),
                                  order=int(w.get("order", 1))))
        except ValueError as exc:
            raise ConfigError(f"{wpath}: {exc}") from exc
    sf = s.get("step_filter", {})
    _check_unknown(sf, {"radius", "rel_height", "high_kt_min"}, f"{path}.step_filter")
    step_filter = StepFilterConfig(
        radius=float(sf.get("radius", 0.05)),
        rel_height=float(sf.get("rel_height", 0.2)),
        high_kt_min=float(sf.get("high_kt_min", 0.5)))
    try:
        spec = SweepSpec(
            model=model, param=param,
            start=float(rng[0]), stop=float(rng[1]),
            step=float(s.get("step", 0.01)),
            kts=tuple(float(kt) for kt in kts),
            detectors=tuple(s.get("detectors", list(DETECTORS))),
            windows=tuple(windows), step_filter=step_filter, name=name)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return SweepJob(spec=spec, extrapolate=bool(s.get("extrapolate", False)))


def parse_config_data(data):
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping")
    _check_unknown(data, {"output_dir", "workers", "validation_mode",
                          "emit_plot_scripts", "sweeps"}, "top level")
    output_dir = _require(data, "output_dir", "top level", str, required=True)
    workers = _require(data, "workers", "top level", int, default=1)
    if workers < 1:
        raise ConfigError("top level.workers: must be >= 1")
    sweeps = _require(data, "sweeps", "top level", list, default=[])
    jobs = tuple(_parse_sweep(s, i) for i, s in enumerate(sweeps))
    names = [j.spec.name for j in jobs]
    if len(set(names)) != len(names):
        raise ConfigError("sweeps: names must be unique")
    return RunConfig(
        output_dir=output_dir, jobs=jobs, workers=workers,
        validation_mode=bool(data.get("validation_mode", False)),
        emit_plot_scripts=bool(data.get("emit_plot_scripts", True)))


def parse_config(path):
    """Load and validate a YAML run configuration (strict: unknown keys fail)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return parse_config_data(data)


def config_to_data(config):
    """Inverse of parse_config_data (round-trips exactly)."""
    sweeps = []
    for job in config.jobs:
        spec = job.spec
        m = {"family": spec.model.family, "L": spec.model.L}
        if spec.model.family == "xxz":
            m.update(delta=spec.model.delta, h=spec.model.h)
        else:
            m.update(lam=spec.model.lam, gamma=spec.model.gamma)
        sweeps.append({
            "name": spec.name, "model": m, "param": spec.param,
            "range": [spec.start, spec.stop], "step": spec.step,
            "kt": list(spec.kts), "detectors": list(spec.detectors),
            "windows": [{"lo": w.lo, "hi": w.hi, "order": w.order} for w in spec.windows],
            "step_filter": {"radius": spec.step_filter.radius,
                            "rel_height": spec.step_filter.rel_height,
                            "high_kt_min": spec.step_filter.high_kt_min},
            "extrapolate": job.extrapolate,
        })
    return {"output_dir": config.output_dir, "workers": config.workers,
            "validation_mode": config.validation_mode,
            "emit_plot_scripts": config.emit_plot_scripts, "sweeps": sweeps}


def serialize_config(config):
    return yaml.safe_dump(config_to_data(config), sort_keys=False)


def _fmt(x):
    """Shortest round-trip decimal representation."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _curve_filename(sweep_name, detector, kt):
    return f"curve__{sweep_name}__{detector}__kT{_fmt(float(kt))}.csv"


def _run_job(job, config, bundle, tables):
    spec = job.spec
    curves = sweep(spec, mode="closed-form", workers=config.workers)
    if config.validation_mode:
        check = sweep(spec, mode="protocol", workers=config.workers)
        for a, b in zip(curves, check):
            if a.detector in DETECTORS:
                worst = float(np.max(np.abs(a.values - b.values)))
                if worst > VALIDATION_TOL:
                    raise NumericalConsistencyError(
                        f"sweep {spec.name}: closed-form vs protocol disagree by "
                        f"{worst:.3e} ({a.detector}, kT={a.kT})")
    for c in curves:
        fname = _curve_filename(spec.name, c.detector, c.kT)
        _write_csv(tables / fname, ["param_value", "value", "branch"],
                   list(zip(c.grid.tolist(), c.values.tolist(), c.branches)))
        bundle.curve_files.append(fname)
    if not spec.windows:
        return
    per_window_estimates = {}
    for det in (d for d in spec.detectors if d in DETECTORS):
        det_curves = [c for c in curves if c.detector == det]
        masks, _ = filter_finite_size_steps(det_curves, spec.step_filter)
        for w in spec.windows:
            ests = []
            for c in det_curves:
                dcurve = finite_difference(c, w.order)
                est = locate_extremum(dcurve, w, mask=masks.get(c.kT))
                ests.append(est)
                bundle.estimates.append([
                    spec.name, c.model_tag, c.L, c.kT, det, spec.param,
                    w.lo, w.hi, w.order, est.value, est.error])
            per_window_estimates[(det, w)] = ests
    if job.extrapolate:
        for (det, w), ests in per_window_estimates.items():
            if len(ests) >= 3:
                ex = extrapolate_to_zero_T(ests)
                bundle.extrapolations.append([
                    spec.name, det, w.lo, w.hi, w.order, ex.slope, ex.intercept,
                    ex.intercept_stderr, ex.predicted_qcp])


def run(config):
    """Execute all sweeps of a RunConfig; per-sweep failures are isolated and
    partial results preserved."""
    outdir = Path(config.output_dir)
    tables = outdir / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    bundle = ResultBundle(outdir=outdir)
    wall = {}
    for job in config.jobs:
        t0 = time.time()
        try:
            _run_job(job, config, bundle, tables)
        except NumericalConsistencyError:
            raise
        except Exception as exc:  # noqa: BLE001 - isolate per-sweep failures
            bundle.failures.append(f"{job.spec.name}: {type(exc).__name__}: {exc}")
        wall[job.spec.name] = round(time.time() - t0, 3)
    _write_csv(tables / "estimates.csv",
               ["sweep", "model", "L", "kT", "detector", "param",
                "window_lo", "window_hi", "order", "estimate", "error"],
               bundle.estimates)
    _write_csv(tables / "extrapolations.csv",
               ["sweep", "detector", "window_lo", "window_hi", "order",
                "slope", "intercept", "intercept_stderr", "predicted_qcp"],
               bundle.extrapolations)
    canonical = serialize_config(config)
    bundle.manifest = {
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "spinqcp_version": __version__,
        "numpy_version": np.__version__,
        "wall_times_s": wall,
        "failures": bundle.failures,
    }
    (outdir / "manifest.json").write_text(json.dumps(bundle.manifest, indent=2) + "\n")
    if config.emit_plot_scripts:
        emit_plot_scripts(bundle, config)
    return bundle


def emit_plot_scripts(bundle, config):
    """One gnuplot script per figure analogue, referencing tables by relative
    path; scripts carry no computed numbers."""
    plots = bundle.outdir / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    written = []
    for job in config.jobs:
        spec = job.spec
        for det in spec.detectors:
            files = [_curve_filename(spec.name, det, kt) for kt in spec.kts]
            missing = [f for f in files if f not in bundle.curve_files]
            if missing:
                raise FileNotFoundError(f"missing table(s) {missing} for sweep {spec.name}")
            lines = [
                "set datafile separator ','",
                f"set xlabel '{spec.param}'",
                f"set ylabel '{det}'",
                f"set title '{spec.name}: {det}'",
                "set key outside",
                "plot \\",
            ]
            plot_items = [
                f"  '../tables/{f}' using 1:2 with lines title 'kT={_fmt(float(kt))}'"
                for f, kt in zip(files, spec.kts)]
            lines.append(", \\\n".join(plot_items))
            path = plots / f"{spec.name}__{det}.gp"
            path.write_text("\n".join(lines) + "\n")
            written.append(path.name)
        if spec.windows:
            lines = [
                "set datafile separator ','",
                "set xlabel 'kT'",
                f"set ylabel 'estimated QCP ({spec.param})'",
                f"set title '{spec.name}: QCP estimates vs temperature'",
                "set key outside",
                # column 4 = kT, 10 = estimate, 11 = error bar
                f"plot '../tables/estimates.csv' using 4:10:11 with yerrorbars "
                f"title '{spec.name}'",
            ]
            path = plots / f"{spec.name}__estimates.gp"
            path.write_text("\n".join(lines) + "\n")
            written.append(path.name)
    return written


# bundled study configurations; L=12 runs take tens of minutes per core
_KT_ESTIMATES = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5]


def _repro(figure):
    sf = {"radius": 0.05, "rel_height": 0.2, "high_kt_min": 0.5}
    xxz0 = {"family": "xxz", "L": 12, "delta": 0.0, "h": 0.0}
    xxz12 = {"family": "xxz", "L": 12, "delta": 0.0, "h": 12.0}
    figures = {
        "fig1": [
            {"name": "xxz_h0_xx", "model": xxz0, "param": "delta",
             "range": [-2.0, 2.0], "step": 0.01, "kt": [0.01, 0.1, 0.5, 1.0],
             "detectors": ["xx"]},
            {"name": "xxz_h12_xx", "model": xxz12, "param": "delta",
             "range": [1.5, 5.5], "step": 0.01, "kt": [0.01, 0.1, 0.5, 1.0],
             "detectors": ["xx"]},
        ],
        "fig2": [
            {"name": f"xxz_h{h}_xx_L{L}",
             "model": {"family": "xxz", "L": L, "delta": 0.0, "h": float(h)},
             "param": "delta", "range": [-2.0, 2.0], "step": 0.01, "kt": [1.0],
             "detectors": ["xx"]}
            for h in (0, 12) for L in (4, 6, 8, 10, 12, 5, 7, 9, 11)
        ],
        "fig3": [
            {"name": "xxz_h0_fext", "model": xxz0, "param": "delta",
             "range": [-2.0, 2.0], "step": 0.01, "kt": [0.01, 1.0],
             "detectors": ["fext"]},
            {"name": "xxz_h12_fext", "model": xxz12, "param": "delta",
             "range": [1.5, 5.5], "step": 0.01, "kt": [0.01, 1.0],
             "detectors": ["fext"]},
        ],
        "fig4": [
            {"name": "xxz_h12_dint", "model": xxz12, "param": "delta",
             "range": [1.5, 5.5], "step": 0.01, "kt": [0.01, 1.0],
             "detectors": ["dint"]},
        ],
        "fig5": [
            {"name": f"xxz_h12_estimates_L{L}",
             "model": {"family": "xxz", "L": L, "delta": 0.0, "h": 12.0},
             "param": "delta", "range": [1.5, 5.5], "step": 0.01,
             "kt": _KT_ESTIMATES, "step_filter": sf,
             "windows": [{"lo": 1.7, "hi": 2.5, "order": 1},
                         {"lo": 4.0, "hi": 5.3, "order": 2}],
             "extrapolate": True}
            for L in (6, 8, 10, 12)
        ],
        "fig6": [
            {"name": f"xx_L{L}",
             "model": {"family": "xy", "L": L, "lam": 0.0, "gamma": 0.0},
             "param": "lam", "range": [0.0, 2.0], "step": 0.01,
             "kt": _KT_ESTIMATES, "step_filter": sf,
             "windows": [{"lo": 0.5, "hi": 1.5, "order": 1}],
             "extrapolate": True}
            for L in (8, 10, 12)
        ],
        "fig7": [
            {"name": f"xy_gamma05_L{L}",
             "model": {"family": "xy", "L": L, "lam": 0.0, "gamma": 0.5},
             "param": "lam", "range": [0.0, 2.0], "step": 0.01,
             "kt": _KT_ESTIMATES, "step_filter": sf,
             "windows": [{"lo": 0.5, "hi": 1.5, "order": 1}],
             "extrapolate": True}
            for L in (8, 10, 12)
        ],
        "fig8": [
            {"name": f"ising_L{L}",
             "model": {"family": "xy", "L": L, "lam": 0.0, "gamma": 1.0},
             "param": "lam", "range": [0.0, 2.0], "step": 0.01,
             "kt": _KT_ESTIMATES, "step_filter": sf,
             "windows": [{"lo": 0.5, "hi": 1.5, "order": 1},
                         {"lo": 0.5, "hi": 1.5, "order": 2}],
             "extrapolate": True}
            for L in (8, 10, 12)
        ],
        "fig9": [
            {"name": f"gamma_scan_L{L}",
             "model": {"family": "xy", "L": L, "lam": 1.5, "gamma": 0.0},
             "param": "gamma", "range": [-1.0, 1.0], "step": 0.01,
             "kt": [0.05, 0.5]}
            for L in (8, 10, 12)
        ],
    }
    if figure not in figures:
        raise ConfigError(f"unknown figure id {figure!r}; known: {sorted(figures)}")
    return {"output_dir": f"reproduce_{figure}", "workers": 1,
            "validation_mode": False, "emit_plot_scripts": True,
            "sweeps": figures[figure]}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="spinqcp",
        description="Teleportation-based QCP detection on finite thermal spin chains")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a sweep configuration")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate",
                           help="run a config with the closed-form/protocol cross-check")
    p_val.add_argument("config")
    p_rep = sub.add_parser("reproduce", help="emit a bundled study config and run it")
    p_rep.add_argument("figure")
    p_rep.add_argument("--config-only", action="store_true",
                       help="write the config file without running it")
    p_rep.add_argument("--outdir", default=None)
    args = parser.parse_args(argv)

    try:
        if args.command in ("run", "validate"):
            config = parse_config(args.config)
            if args.command == "validate":
                config = RunConfig(
                    output_dir=config.output_dir, jobs=config.jobs,
                    workers=config.workers, validation_mode=True,
                    emit_plot_scripts=config.emit_plot_scripts)
        else:
            data = _repro(args.figure)
            if args.outdir:
                data["output_dir"] = args.outdir
            config = parse_config_data(data)
            out = Path(config.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "config.yaml").write_text(yaml.safe_dump(data, sort_keys=False))
            if args.config_only:
                print(f"wrote {out / 'config.yaml'}")
                return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        bundle = run(config)
    except NumericalConsistencyError as exc:
        print(f"numerical consistency failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if bundle.failures:
        print("sweep failures:", file=sys.stderr)
        for f in bundle.failures:
            print(f"  {f}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
