"""Command-line front end: ``solve``, ``kinetic-sweep`` and ``audit``.

A run is described by a TOML file. Every table and key is validated before
anything is computed; unknown keys are errors. Exit statuses are 0 (ok),
2 (configuration error), 3 (runtime abort) and 4 (audit failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from . import problems as pb
from .analysis.denoise import tv_denoise
from .analysis.detection import default_denoise_strength
from .analysis.kinetic import MeasurementSettings, fit_affine, fit_constant, measure_sample
from .audits import run_audits
from .entropy_pairs import cubic_law, keyfitz_kranzer_law, polynomial_law, quartic_law, total_entropy
from .semidisc import NonFiniteStateError
from .time_integration import BlowUpError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_AUDIT = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# configuration schema

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LawConfig(_Strict):
    name: Literal["cubic", "quartic", "keyfitz_kranzer", "custom"] = "cubic"
    coefficients: Optional[List[float]] = None  # ascending powers, custom laws only

    @model_validator(mode="after")
    def _coefficients(self):
        if self.name == "custom":
            if not self.coefficients or len(self.coefficients) < 2:
                raise ValueError("a custom law needs at least two flux coefficients")
        elif self.coefficients is not None:
            raise ValueError("coefficients are only read for name = 'custom'")
        return self


class DissipationTerm(_Strict):
    order: Literal[2, 4, 6]
    strength: float = Field(ge=0)


class SchemeSection(_Strict):
    kind: Literal[pb.SCHEME_KINDS]
    degree: int = Field(5, ge=1, le=12)
    order: int = 2
    filter_order: int = Field(0, ge=0)
    volume: Literal["flux_differencing", "split"] = "flux_differencing"
    surface: Literal["godunov", "llf"] = "godunov"
    dissipation: List[DissipationTerm] = []
    sv_variant: Optional[Literal["standard", "convergent"]] = None
    sv_strength: float = Field(0.0, ge=0)  # eps * N
    entropy: Literal["L2", "L4", "L2L4"] = "L2"
    alpha: float = Field(0.01, gt=0)


class DomainSection(_Strict):
    n: Union[int, List[int]]
    x_left: Optional[float] = None
    x_right: Optional[float] = None
    periodic: Optional[bool] = None


class InitialSection(_Strict):
    kind: Literal["sine", "riemann", "riemann_periodic", "riemann_quartic", "keyfitz_kranzer",
                  "samples"]
    u_left: Optional[Union[float, List[float]]] = None
    u_right: Optional[Union[float, List[float]]] = None
    jump: Optional[float] = None
    band: Optional[Tuple[float, float]] = None
    values: Optional[List[float]] = None


class TimeSection(_Strict):
    final_time: Optional[float] = Field(None, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    trace_stride: int = Field(10, ge=1)
    blowup_limit: float = Field(1e12, gt=0)


class SweepRange(_Strict):
    start: float
    stop: float
    step: float = Field(gt=0)

    def values(self):
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 12) for i in range(max(count, 0))]


class AnalysisSection(_Strict):
    denoise: Optional[float] = Field(None, ge=0)
    window: Optional[int] = Field(None, ge=2)
    jump_threshold: Optional[float] = Field(None, gt=0)
    plateau_tolerance: Optional[float] = Field(None, gt=0)
    min_plateau: int = Field(5, ge=1)
    sweep: Optional[List[float]] = None
    sweep_range: Optional[SweepRange] = None

    @model_validator(mode="after")
    def _one_sweep(self):
        if self.sweep is not None and self.sweep_range is not None:
            raise ValueError("give either sweep or sweep_range, not both")
        return self


class OutputSection(_Strict):
    directory: str = "results"


class ExperimentConfig(_Strict):
    law: LawConfig = LawConfig()
    scheme: SchemeSection
    domain: DomainSection
    initial: InitialSection
    time: TimeSection = TimeSection()
    analysis: AnalysisSection = AnalysisSection()
    output: OutputSection = OutputSection()


def _format_validation(err: ValidationError):
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as err:
        raise ConfigError("<file>", str(err)) from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError("<toml>", str(err)) from None
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError("config", "\n" + _format_validation(err)) from None
    check_semantics(cfg)
    return cfg


# ---------------------------------------------------------------------------
# semantic checks and construction

def build_law(cfg: ExperimentConfig):
    if cfg.law.name == "cubic":
        return cubic_law()
    if cfg.law.name == "quartic":
        return quartic_law()
    if cfg.law.name == "keyfitz_kranzer":
        return keyfitz_kranzer_law()
    return polynomial_law(cfg.law.coefficients, name="custom")


def _resolutions(cfg):
    n = cfg.domain.n
    return [n] if isinstance(n, int) else list(n)


_PERIODIC_KINDS = ("sine", "riemann_periodic", "riemann_quartic")


def check_semantics(cfg: ExperimentConfig):
    """Preconditions of the numerical modules, reported with key paths."""
    s, init, law = cfg.scheme, cfg.initial, cfg.law.name
    system = law == "keyfitz_kranzer"
    for n in _resolutions(cfg):
        if n < 2:
            raise ConfigError("domain.n", "needs at least two cells, nodes or elements")
    if system != (s.kind == "fv_kk"):
        raise ConfigError("scheme.kind", "the Keyfitz-Kranzer system runs with fv_kk and only it")
    if system != (init.kind == "keyfitz_kranzer"):
        raise ConfigError("initial.kind", "keyfitz_kranzer data belongs to the Keyfitz-Kranzer law")
    if s.kind in ("periodic_fd", "fd_sbp") and s.order not in (2, 4, 6):
        raise ConfigError("scheme.order", "FD orders are 2, 4 or 6")
    if s.kind == "tecno":
        if s.order not in (2, 3):
            raise ConfigError("scheme.order", "ENO orders are 2 or 3")
        if law != "cubic":
            raise ConfigError("law.name", "TeCNO fluxes are provided for the cubic law")
    elif s.entropy != "L2":
        raise ConfigError("scheme.entropy", "only TeCNO schemes take another entropy")
    if s.dissipation and s.kind not in ("periodic_fd", "fd_sbp"):
        raise ConfigError("scheme.dissipation", "FD dissipation needs an FD scheme")
    if (s.sv_variant is not None) != (s.sv_strength > 0):
        raise ConfigError("scheme.sv_variant", "sv_variant and a positive sv_strength go together")
    if s.sv_variant is not None and s.kind != "fourier":
        raise ConfigError("scheme.sv_variant", "spectral viscosity needs the Fourier scheme")
    if s.filter_order and s.kind != "dg_lobatto":
        raise ConfigError("scheme.filter_order", "modal filters apply to DG only")
    if s.volume == "split" and law == "keyfitz_kranzer":
        raise ConfigError("scheme.volume", "split forms need a scalar law")
    periodic = cfg.domain.periodic
    if periodic is None:
        periodic = init.kind in _PERIODIC_KINDS
    needs_periodic = s.kind in ("periodic_fd", "fourier", "tecno")
    if needs_periodic and not periodic:
        raise ConfigError("domain.periodic", f"{s.kind} needs a periodic domain")
    if s.kind == "fd_sbp" and periodic:
        raise ConfigError("domain.periodic", "fd_sbp is the bounded FD family")
    if init.kind == "riemann" and periodic:
        raise ConfigError("initial.kind", "use riemann_periodic on a periodic domain")
    if init.kind in ("riemann_periodic", "riemann_quartic") and not periodic:
        raise ConfigError("initial.kind", f"{init.kind} needs a periodic domain")
    if init.kind == "samples":
        if not init.values:
            raise ConfigError("initial.values", "samples need values")
        if cfg.time.final_time is None:
            raise ConfigError("time.final_time", "sample data need an explicit final time")
    if init.kind in ("riemann", "riemann_periodic", "riemann_quartic"):
        for key in ("u_left", "u_right"):
            value = getattr(init, key)
            if value is not None and not isinstance(value, (int, float)):
                raise ConfigError(f"initial.{key}", "scalar Riemann data take one number")
    if init.kind == "keyfitz_kranzer":
        for key in ("u_left", "u_right"):
            value = getattr(init, key)
            if value is not None and (isinstance(value, (int, float)) or len(value) != 2):
                raise ConfigError(f"initial.{key}", "Keyfitz-Kranzer states have two components")
    box = (cfg.domain.x_left, cfg.domain.x_right)
    if None not in box and not box[0] < box[1]:
        raise ConfigError("domain.x_right", "must exceed x_left")
    return cfg


def _domain(cfg, x_left, x_right):
    d = cfg.domain
    return (x_left if d.x_left is None else d.x_left), (x_right if d.x_right is None else d.x_right)


def build_problem(cfg: ExperimentConfig, u_left=None) -> pb.Problem:
    """The problem of ``cfg``; ``u_left`` replaces the left state in sweeps."""
    law = build_law(cfg)
    init = cfg.initial
    left = init.u_left if u_left is None else u_left
    if init.kind == "sine":
        a, b = _domain(cfg, -1.0, 1.0)
        problem = pb.sine_problem(law, 1.0, a, b)
    elif init.kind == "riemann":
        a, b = _domain(cfg, -1.0, 3.0)
        problem = pb.bounded_riemann_problem(law, 5.0 if left is None else left,
                                             -2.0 if init.u_right is None else init.u_right,
                                             -0.5 if init.jump is None else init.jump, a, b)
    elif init.kind == "riemann_periodic":
        a, b = _domain(cfg, -6.0, 6.0)
        problem = pb.fourier_riemann_problem(law, 5.0 if left is None else left,
                                             -2.0 if init.u_right is None else init.u_right,
                                             init.band or (-4.5, 0.0), a, b)
    elif init.kind == "riemann_quartic":
        a, b = _domain(cfg, -7.0, 7.0)
        problem = pb.quartic_riemann_problem(law, -2.0 if left is None else left,
                                             2.0 if init.u_right is None else init.u_right,
                                             init.band or (0.0, 4.5), a, b)
    elif init.kind == "keyfitz_kranzer":
        a, b = _domain(cfg, -0.75, 0.25)
        problem = pb.keyfitz_kranzer_problem(law, tuple(left or pb.KK_LEFT),
                                             tuple(init.u_right or pb.KK_RIGHT), 2.0,
                                             0.0 if init.jump is None else init.jump, a, b)
    else:
        a, b = _domain(cfg, -1.0, 1.0)
        values = np.asarray(init.values, dtype=float)
        periodic = bool(cfg.domain.periodic)
        problem = pb.Problem(law, a, b, periodic, lambda x: _resample(values, x), 1.0,
                             boundary_left=None if periodic else float(values[0]),
                             max_speed=pb._frozen_speed(law, values), name="samples")
    if cfg.time.final_time is not None:
        problem = replace(problem, final_time=cfg.time.final_time)
    return problem


def _resample(values, x):
    x = np.asarray(x, dtype=float)
    if values.size != x.size:
        raise ConfigError("initial.values", f"expected {x.size} values for this mesh, got {values.size}")
    return values.reshape(x.shape)


def build_scheme(cfg: ExperimentConfig) -> pb.SchemeConfig:
    s = cfg.scheme
    return pb.SchemeConfig(
        kind=s.kind, degree=s.degree, order=s.order, filter_order=s.filter_order,
        volume=s.volume, surface=s.surface,
        fd_dissipation=tuple((t.order, t.strength) for t in s.dissipation),
        sv_variant=s.sv_variant, sv_strength=s.sv_strength, entropy=s.entropy, alpha=s.alpha,
    )


def _trace_kind(cfg):
    if cfg.law.name == "keyfitz_kranzer":
        return "KK"
    return cfg.scheme.entropy if cfg.scheme.kind == "tecno" else "L2"


def build_config_run(cfg: ExperimentConfig, n, u_left=None, step_callback=None) -> pb.Run:
    problem = build_problem(cfg, u_left)
    try:
        return pb.build_run(problem, build_scheme(cfg), n, trace_entropy=_trace_kind(cfg),
                            trace_stride=cfg.time.trace_stride,
                            blowup_limit=cfg.time.blowup_limit, dt=cfg.time.dt,
                            step_callback=step_callback)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError("scheme", str(err)) from None


def sweep_values(cfg: ExperimentConfig):
    a = cfg.analysis
    if a.sweep is not None:
        return list(a.sweep)
    if a.sweep_range is not None:
        return a.sweep_range.values()
    if cfg.law.name == "quartic":
        return SweepRange(start=-4.0, stop=-0.5, step=0.1).values()
    return SweepRange(start=0.5, stop=10.0, step=0.25).values()


def measurement_settings(cfg: ExperimentConfig) -> MeasurementSettings:
    a = cfg.analysis
    common = dict(denoise=a.denoise, window=a.window, jump_threshold=a.jump_threshold,
                  plateau_tolerance=a.plateau_tolerance, min_plateau=a.min_plateau)
    if cfg.law.name == "quartic":
        return MeasurementSettings(mode="below_left", require_right_state=False, bounds=None, **common)
    if cfg.law.name == "cubic":
        return MeasurementSettings(**common)
    return MeasurementSettings(bounds=None, **common)


# ---------------------------------------------------------------------------
# artifacts

def _resolved(cfg: ExperimentConfig):
    return cfg.model_dump(mode="json")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, cfg, columns, rows):
    """CSV with two comment lines: schema version and the resolved configuration."""
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    buf.write("# config: " + json.dumps(_resolved(cfg), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write(path, buf.getvalue())


def write_json(path: Path, cfg, payload: dict):
    doc = {"schema_version": SCHEMA_VERSION, "package_version": __version__,
           "config": _resolved(cfg)}
    doc.update(payload)
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def read_csv(path):
    """Rows of an artifact CSV as dicts of strings, comment lines skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _series_rows(x, values):
    v = np.asarray(values, dtype=float)
    ncomp = v.size // x.size
    order = np.argsort(x, kind="stable")
    comps = v.reshape(x.size, ncomp)[order]
    return [[x[i], *row] for i, row in zip(order, comps)], ncomp


# ---------------------------------------------------------------------------
# commands

def _solution_outputs(out, cfg, run, state, trace, suffix=""):
    x = run.coordinates()
    rows, ncomp = _series_rows(x, state.values)
    columns = ["x"] + [f"u{i + 1}" for i in range(ncomp)]
    write_csv(out / f"solution{suffix}_raw.csv", cfg, columns, rows)
    if ncomp == 1:
        xs = np.array([r[0] for r in rows])
        us = np.array([r[1] for r in rows])
        lam = cfg.analysis.denoise
        if lam is None:
            lam = default_denoise_strength(xs, float(np.max(np.abs(run.initial.values))))
        clean = tv_denoise(us, lam) if np.all(np.isfinite(us)) else us
        write_csv(out / f"solution{suffix}_denoised.csv", cfg, ["x", "u1"], zip(xs, clean))
    write_csv(out / f"entropy_trace{suffix}.csv", cfg, ["t", "entropy"], trace)


def cmd_solve(cfg: ExperimentConfig, out: Path, threads=1, seed=0):
    n = _resolutions(cfg)[0]
    if len(_resolutions(cfg)) > 1:
        raise ConfigError("domain.n", "solve takes a single resolution")
    trace = []
    run = build_config_run(cfg, n)
    started = time.perf_counter()
    status, abort = "ok", None
    try:
        state, trace = pb.solve(run)
    except BlowUpError as err:
        status, abort, state = "blow_up", {"time": err.time, "message": str(err)}, err.state
    except NonFiniteStateError as err:
        status, abort, state = "non_finite", {"time": err.time, "message": str(err)}, run.initial
    elapsed = time.perf_counter() - started
    _solution_outputs(out, cfg, run, state, trace)
    mass = np.asarray(run.mass)
    v0, v1 = np.asarray(run.initial.values), np.asarray(state.values)
    mm = mass[..., None] if v0.ndim > mass.ndim else mass
    entropies = [e for _, e in trace]
    increases = [b - a for a, b in zip(entropies[:-1], entropies[1:])]
    audits = {
        "mass_initial": np.sum(mm * v0, axis=tuple(range(mass.ndim))).tolist(),
        "mass_final": np.sum(mm * v1, axis=tuple(range(mass.ndim))).tolist(),
        "entropy_initial": entropies[0] if entropies else None,
        "entropy_final": entropies[-1] if entropies else None,
        "largest_entropy_increase": max(increases) if increases else None,
    }
    write_json(out / "summary.json", cfg, {
        "command": "solve", "status": status, "abort": abort, "n": n,
        "final_time": float(state.time), "audits": audits,
        "timings": {"solve_seconds": elapsed},
    })
    return EXIT_OK if status == "ok" else EXIT_ABORT


KINETIC_COLUMNS = ["u_L", "u_R", "detected", "u_M", "bound_lo", "bound_hi", "within_bounds",
                   "plateau_width", "diagnostic"]


def _sample_runner(cfg, n, settings):
    def one(u_left):
        u_right = cfg.initial.u_right
        try:
            run = build_config_run(cfg, n, u_left)
            u_right = run.problem.u_right
            state, _ = pb.solve(run)
        except (BlowUpError, NonFiniteStateError) as err:
            from .analysis.kinetic import KineticSample

            return KineticSample(u_left, u_right, None, False, 0, diagnostic=f"aborted: {err}")
        return measure_sample(run.coordinates(), state.values, u_left, u_right, settings)
    return one


def cmd_kinetic_sweep(cfg: ExperimentConfig, out: Path, threads=1, seed=0):
    if cfg.initial.kind not in ("riemann", "riemann_periodic", "riemann_quartic"):
        raise ConfigError("initial.kind", "kinetic sweeps need scalar Riemann data")
    values = sweep_values(cfg)
    if not values:
        raise ConfigError("analysis.sweep", "sweep is empty")
    settings = measurement_settings(cfg)
    workers = None if threads == 0 else threads
    fits = []
    started = time.perf_counter()
    for n in _resolutions(cfg):
        one = _sample_runner(cfg, n, settings)
        if workers == 1:
            samples = [one(v) for v in values]
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                samples = list(pool.map(one, values))
        rows = [[s.u_left, s.u_right, s.detected, s.u_middle, s.bound_lo, s.bound_hi,
                 s.within_bounds, s.plateau_width, s.diagnostic] for s in samples]
        write_csv(out / f"kinetic_table_n{n}.csv", cfg, KINETIC_COLUMNS, rows)
        detected = sum(s.detected for s in samples)
        entry = {"n": n, "samples": len(samples), "detected": detected,
                 "bound_violations": sum(1 for s in samples if s.within_bounds is False)}
        try:
            if cfg.law.name == "quartic":
                c = fit_constant(samples)
                entry["fit"] = {"model": "constant", "mean": c.mean, "std": c.std, "n_samples": c.n_samples}
            else:
                f = fit_affine(samples)
                entry["fit"] = {"model": "affine", "slope": f.slope, "offset": f.offset,
                                "r_squared": f.r_squared, "n_samples": f.n_samples}
        except ValueError as err:
            entry["fit"] = None
            entry["fit_error"] = str(err)
        fits.append(entry)
    drifts = []
    for a, b in zip(fits[:-1], fits[1:]):
        if a.get("fit") and b.get("fit") and a["fit"]["model"] == "affine":
            drifts.append({"from": a["n"], "to": b["n"],
                           "slope_drift": abs(b["fit"]["slope"] - a["fit"]["slope"])})
    write_json(out / "summary.json", cfg, {
        "command": "kinetic-sweep", "status": "ok", "resolutions": fits, "slope_drift": drifts,
        "timings": {"sweep_seconds": time.perf_counter() - started},
    })
    return EXIT_OK


def cmd_audit(cfg: ExperimentConfig, out: Path, threads=1, seed=0):
    n = _resolutions(cfg)[0]
    run = build_config_run(cfg, n)
    results = run_audits(run, seed=seed)
    write_json(out / "audit.json", cfg, {
        "command": "audit", "seed": seed, "n": n,
        "audits": [r.as_dict() for r in results],
        "passed": all(r.passed for r in results),
    })
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.name}: {r.value:.3e} (tolerance {r.tolerance:.1e}) {r.detail}".rstrip())
    return EXIT_OK if all(r.passed for r in results) else EXIT_AUDIT


COMMANDS = {"solve": cmd_solve, "kinetic-sweep": cmd_kinetic_sweep, "audit": cmd_audit}


def make_parser():
    parser = argparse.ArgumentParser(prog="sbp-kinetic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="TOML experiment file")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="sweep workers, 0 = automatic")
    parser.add_argument("--seed", type=int, default=0, help="seed of randomized audits")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        if args.threads < 0:
            raise ConfigError("--threads", "must be non-negative")
        cfg = load_config(args.config)
        out = args.out if args.out is not None else Path(cfg.output.directory)
        return COMMANDS[args.command](cfg, out, threads=args.threads, seed=args.seed)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
