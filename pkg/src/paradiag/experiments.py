"""Declarative experiment configuration, named presets, and report writers.

A config file is flat UTF-8 ``key = value`` text; ``#`` starts a comment.
Lists are comma separated and booleans are ``true``/``false``.  Keys:

===================  =========================================================
problem              ``advection_diffusion`` | ``wave`` | ``scalar``
nu, nx               diffusion coefficient and grid size (advection_diffusion,
                     wave uses ``nx`` only)
lambda               eigenvalue of the scalar problem (complex allowed, e.g. ``2j``)
method               ``sdirk2`` | ``bdf`` | ``adams_moulton4``
gamma, b             sdirk2 parameters
r                    BDF order (1-4)
startup              multistep start values: ``exact`` | ``sdirk2``
T, dt                final time and step; ``T / dt`` must be an integer
alpha                one or more values in (0, 1)
tol                  residual threshold (``auto`` means 1e-12 * max|b|)
max_iterations       sweep cap per alpha
update               ``increment`` | ``direct``
initial_guess        ``zero`` | ``random`` | ``ones``
seed                 seed for ``initial_guess = random``
shifted_solver       ``dense`` | ``stage_reduced``
workers              frequency-solve threads (0 = one per CPU)
re_min .. im_max     stability-region window
resolution           stability-region samples per axis
outputs              output directory
emit_plots           also write SVG plots
===================  =========================================================
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .allatonce import assemble_multistep, assemble_onestep, sequential_solve
from .errors import ConfigError, DegenerateLeadingCoefficientError, PoleError
from .integrators import (
    OneStepMethod,
    adams_moulton4,
    assumption1_check,
    assumption2_check,
    bdf,
    characteristic_roots,
    sdirk2,
    stability_eval,
)
from .problems import SpatialProblem, advection_diffusion, scalar_problem, wave_first_order
from .solver import SolverConfig, iterate

__all__ = [
    "ExperimentConfig",
    "OUTPUT_ENV",
    "PRESETS",
    "RunResult",
    "build_method",
    "build_problem",
    "load_config",
    "parse_config",
    "preset",
    "roundoff_sweep",
    "run",
    "stability_region_scan",
    "write_convergence_csv",
]

OUTPUT_ENV = "PARADIAG_OUTPUT_DIR"
GAMMA_L = (3.0 + math.sqrt(3.0)) / 6.0


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "advection_diffusion"
    nu: float = 1e-3
    nx: int = 100
    lam: complex = 0.0
    method: str = "sdirk2"
    gamma: float = 0.2
    b: float = 0.5
    r: int = 4
    startup: str = "sdirk2"
    T: float = 10.0
    dt: float = 0.02
    alpha: tuple = (0.1,)
    tol: Optional[float] = 0.0
    max_iterations: int = 40
    update: str = "increment"
    initial_guess: str = "zero"
    seed: int = 0
    shifted_solver: str = "dense"
    workers: int = 1
    re_min: float = -2.0
    re_max: float = 4.0
    im_min: float = -4.0
    im_max: float = 4.0
    resolution: int = 121
    outputs: str = "paradiag_out"
    emit_plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        self.validate()

    @property
    def Nt(self) -> int:
        return int(round(self.T / self.dt))

    def validate(self) -> None:
        _choice("problem", self.problem, ("advection_diffusion", "wave", "scalar"))
        _choice("method", self.method, ("sdirk2", "bdf", "adams_moulton4"))
        _choice("startup", self.startup, ("exact", "sdirk2"))
        _choice("update", self.update, ("increment", "direct"))
        _choice("initial_guess", self.initial_guess, ("zero", "random", "ones"))
        _choice("shifted_solver", self.shifted_solver, ("dense", "stage_reduced"))
        if not (self.dt > 0 and self.T > 0):
            raise ConfigError("T and dt must be positive", key="dt")
        if abs(self.T / self.dt - self.Nt) > 1e-9 * max(1.0, self.T / self.dt) or self.Nt < 1:
            raise ConfigError(f"T / dt = {self.T / self.dt!r} is not a positive integer", key="T")
        if not self.alpha:
            raise ConfigError("at least one alpha is required", key="alpha")
        for a in self.alpha:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha = {a!r} is outside (0, 1)", key="alpha")
        if self.tol is not None and self.tol < 0:
            raise ConfigError("tol must be non-negative", key="tol")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be non-negative", key="max_iterations")
        if self.workers < 0:
            raise ConfigError("workers must be non-negative", key="workers")
        if self.method == "bdf" and self.r not in (1, 2, 3, 4):
            raise ConfigError("BDF order r must be 1..4", key="r")
        if self.resolution < 2:
            raise ConfigError("resolution must be at least 2", key="resolution")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ConfigError("empty stability-region window", key="re_min")
        if self.problem != "scalar" and self.nx < 3:
            raise ConfigError("nx must be at least 3", key="nx")
        if self.problem == "advection_diffusion" and not self.nu > 0:
            raise ConfigError("nu must be positive", key="nu")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def serialize(self) -> str:
        lines = [f"{_key_name(f.name)} = {_format_value(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def _choice(key, value, allowed):
    if value not in allowed:
        raise ConfigError(f"must be one of {', '.join(allowed)}; got {value!r}", key=key)


# ``lambda`` is a Python keyword, so the field is ``lam``.
_FILE_TO_FIELD = {"lambda": "lam"}
_FIELD_TO_FILE = {v: k for k, v in _FILE_TO_FIELD.items()}
_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _key_name(field_name: str) -> str:
    return _FIELD_TO_FILE.get(field_name, field_name)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if value is None:
        return "auto"
    if isinstance(value, complex):
        return repr(value.real) if value.imag == 0 else repr(value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(name: str, text: str):
    default = _FIELDS[name].default
    try:
        if name == "alpha":
            return tuple(float(t) for t in text.split(",") if t.strip())
        if name == "tol":
            return None if text.lower() == "auto" else float(text)
        if name == "lam":
            return complex(text.replace(" ", "").strip("()"))
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r}", key=_key_name(name)) from None


def parse_overrides(pairs) -> dict:
    """``["key=value", ...]`` (or ``(key, value)`` tuples) to typed field values."""
    out = {}
    for item in pairs:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"expected key=value, got {item!r}", key=item)
            key, value = item.split("=", 1)
        else:
            key, value = item
        key, value = key.strip(), str(value).strip()
        name = _FILE_TO_FIELD.get(key, key)
        if name not in _FIELDS or name in _FIELD_TO_FILE and key != _FIELD_TO_FILE[name]:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        out[name] = _parse_value(name, value)
    return out


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Parse key-value text on top of ``base`` (defaults if omitted)."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=line)
        pairs.append(tuple(line.split("=", 1)))
    values = parse_overrides(pairs)
    try:
        return dataclasses.replace(base or ExperimentConfig(), **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), base)


# -- presets ------------------------------------------------------------------

_ONESTEP_GRID = dict(problem="advection_diffusion", nx=100, T=10.0, dt=0.02)
_MULTISTEP_GRID = dict(problem="advection_diffusion", nu=1e-3, nx=128, T=8.0, dt=1 / 128)

PRESETS = {
    "fig2_1_left": ("stability region of sdirk2(0.2, 1/2) with the nu = 1e-3 spectrum",
                    dict(_ONESTEP_GRID, nu=1e-3, gamma=0.2)),
    "fig2_1_right": ("stability region of sdirk2(0.2, 1/2) with the nu = 2e-4 spectrum",
                     dict(_ONESTEP_GRID, nu=2e-4, gamma=0.2)),
    "fig2_2_left": ("convergence, sdirk2(0.2, 1/2), nu = 1e-3",
                    dict(_ONESTEP_GRID, nu=1e-3, gamma=0.2, alpha=(0.1, 0.01))),
    "fig2_2_right": ("convergence, L-stable sdirk2, nu = 2e-4",
                     dict(_ONESTEP_GRID, nu=2e-4, gamma=GAMMA_L, alpha=(0.1, 0.01))),
    "fig3_1_left": ("stability region of BDF4 with the nu = 1e-3 spectrum",
                    dict(_MULTISTEP_GRID, method="bdf", r=4, re_min=-4.0, re_max=16.0,
                         im_min=-10.0, im_max=10.0)),
    "fig3_1_right": ("stability region of the modified Adams-Moulton method",
                     dict(_MULTISTEP_GRID, method="adams_moulton4", re_min=-1.0, re_max=3.0,
                          im_min=-2.0, im_max=2.0)),
    # The multistep presets start from a seeded random guess so that the
    # initial error has a component in the zero-eigenvalue (mean) mode; with a
    # zero guess and a sine initial condition that mode is never excited.
    "fig3_2_left": ("convergence, modified Adams-Moulton",
                    dict(_MULTISTEP_GRID, method="adams_moulton4", alpha=(0.1, 0.01),
                         initial_guess="random")),
    "fig3_2_right": ("convergence, BDF4",
                     dict(_MULTISTEP_GRID, method="bdf", r=4, alpha=(0.1, 0.01),
                          initial_guess="random")),
    "fig3_3": ("first six sweeps of BDF4",
               dict(_MULTISTEP_GRID, method="bdf", r=4, alpha=(0.1, 0.01), max_iterations=6,
                    initial_guess="random")),
    "roundoff_sweep": ("stagnation level versus alpha, sdirk2(0.2, 1/2), nu = 1e-3",
                       dict(_ONESTEP_GRID, nu=1e-3, gamma=0.2, alpha=(0.2, 0.1, 0.05, 0.01))),
}


def preset(name: str) -> ExperimentConfig:
    try:
        _, values = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}", key="preset") from None
    return ExperimentConfig(**values, outputs=os.path.join("paradiag_out", name))


# -- builders -----------------------------------------------------------------

def build_problem(cfg: ExperimentConfig) -> SpatialProblem:
    if cfg.problem == "advection_diffusion":
        return advection_diffusion(cfg.nu, cfg.nx)
    if cfg.problem == "wave":
        return wave_first_order(cfg.nx)
    return scalar_problem(cfg.lam)


def build_method(cfg: ExperimentConfig):
    if cfg.method == "sdirk2":
        return sdirk2(cfg.gamma, cfg.b)
    if cfg.method == "bdf":
        return bdf(cfg.r)
    return adams_moulton4()


def build_system(cfg: ExperimentConfig, problem=None, method=None):
    problem = problem or build_problem(cfg)
    method = method or build_method(cfg)
    if isinstance(method, OneStepMethod):
        return assemble_onestep(problem, method, cfg.Nt, cfg.dt)
    startup = "exact" if cfg.startup == "exact" else sdirk2(GAMMA_L)
    return assemble_multistep(problem, method, cfg.Nt, cfg.dt, startup_source=startup)


def stability_report(cfg: ExperimentConfig, problem=None, method=None):
    problem = problem or build_problem(cfg)
    method = method or build_method(cfg)
    check = assumption1_check if isinstance(method, OneStepMethod) else assumption2_check
    return check(method, problem.eigenvalues, cfg.dt)


def _initial_guess(cfg: ExperimentConfig, system):
    if cfg.initial_guess == "zero":
        return None
    if cfg.initial_guess == "ones":
        return np.ones(system.rhs.shape)
    return np.random.default_rng(cfg.seed).random(system.rhs.shape)


# -- run ------------------------------------------------------------------------

@dataclass
class RunResult:
    config: ExperimentConfig
    histories: list = field(default_factory=list)
    files: list = field(default_factory=list)


def _output_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.outputs)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}", key="outputs") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable", key="outputs")
    return out


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else "%.17g" % x


def write_convergence_csv(path, histories) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "iter", "err_inf", "transformed_err_inf", "bound"])
        for h in histories:
            for row in h.rows():
                w.writerow([_fmt(h.alpha), row["iter"], _fmt(row["err_inf"]),
                            _fmt(row["transformed_err_inf"]), _fmt(row["bound"])])
    return path


def run(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run the iteration for every alpha and write ``convergence.csv``."""
    problem = build_problem(cfg)
    method = build_method(cfg)
    system = build_system(cfg, problem, method)
    u_star = sequential_solve(system)
    u0 = _initial_guess(cfg, system)
    result = RunResult(cfg)
    for alpha in cfg.alpha:
        scfg = SolverConfig(alpha=alpha, tol=cfg.tol, max_iterations=cfg.max_iterations,
                            shifted_solver=cfg.shifted_solver, workers=cfg.workers,
                            update=cfg.update)
        _, hist = iterate(system, scfg, u_exact=u_star, u0=u0)
        result.histories.append(hist)
    if write:
        out = _output_dir(cfg)
        result.files.append(write_convergence_csv(out / "convergence.csv", result.histories))
        report = stability_report(cfg, problem, method)
        meta = {
            "config": cfg.serialize(),
            "Nt": cfg.Nt,
            "unknown_blocks": system.n_blocks,
            "m": system.m,
            "method": method.label,
            "problem": problem.label,
            "stability": {"max_modulus": report.max_abs_R, "stable": report.stable},
            "runs": [{"alpha": h.alpha, "iterations": h.iterations, "stop_reason": h.stop_reason,
                      "floor_transformed": h.floor("transformed_err_inf"),
                      "floor_err": h.floor("err_inf")} for h in result.histories],
        }
        meta_path = out / "metadata.json"
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        result.files.append(meta_path)
        if cfg.emit_plots:
            result.files.append(_convergence_plot(out / "convergence.svg", result.histories))
    return result


# -- stability region ---------------------------------------------------------------

def _modulus(method, z: complex) -> float:
    try:
        if isinstance(method, OneStepMethod):
            return abs(stability_eval(method, z))
        return float(np.abs(characteristic_roots(method, z)).max())
    except (PoleError, DegenerateLeadingCoefficientError):
        return math.inf


def stability_region_scan(cfg: ExperimentConfig, write: bool = True):
    """Sample ``|R(z)|`` (or the largest characteristic root) on the window.

    Returns ``(grid_rows, spectrum_rows)`` with rows ``(re_z, im_z, magnitude)``;
    the spectrum rows are the points ``dt * lambda`` of the configured problem.
    """
    method = build_method(cfg)
    res = cfg.resolution
    re = np.linspace(cfg.re_min, cfg.re_max, res)
    im = np.linspace(cfg.im_min, cfg.im_max, res)
    grid = [(x, y, _modulus(method, complex(x, y))) for y in im for x in re]
    spectrum = []
    problem = build_problem(cfg)
    if problem.eigenvalues is not None:
        for lam in problem.eigenvalues:
            z = cfg.dt * complex(lam)
            spectrum.append((z.real, z.imag, _modulus(method, z)))
    if write:
        out = _output_dir(cfg)
        _write_rows(out / "region.csv", grid)
        _write_rows(out / "spectrum.csv", spectrum)
        if cfg.emit_plots:
            _region_plot(out / "region.svg", cfg, grid, spectrum)
    return grid, spectrum


def _write_rows(path, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_z", "im_z", "magnitude"])
        for x, y, mag in rows:
            w.writerow([_fmt(x), _fmt(y), "inf" if math.isinf(mag) else _fmt(mag)])


# -- roundoff sweep -------------------------------------------------------------------

def fit_exponent(alphas, floors) -> Optional[float]:
    """Least-squares slope of ``log(floor)`` against ``log(1/alpha)``."""
    alphas = np.asarray(alphas, dtype=float)
    floors = np.asarray(floors, dtype=float)
    if alphas.size < 2 or np.unique(alphas).size < 2 or np.any(floors <= 0):
        return None
    slope, _ = np.polyfit(np.log(1.0 / alphas), np.log(floors), 1)
    return float(slope)


def roundoff_sweep(cfg: ExperimentConfig, write: bool = True):
    """Run every alpha into stagnation; returns ``(rows, exponent)``.

    ``rows`` are ``(alpha, floor)`` where the floor is the median of the last
    five transformed errors (the plain error norm if no eigentransform exists).
    """
    result = run(cfg, write=False)
    which = "transformed_err_inf"
    if any(math.isnan(h.transformed_err_inf[-1]) for h in result.histories):
        which = "err_inf"
    rows = [(h.alpha, h.floor(which)) for h in result.histories]
    exponent = fit_exponent([a for a, _ in rows], [f for _, f in rows])
    if write:
        out = _output_dir(cfg)
        with (out / "floors.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "floor", "fitted_exponent"])
            for a, f in rows:
                w.writerow([_fmt(a), _fmt(f), "" if exponent is None else _fmt(exponent)])
        write_convergence_csv(out / "convergence.csv", result.histories)
    return rows, exponent


# -- SVG ---------------------------------------------------------------------------------

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H, _PAD = 640, 420, 60


def _svg(body, title):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'font-family="sans-serif" font-size="11">\n'
            f'<rect width="{_W}" height="{_H}" fill="white"/>\n'
            f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>\n'
            + "\n".join(body) + "\n</svg>\n")


def _convergence_plot(path, histories) -> Path:
    series = []
    for i, h in enumerate(histories):
        color = _COLORS[i % len(_COLORS)]
        series.append((f"err a={h.alpha:g}", h.err_inf, color, ""))
        series.append((f"P err a={h.alpha:g}", h.transformed_err_inf, color, "6,3"))
        bound = [h.err_inf[0] * h.bound**k for k in range(len(h.err_inf))]
        series.append((f"bound a={h.alpha:g}", bound, color, "1,3"))
    vals = [v for _, ys, _, _ in series for v in ys if v > 0 and math.isfinite(v)]
    lo = math.floor(math.log10(min(vals))) if vals else -16
    hi = math.ceil(math.log10(max(vals))) if vals else 0
    lo = max(lo, -17)
    kmax = max(1, max(len(ys) for _, ys, _, _ in series) - 1)

    def px(k):
        return _PAD + (_W - 2 * _PAD) * k / kmax

    def py(v):
        v = min(max(math.log10(v), lo), hi)
        return _H - _PAD - (_H - 2 * _PAD) * (v - lo) / max(hi - lo, 1)

    body = [f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
            f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>']
    for e in range(lo, hi + 1, max(1, (hi - lo) // 8)):
        y = py(10.0**e)
        body.append(f'<text x="{_PAD - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    body.append(f'<text x="{_W / 2}" y="{_H - 20}" text-anchor="middle">iteration</text>')
    for j, (name, ys, color, dash) in enumerate(series):
        pts = " ".join(f"{px(k):.1f},{py(v):.1f}" for k, v in enumerate(ys) if v > 0 and math.isfinite(v))
        if pts:
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            body.append(f'<polyline points="{pts}" fill="none" stroke="{color}"{dash_attr}/>')
        body.append(f'<text x="{_W - _PAD + 4}" y="{_PAD + 14 * j}" fill="{color}" '
                    f'font-size="9">{name}</text>')
    path = Path(path)
    path.write_text(_svg(body, "error history (log scale)"), encoding="utf-8")
    return path


def _region_plot(path, cfg, grid, spectrum) -> Path:
    def px(x):
        return _PAD + (_W - 2 * _PAD) * (x - cfg.re_min) / (cfg.re_max - cfg.re_min)

    def py(y):
        return _H - _PAD - (_H - 2 * _PAD) * (y - cfg.im_min) / (cfg.im_max - cfg.im_min)

    dx = (_W - 2 * _PAD) / (cfg.resolution - 1)
    dy = (_H - 2 * _PAD) / (cfg.resolution - 1)
    body = []
    for x, y, mag in grid:
        if mag <= 1.0 + 1e-12:
            body.append(f'<rect x="{px(x) - dx / 2:.1f}" y="{py(y) - dy / 2:.1f}" '
                        f'width="{dx:.2f}" height="{dy:.2f}" fill="#c8d8ec"/>')
    body.append(f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
                f'fill="none" stroke="black"/>')
    for x, y, _ in spectrum:
        if cfg.re_min <= x <= cfg.re_max and cfg.im_min <= y <= cfg.im_max:
            body.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="1.5" fill="#d62728"/>')
    body.append(f'<text x="{_PAD}" y="{_H - _PAD + 16}">{cfg.re_min:g}</text>')
    body.append(f'<text x="{_W - _PAD}" y="{_H - _PAD + 16}" text-anchor="end">{cfg.re_max:g}</text>')
    body.append(f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end">{cfg.im_min:g}</text>')
    body.append(f'<text x="{_PAD - 4}" y="{_PAD + 8}" text-anchor="end">{cfg.im_max:g}</text>')
    path = Path(path)
    path.write_text(_svg(body, "stable region (shaded) and dt * spectrum"), encoding="utf-8")
    return path
