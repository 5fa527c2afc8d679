import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paradiag.cli import main
from paradiag.errors import ConfigError
from paradiag.experiments import (
    OUTPUT_ENV,
    PRESETS,
    ExperimentConfig,
    fit_exponent,
    parse_config,
    preset,
    roundoff_sweep,
    run,
    stability_region_scan,
)

SMALL = dict(nu=1e-2, nx=16, T=1.0, dt=1 / 16, alpha=(0.1, 0.01), max_iterations=8)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- config -----------------------------------------------------------------------

def test_parse_with_comments_and_lists():
    cfg = parse_config("""
        # leading comment
        problem = scalar   # trailing comment
        lambda = 2j
        method = bdf
        r = 2
        alpha = 0.2, 0.05
        tol = auto
        emit_plots = false
    """)
    assert cfg.problem == "scalar" and cfg.lam == 2j and cfg.r == 2
    assert cfg.alpha == (0.2, 0.05) and cfg.tol is None and not cfg.emit_plots


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    cfg = preset(name)
    text = cfg.serialize()
    again = parse_config(text)
    assert again == cfg
    assert again.serialize() == text


@settings(max_examples=40, deadline=None)
@given(
    nu=st.floats(1e-6, 1.0),
    alphas=st.lists(st.floats(1e-6, 0.999), min_size=1, max_size=4),
    gamma=st.floats(0.05, 2.0),
    lam=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
    plots=st.booleans(),
)
def test_round_trip_property(nu, alphas, gamma, lam, plots):
    cfg = ExperimentConfig(nu=nu, alpha=tuple(alphas), gamma=gamma, lam=lam, emit_plots=plots)
    text = cfg.serialize()
    assert parse_config(text) == cfg
    assert parse_config(text).serialize() == text


@pytest.mark.parametrize("text, key", [
    ("bogus = 1", "bogus"),
    ("lam = 1", "lam"),
    ("nx = ten", "nx"),
    ("alpha = 0.1, 1.0", "alpha"),
    ("T = 1.0\ndt = 0.3", "T"),
    ("method = rk4", "method"),
    ("emit_plots = maybe", "emit_plots"),
    ("just some words", None),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    if key is not None:
        assert info.value.key == key
        assert key in str(info.value)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("fig9")


# -- run ----------------------------------------------------------------------------

def test_run_writes_convergence_csv(tmp_path):
    cfg = ExperimentConfig(**SMALL, outputs=str(tmp_path))
    result = run(cfg)
    rows = read_csv(tmp_path / "convergence.csv")
    assert list(rows[0]) == ["alpha", "iter", "err_inf", "transformed_err_inf", "bound"]
    for row in rows:
        a = float(row["alpha"])
        assert float(row["bound"]) == a / (1 - a)
    assert len(rows) == sum(h.iterations + 1 for h in result.histories)
    assert rows[0]["err_inf"] == "%.17g" % result.histories[0].err_inf[0]
    assert (tmp_path / "metadata.json").exists() and (tmp_path / "convergence.svg").exists()
    svg = (tmp_path / "convergence.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_run_is_byte_reproducible(tmp_path):
    outs = []
    for i, workers in enumerate((1, 1, 3)):
        cfg = ExperimentConfig(**SMALL, workers=workers, outputs=str(tmp_path / str(i)))
        run(cfg)
        outs.append((tmp_path / str(i) / "convergence.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_scalar_zero_eigenvalue_iteration_count(tmp_path):
    tol, alpha = 1e-10, 0.1
    cfg = ExperimentConfig(problem="scalar", lam=0.0, T=2.0, dt=0.25, alpha=(alpha,),
                           tol=tol, max_iterations=50, outputs=str(tmp_path))
    hist = run(cfg, write=False).histories[0]
    k = math.ceil(math.log(tol) / math.log(alpha / (1 - alpha)))
    assert hist.stop_reason == "converged"
    assert hist.err_inf[min(k, hist.iterations)] <= tol


def test_multistep_and_wave_runs(tmp_path):
    cfg = ExperimentConfig(**dict(SMALL, alpha=(0.1,), max_iterations=20), method="bdf", r=3,
                           startup="exact",
                           outputs=str(tmp_path))
    h = run(cfg, write=False).histories[0]
    assert h.err_inf[-1] < 1e-10
    wave = ExperimentConfig(problem="wave", nx=8, T=1.0, dt=1 / 16, gamma=(3 + np.sqrt(3)) / 6,
                            alpha=(0.05,), max_iterations=10, outputs=str(tmp_path))
    hw = run(wave, write=False).histories[0]
    assert math.isnan(hw.transformed_err_inf[0]) and hw.err_inf[-1] < 1e-9


def test_initial_guess_options():
    base = ExperimentConfig(**dict(SMALL, alpha=(0.1,), max_iterations=3))
    firsts = {g: run(base.replace(initial_guess=g), write=False).histories[0].err_inf[0]
              for g in ("zero", "ones", "random")}
    assert len(set(firsts.values())) == 3
    again = run(base.replace(initial_guess="random"), write=False).histories[0].err_inf[0]
    assert again == firsts["random"]


# -- stability region ----------------------------------------------------------------------

def test_region_sdirk_boundary_and_growth(tmp_path):
    cfg = ExperimentConfig(gamma=0.2, re_min=-1.0, re_max=1.0, im_min=-200.0, im_max=0.0,
                           resolution=3, outputs=str(tmp_path))
    grid, spectrum = stability_region_scan(cfg)
    mags = {(x, y): m for x, y, m in grid}
    assert mags[(0.0, 0.0)] == pytest.approx(1.0)
    assert mags[(0.0, -200.0)] > 1.0
    rows = read_csv(tmp_path / "region.csv")
    assert list(rows[0]) == ["re_z", "im_z", "magnitude"] and len(rows) == 9
    assert len(read_csv(tmp_path / "spectrum.csv")) == 100


def test_region_bdf4_spectrum_is_stable(tmp_path):
    cfg = preset("fig3_1_left").replace(resolution=5, outputs=str(tmp_path))
    _, spectrum = stability_region_scan(cfg, write=False)
    assert max(m for _, _, m in spectrum) <= 1 + 1e-9


def test_region_pole_is_infinite(tmp_path):
    # BDF1 leading coefficient 1 + z vanishes at z = -1
    cfg = ExperimentConfig(method="bdf", r=1, re_min=-1.0, re_max=1.0, im_min=0.0, im_max=1.0,
                           resolution=3, outputs=str(tmp_path))
    grid, _ = stability_region_scan(cfg)
    assert math.isinf(dict(((x, y), m) for x, y, m in grid)[(-1.0, 0.0)])
    assert "inf" in (tmp_path / "region.csv").read_text()


# -- roundoff sweep ---------------------------------------------------------------------------

def test_fit_exponent():
    alphas = np.array([0.2, 0.1, 0.05])
    assert fit_exponent(alphas, 3e-16 * alphas**-2.0) == pytest.approx(2.0)
    assert fit_exponent([0.1], [1e-13]) is None


def test_roundoff_sweep_single_alpha(tmp_path):
    cfg = ExperimentConfig(**dict(SMALL, alpha=(0.1,)), outputs=str(tmp_path))
    rows, exponent = roundoff_sweep(cfg)
    assert len(rows) == 1 and exponent is None
    out = read_csv(tmp_path / "floors.csv")
    assert len(out) == 1 and out[0]["fitted_exponent"] == ""


def test_roundoff_sweep_fits(tmp_path):
    cfg = ExperimentConfig(**dict(SMALL, alpha=(0.2, 0.05), max_iterations=15), outputs=str(tmp_path))
    rows, exponent = roundoff_sweep(cfg)
    assert len(rows) == 2 and exponent is not None and math.isfinite(exponent)


# -- command line ---------------------------------------------------------------------------------

def small_args(tmp_path):
    return ["--set", "nu=0.01", "--set", "nx=16", "--set", "T=1.0", "--set", "dt=0.0625",
            "--set", "max_iterations=5", "--no-plots", "--output", str(tmp_path)]


def test_cli_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_cli_run_and_alpha_override(tmp_path, capsys):
    assert main(["run", *small_args(tmp_path), "--alpha", "0.2", "--alpha", "0.05"]) == 0
    rows = read_csv(tmp_path / "convergence.csv")
    assert sorted({float(r["alpha"]) for r in rows}) == [0.05, 0.2]
    assert not (tmp_path / "convergence.svg").exists()


def test_cli_print_config_round_trips(tmp_path, capsys):
    assert main(["run", "--preset", "fig3_3", "--print-config"]) == 0
    text = capsys.readouterr().out
    assert parse_config(text) == preset("fig3_3")


def test_cli_config_file(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("nu = 0.01\nnx = 16\nT = 1.0\ndt = 0.0625\nmax_iterations = 3\n"
                        "emit_plots = false\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["roundoff-sweep", "--config", str(cfg_file), "--output", str(out),
                 "--alpha", "0.1"]) == 0
    assert (out / "floors.csv").exists()


def test_cli_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    args = [a for a in small_args(tmp_path) if a not in ("--output", str(tmp_path))]
    assert main(["stability-region", *args, "--set", "resolution=3"]) == 0
    assert (tmp_path / "env" / "region.csv").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["run", "--set", "bogus=1"]) == 1
    assert "bogus" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_cli_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", *small_args(blocker / "sub")]) == 1
    assert "outputs" in capsys.readouterr().err


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    # |R| -> 3.5 for this method at large z; two blocks make the sweep factor exceed 1
    args = ["run", "--set", "problem=scalar", "--set", "lambda=1e6", "--set", "T=2",
            "--set", "dt=1", "--alpha", "0.06", "--output", str(tmp_path), "--no-plots"]
    assert main(args) == 2
    err = capsys.readouterr().err
    assert "run failed" in err and "diverged" in err


def test_floor_trend_depends_on_update_form():
    # The increment form corrects the diagonalization roundoff every sweep,
    # so its stagnation level does not grow as alpha shrinks; the direct form
    # keeps it and shows the expected growth.
    base = ExperimentConfig(nu=1e-3, nx=50, T=4.0, dt=0.02, alpha=(0.1, 0.01), max_iterations=25)
    rows_inc, _ = roundoff_sweep(base, write=False)
    rows_dir, exponent = roundoff_sweep(base.replace(update="direct"), write=False)
    (_, inc_hi), (_, inc_lo) = rows_inc
    (_, dir_hi), (_, dir_lo) = rows_dir
    assert inc_lo / inc_hi < 1.5
    assert dir_lo / dir_hi > 3.0
    assert 0.3 < exponent < 1.2
