"""Acceptance checks, one test per criterion.

Each test records a verdict line (printed in the terminal summary) and then
asserts it.  Shared preset runs are computed once per module.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from paradiag.allatonce import (
    apply_operator,
    assemble_multistep,
    onestep_system,
    sequential_solve,
)
from paradiag.experiments import PRESETS, build_system, preset, run
from paradiag.integrators import (
    adams_moulton4,
    amplification_matrix,
    assumption1_check,
    bdf,
    implicit_euler,
    sdirk2,
)
from paradiag.problems import SpatialProblem, advection_diffusion
from paradiag.solver import (
    Preconditioner,
    SolverConfig,
    dense_preconditioner,
    iterate,
    stage_reduced_frequency_solve,
    stage_reduction,
    stage_system_solve,
)

SLACK = 0.02


def record(n, checks):
    """``checks`` is a list of ``(label, ok)``; the criterion passes if all do."""
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{label} [{'ok' if c else 'FAILED'}]" for label, c in checks)
    ACCEPTANCE_RESULTS[n] = (ok, detail)
    assert ok, detail


def contraction_ratios(hist, which="transformed_err_inf"):
    """Ratios ``e_{k+1} / e_k`` for every ``k`` with ``e_k`` at least 100x the floor."""
    e = np.asarray(getattr(hist, which))
    floor = hist.floor(which)
    keep = e[:-1] >= 100 * floor
    return (e[1:] / e[:-1])[keep], floor


def above_floor_ratios(hist, factor=100):
    e = np.asarray(hist.transformed_err_inf)
    floor = hist.floor()
    keep = e[1:] >= factor * floor
    return (e[1:] / e[:-1])[keep]


@pytest.fixture(scope="module")
def fig2_2_left(tmp_path_factory):
    cfg = preset("fig2_2_left").replace(outputs=str(tmp_path_factory.mktemp("c1")), emit_plots=False)
    start = time.perf_counter()
    result = run(cfg.replace(alpha=(0.1,)), write=False)
    elapsed = time.perf_counter() - start
    h01 = result.histories[0]
    h001 = run(cfg.replace(alpha=(0.01,)), write=False).histories[0]
    return h01, h001, elapsed


@pytest.fixture(scope="module")
def multistep_runs():
    am = run(preset("fig3_2_left").replace(alpha=(0.1,)), write=False).histories[0]
    bdf4 = run(preset("fig3_2_right"), write=False).histories
    return am, bdf4[0], bdf4[1]


# 1 ---------------------------------------------------------------------------------

def test_criterion_1_one_step_contraction(fig2_2_left):
    h, _, elapsed = fig2_2_left
    ratios, floor = contraction_ratios(h)
    bound = 0.1112 + SLACK
    record(1, [
        (f"max ratio {ratios.max():.4f} <= {bound:.4f} over {ratios.size} sweeps", ratios.max() <= bound),
        (f"floor {floor:.2e} < 1e-11", floor < 1e-11),
        (f"runtime {elapsed:.1f} s <= 60 s", elapsed <= 60.0),
    ])


# 2 ---------------------------------------------------------------------------------

def test_criterion_2_small_alpha(fig2_2_left):
    h01, h, _ = fig2_2_left
    ratios, floor = contraction_ratios(h)
    floor01 = h01.floor()
    bound = 0.0102 + 0.005
    record(2, [
        (f"max ratio {ratios.max():.4f} <= {bound:.4f}", ratios.max() <= bound),
        (f"floor {floor:.2e} < 1e-10", floor < 1e-10),
        (f"floor ratio alpha=0.01 / alpha=0.1 = {floor / floor01:.2f} >= 3", floor >= 3 * floor01),
    ])


# 3 ---------------------------------------------------------------------------------

def test_criterion_3_l_stable_method():
    cfg = preset("fig2_2_right").replace(alpha=(0.1,))
    p = advection_diffusion(cfg.nu, cfg.nx)
    report = assumption1_check(sdirk2(cfg.gamma, cfg.b), p.eigenvalues, cfg.dt)
    h = run(cfg, write=False).histories[0]
    ratios, floor = contraction_ratios(h)
    bound = 0.1112 + SLACK
    record(3, [
        (f"assumption check stable (max|R| = {report.max_abs_R:.12f})", report.stable),
        (f"max ratio {ratios.max():.4f} <= {bound:.4f}", ratios.max() <= bound),
    ])


# 4 ---------------------------------------------------------------------------------

def test_criterion_4_stability_dichotomy():
    method = sdirk2(0.2, 0.5)
    stable = assumption1_check(method, advection_diffusion(1e-3, 100).eigenvalues, 0.02)
    unstable = assumption1_check(method, advection_diffusion(2e-4, 100).eigenvalues, 0.02)
    record(4, [
        (f"nu=1e-3 stable (max|R| = {stable.max_abs_R:.12f})", stable.stable),
        (f"nu=2e-4 unstable (max|R| = {unstable.max_abs_R:.6f})",
         not unstable.stable and unstable.max_abs_R > 1.0),
    ])


# 5 ---------------------------------------------------------------------------------

def test_criterion_5_multistep_ratios(multistep_runs):
    am, b01, b001 = multistep_runs
    r_am = above_floor_ratios(am)
    r01 = above_floor_ratios(b01)
    r001 = above_floor_ratios(b001)

    def within(x, lo, hi):
        return bool(np.all((x >= lo) & (x <= hi)))

    record(5, [
        (f"AM ratios in [{r_am.min():.4f}, {r_am.max():.4f}] within [0.08, 0.14]",
         within(r_am, 0.08, 0.14)),
        (f"BDF4 a=0.1 first ratio {r01[0]:.4f} in [0.40, 0.70]", within(r01[:1], 0.40, 0.70)),
        (f"BDF4 a=0.1 later ratios in [{r01[1:].min():.4f}, {r01[1:].max():.4f}] within [0.08, 0.15]",
         within(r01[1:], 0.08, 0.15)),
        (f"BDF4 a=0.01 first ratio {r001[0]:.4f} in [0.02, 0.10]", within(r001[:1], 0.02, 0.10)),
        (f"BDF4 a=0.01 later ratios in [{r001[1:].min():.4f}, {r001[1:].max():.4f}] "
         f"within [0.005, 0.02]", within(r001[1:], 0.005, 0.02)),
    ])


# 6 ---------------------------------------------------------------------------------

def _random_system(rng):
    Nt = int(rng.integers(1, 9))
    m = int(rng.integers(1, 4))
    if rng.random() < 0.5:
        M = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        M *= rng.uniform(0.1, 1.0) / np.linalg.norm(M, 2)
        return onestep_system(M, rng.standard_normal(m), Nt)
    method = [bdf(1), bdf(2), bdf(3), bdf(4), adams_moulton4()][int(rng.integers(5))]
    Nt = max(Nt, method.r)
    # random operator with spectrum in the right half plane
    Q = rng.standard_normal((m, m)) + np.eye(m) * 2
    lam = rng.uniform(0.0, 3.0, m) + 1j * rng.uniform(-3.0, 3.0, m)
    A = Q @ np.diag(lam) @ np.linalg.inv(Q)
    p = SpatialProblem(A, rng.standard_normal(m))
    return assemble_multistep(p, method, Nt, rng.uniform(0.01, 0.2),
                              startup=rng.standard_normal((method.r, m)))


def test_criterion_6_oracle_equivalence():
    rng = np.random.default_rng(6)
    worst = 0.0
    count = 0
    for _ in range(50):
        sys = _random_system(rng)
        r = rng.standard_normal(sys.size) + 1j * rng.standard_normal(sys.size)
        for alpha in (1.0, 0.5, 0.1):
            got = Preconditioner(sys, alpha).apply(r).ravel()
            want = np.linalg.solve(dense_preconditioner(sys, alpha), r)
            worst = max(worst, np.linalg.norm(got - want) / np.linalg.norm(want))
            count += 1
    record(6, [(f"worst relative error {worst:.2e} <= 1e-9 over {count} cases", worst <= 1e-9)])


# 7 ---------------------------------------------------------------------------------

def test_criterion_7_head_tail_recursion():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        R = rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
        Nt = int(rng.integers(2, 12))
        alpha = rng.uniform(0.01, 0.5)
        sys = onestep_system([[R]], [1.0 + 0.5j], Nt)
        u_star = sequential_solve(sys)[:, 0]
        u0 = rng.standard_normal((Nt, 1)) + 1j * rng.standard_normal((Nt, 1))
        u1, _ = iterate(sys, SolverConfig(alpha=alpha, tol=0.0, max_iterations=1), u0=u0)
        xi0 = u0[:, 0] - u_star
        xi1 = u1[:, 0] - u_star
        scale = np.abs(xi0).max()
        head = abs(xi1[0] - R * alpha * (xi1[-1] - xi0[-1])) / scale
        body = np.abs(xi1[1:] - R * xi1[:-1]).max(initial=0.0) / scale
        worst = max(worst, head, body)
    record(7, [(f"worst relation defect {worst:.2e} <= 1e-11 over 20 scalars", worst <= 1e-11)])


# 8 ---------------------------------------------------------------------------------

def test_criterion_8_stage_reduction():
    rng = np.random.default_rng(8)
    method = sdirk2(0.2, 0.5)
    num, den = method.rational_coefficients()
    worst_solve = worst_aux = 0.0
    for _ in range(20):
        m = int(rng.integers(1, 7))
        A = rng.standard_normal((m, m)) + m * np.eye(m)
        dt = rng.uniform(0.01, 0.5)
        lam = rng.uniform(0.0, 1.0) * np.exp(2j * np.pi * rng.uniform())
        p = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        M = amplification_matrix(method, A, dt)
        want = np.linalg.solve(np.eye(m) - lam * M, p)
        got = stage_reduced_frequency_solve(lam, method, A, dt, p)
        worst_solve = max(worst_solve, np.linalg.norm(got - want) / np.linalg.norm(want))

        a0, a1, a2 = (d - lam * c for d, c in zip(den, num))
        red = stage_reduction(a0, a1, a2)
        q = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        pt, pdag = stage_system_solve(red, A, dt, q)
        aux = pdag - (pt + (a2 / red.mu) * (dt * A) @ pt)
        worst_aux = max(worst_aux, np.abs(aux).max() / np.abs(pdag).max())
    record(8, [
        (f"frequency solve relative error {worst_solve:.2e} <= 1e-9", worst_solve <= 1e-9),
        (f"auxiliary identity defect {worst_aux:.2e} <= 1e-11", worst_aux <= 1e-11),
    ])


# 9 ---------------------------------------------------------------------------------

def test_criterion_9_reference_integrity():
    checks = []
    worst = 0.0
    for name in PRESETS:
        sys = build_system(preset(name))
        u = sequential_solve(sys)
        rel = np.abs(apply_operator(sys, u) - sys.rhs).max() / np.abs(sys.rhs).max()
        worst = max(worst, rel)
    checks.append((f"worst preset residual {worst:.2e} <= 1e-12", worst <= 1e-12))

    p = advection_diffusion(1e-3, 32)
    dt, Nt = 1 / 32, 40
    ms = sequential_solve(assemble_multistep(p, implicit_euler(), Nt, dt))
    M = np.linalg.inv(np.eye(32) + dt * p.A)
    os_ = sequential_solve(onestep_system(M, p.y0, Nt))
    diff = np.abs(ms - os_).max() / np.abs(os_).max()
    checks.append((f"r=1 multistep vs one-step {diff:.2e} <= 1e-12", diff <= 1e-12))
    record(9, checks)


# 10 --------------------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path):
    base = preset("fig2_2_left").replace(alpha=(0.1,), emit_plots=False)
    blobs = []
    for w in (1, 4, 8):
        out = tmp_path / f"w{w}"
        run(base.replace(workers=w, outputs=str(out)))
        blobs.append((out / "convergence.csv").read_bytes())
    same = blobs[0] == blobs[1] == blobs[2]
    record(10, [(f"convergence.csv identical for workers 1, 4, 8 ({len(blobs[0])} bytes)", same)])
