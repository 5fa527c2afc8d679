"""Block alpha-circulant preconditioned iteration for all-at-once systems.

Each sweep computes ``r = b - K u``, ``du = P_alpha^{-1} r`` and ``u += du``.
``P_alpha`` replaces the shift ``B`` (or the Toeplitz ``B1``, ``B2``) by its
alpha-circulant completion, so ``P_alpha^{-1}`` splits into independent
per-frequency solves between an analysis and a synthesis transform.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from ._linalg import PIVOT_RTOL, checked_lu
from .allatonce import AllAtOnceSystem, apply_operator
from .errors import DivergenceError, RoundoffError, SingularSystemError
from .integrators import OneStepMethod
from .problems import SpatialProblem
from .spectral import AlphaCirculant, alpha_basis_apply

__all__ = [
    "IterationHistory",
    "Preconditioner",
    "SolverConfig",
    "StageReduction",
    "apply_correction",
    "dense_preconditioner",
    "error_in_eigencoords",
    "iterate",
    "precond_apply_inverse",
    "precond_apply_inverse_multistep",
    "precond_apply_inverse_onestep",
    "quadratic_solve",
    "shifted_solve",
    "stage_reduced_frequency_solve",
    "stage_reduction",
    "stage_system_solve",
]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.1
    tol: Optional[float] = None  # None: 1e-12 * ||b||_inf
    max_iterations: int = 30
    shifted_solver: str = "dense"
    workers: int = 1
    stagnation: bool = True
    update: str = "increment"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.tol is not None and self.tol < 0:
            raise ValueError("tol must be non-negative")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.shifted_solver not in ("dense", "stage_reduced"):
            raise ValueError(f"unknown shifted_solver {self.shifted_solver!r}")
        if self.workers < 0:
            raise ValueError("workers must be >= 0")
        if self.update not in ("increment", "direct"):
            raise ValueError(f"unknown update form {self.update!r}")

    @property
    def n_workers(self) -> int:
        return self.workers or (os.cpu_count() or 1)


def _lu(matrix, what):
    return checked_lu(matrix, what)


def shifted_solve(eta: complex, A, dt: float, rhs) -> np.ndarray:
    """Solve ``(eta I + dt A) v = rhs`` by dense LU with partial pivoting."""
    A = np.atleast_2d(np.asarray(A))
    matrix = eta * np.eye(A.shape[0]) + dt * A
    v = scipy.linalg.lu_solve(_lu(matrix, f"shifted system (eta={eta})"), rhs)
    resid = np.abs(matrix @ v - rhs).max(initial=0.0)
    bound = 1e-11 * (abs(eta) + np.abs(dt * A).sum(axis=1).max()) * np.abs(v).max(initial=0.0)
    if resid > max(bound, 1e-300):
        raise SingularSystemError(f"shifted system numerically singular (eta={eta})")
    return v


# -- two-stage reduction ---------------------------------------------------

@dataclass(frozen=True)
class StageReduction:
    """``(a0 I + a1 Z + a2 Z^2)`` rewritten as a 2x2 block system with matrix ``W_s``."""

    a0: complex
    a1: complex
    a2: complex
    mu: float
    W: np.ndarray
    V: np.ndarray
    D: np.ndarray

    @property
    def shifts(self) -> np.ndarray:
        """``eta_k = a0 / D_s(k, k)``."""
        return self.a0 / self.D


def _w_matrix(a0, a1, a2, mu):
    return np.array([[a1 - mu, mu], [a1 - mu - a0 * a2 / mu, mu]], dtype=complex)


def stage_reduction(a0: complex, a1: complex, a2: complex, mu: Optional[float] = None) -> StageReduction:
    """Build ``W_s`` and its eigendecomposition.

    Without an explicit ``mu`` the candidates ``{0.25, 0.5, 1, 2, 4} * sqrt(|a0 a2|)``
    are tried and the one with the best-conditioned ``V_s`` is kept.
    """
    if a2 == 0:
        raise ValueError("a2 == 0: the system is linear in Z, no reduction needed")
    if mu is not None:
        candidates = [float(mu)]
    else:
        base = math.sqrt(abs(a0 * a2))
        candidates = [f * base for f in (1.0, 0.25, 0.5, 2.0, 4.0)]
    best = None
    for cand in candidates:
        if cand == 0:
            raise ValueError("mu must be nonzero")
        W = _w_matrix(a0, a1, a2, cand)
        D, V = np.linalg.eig(W)
        cond = np.linalg.cond(V)
        if best is None or cond < best[0]:
            best = (cond, cand, W, V, D)
    cond, mu, W, V, D = best
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystemError("W_s is not diagonalizable for any candidate mu")
    if np.any(np.abs(D) <= PIVOT_RTOL * max(1.0, np.abs(W).max())):
        raise SingularSystemError("W_s has a zero eigenvalue")
    return StageReduction(complex(a0), complex(a1), complex(a2), mu, W, V, D)


def _quadratic_coefficients(lambda_n: complex, method: OneStepMethod):
    num, den = method.rational_coefficients()
    return tuple(complex(d - lambda_n * c) for d, c in zip(den, num))


def _apply_poly(coeffs, Z, p):
    Zp = Z @ p
    return coeffs[0] * p + coeffs[1] * Zp + coeffs[2] * (Z @ Zp)


def stage_system_solve(red: StageReduction, A, dt: float, q_tilde,
                       solve=None) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``(a0 I_2 (x) I + W_s (x) dtA)[p; p_dag] = [q; q]``.

    Returns ``(p_tilde, p_dagger)``.  ``solve(k, rhs)`` may be supplied to
    reuse factorizations of ``eta_k I + dt A``.
    """
    if solve is None:
        def solve(k, rhs):
            return shifted_solve(red.shifts[k], A, dt, rhs)
    q_tilde = np.asarray(q_tilde)
    V_inv = np.linalg.inv(red.V)
    y = V_inv.sum(axis=1)[:, None] * q_tilde[None, :]  # (V^-1 (x) I) [q; q]
    w = np.array([solve(k, y[k] / red.D[k]) for k in range(2)])
    x = red.V @ w
    return x[0], x[1]


def quadratic_solve(a0: complex, a1: complex, a2: complex, A, dt: float, q_tilde,
                    mu: Optional[float] = None) -> np.ndarray:
    """Solve ``(a0 I + a1 Z + a2 Z^2) p = q_tilde`` with ``Z = dt A`` via shifted solves."""
    if abs(a2) <= PIVOT_RTOL * (abs(a0) + abs(a1)):
        if a1 == 0:
            return np.asarray(q_tilde) / a0
        return shifted_solve(a0 / a1, A, dt, np.asarray(q_tilde) / a1)
    red = stage_reduction(a0, a1, a2, mu=mu)
    return stage_system_solve(red, A, dt, q_tilde)[0]


def stage_reduced_frequency_solve(lambda_n: complex, method: OneStepMethod, A, dt: float,
                                  p, mu: Optional[float] = None) -> np.ndarray:
    """Solve ``(I - lambda_n R(dt A)) q = p`` without forming ``R(dt A)``.

    Clearing the denominator of ``R = N/D`` turns the system into
    ``(a0 I + a1 Z + a2 Z^2) q = D(Z) p`` with ``Z = dt A``, ``a_k = d_k - lambda_n n_k``.
    """
    A = np.atleast_2d(np.asarray(A))
    a = _quadratic_coefficients(lambda_n, method)
    _, den = method.rational_coefficients()
    q_tilde = _apply_poly(den, dt * A, np.asarray(p, dtype=complex))
    return quadratic_solve(*a, A, dt, q_tilde, mu=mu)


# -- preconditioner ----------------------------------------------------------

def _parallel_map(fn, n, workers):
    """``[fn(k) for k in range(n)]`` spread over contiguous chunks."""
    if workers <= 1 or n <= 1:
        return [fn(k) for k in range(n)]
    chunks = np.array_split(np.arange(n), min(workers, n))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = pool.map(lambda idx: [fn(k) for k in idx], chunks)
        return [item for part in parts for item in part]


class Preconditioner:
    """Factored ``P_alpha`` for one system; factorizations are reused across sweeps.

    Any ``alpha > 0`` is accepted (``alpha = 1`` is the plain block circulant);
    the iteration itself restricts ``alpha`` to ``(0, 1)``.
    """

    def __init__(self, system: AllAtOnceSystem, alpha: float, shifted_solver="dense", workers=1):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.system = system
        self.alpha = alpha
        self.workers = workers
        self.shifted_solver = shifted_solver
        N, m = system.n_blocks, system.m
        eye = np.eye(m)
        if system.kind == "onestep":
            self.lam = AlphaCirculant.shift(N, alpha).eigenvalues()
            if shifted_solver == "stage_reduced":
                self._setup_stage_reduced()
                return
            M = system.M
            self._factors = _parallel_map(
                lambda k: _lu(eye - self.lam[k] * M, f"frequency system {k}"), N, workers)
            self._scales = np.ones(N)
        else:
            if shifted_solver != "dense":
                raise ValueError("stage reduction applies to one-step systems only")
            meth = system.method
            lam1 = AlphaCirculant.from_coefficients(meth.a, N, alpha).eigenvalues()
            lam2 = AlphaCirculant.from_coefficients(meth.b, N, alpha).eigenvalues()
            A, dt = system.A, system.dt
            tiny = PIVOT_RTOL * np.abs(lam1).max()

            def factor(k):
                # (lam1 I + dt lam2 A) = lam2 (eta I + dt A)
                if abs(lam2[k]) > tiny:
                    return _lu(lam1[k] / lam2[k] * eye + dt * A, f"frequency system {k}")
                return _lu(lam1[k] * eye, f"frequency system {k}")

            self._factors = _parallel_map(factor, N, workers)
            self._scales = np.where(np.abs(lam2) > tiny, lam2, 1.0)
        self._solve = self._solve_dense

    def _setup_stage_reduced(self):
        system = self.system
        method = system.method
        if not isinstance(method, OneStepMethod) or method.stages != 2:
            raise ValueError("stage reduction needs a two-stage one-step method")
        A, dt = system.A, system.dt
        eye = np.eye(system.m)
        self._den = method.rational_coefficients()[1]
        self._Z = dt * A

        def setup(k):
            a = _quadratic_coefficients(self.lam[k], method)
            red = stage_reduction(*a)
            lus = [_lu(s * eye + dt * A, f"shifted system {k}") for s in red.shifts]
            return red, lus

        self._reductions = _parallel_map(setup, system.n_blocks, self.workers)
        self._solve = self._solve_stage_reduced

    def _solve_dense(self, k, p):
        return scipy.linalg.lu_solve(self._factors[k], p / self._scales[k])

    def _solve_stage_reduced(self, k, p):
        red, lus = self._reductions[k]
        q_tilde = _apply_poly(self._den, self._Z, p)
        return stage_system_solve(
            red, None, None, q_tilde,
            solve=lambda j, rhs: scipy.linalg.lu_solve(lus[j], rhs))[0]

    def apply(self, r) -> np.ndarray:
        R = self.system.blocks(r)
        P = alpha_basis_apply(R, self.alpha, "analysis")
        Q = np.empty_like(P)

        def work(k):
            Q[k] = self._solve(k, P[k])

        _parallel_map(work, P.shape[0], self.workers)
        du = alpha_basis_apply(Q, self.alpha, "synthesis")
        if self.system.is_real and np.isrealobj(R):
            scale = np.abs(du).max(initial=0.0)
            limit = max(1e-10, 10.0 * EPS / self.alpha**2) * scale
            if np.abs(du.imag).max(initial=0.0) > limit:
                raise RoundoffError("imaginary residue after synthesis exceeds threshold")
            du = du.real
        return du


def _preconditioner(system, config: SolverConfig) -> Preconditioner:
    key = ("precond", config.alpha, config.shifted_solver)
    pre = system._cache.get(key)
    if pre is None:
        pre = Preconditioner(system, config.alpha, config.shifted_solver, config.n_workers)
        system._cache[key] = pre
    pre.workers = config.n_workers
    return pre


def precond_apply_inverse(r, system: AllAtOnceSystem, config: SolverConfig) -> np.ndarray:
    return _preconditioner(system, config).apply(r)


def precond_apply_inverse_onestep(r, system: AllAtOnceSystem, config: SolverConfig) -> np.ndarray:
    if system.kind != "onestep":
        raise ValueError("expected a one-step system")
    return precond_apply_inverse(r, system, config)


def precond_apply_inverse_multistep(r, system: AllAtOnceSystem, config: SolverConfig) -> np.ndarray:
    if system.kind != "multistep":
        raise ValueError("expected a multistep system")
    return precond_apply_inverse(r, system, config)


def dense_preconditioner(system: AllAtOnceSystem, alpha: float) -> np.ndarray:
    """Dense ``P_alpha``. Test oracles only."""
    N, m = system.n_blocks, system.m
    if system.kind == "onestep":
        C = AlphaCirculant.shift(N, alpha).dense()
        return np.eye(N * m) - np.kron(C, system.M)
    C1 = AlphaCirculant.from_coefficients(system.method.a, N, alpha).dense()
    C2 = AlphaCirculant.from_coefficients(system.method.b, N, alpha).dense()
    return np.kron(C1, np.eye(m)) + system.dt * np.kron(C2, system.A)


def apply_correction(system: AllAtOnceSystem, alpha: float, u) -> np.ndarray:
    """Matrix-free ``(P_alpha - K) u``: only the first ``r`` block rows are nonzero."""
    U = system.blocks(u)
    N = U.shape[0]
    out = np.zeros(U.shape, dtype=np.result_type(U, system.A, float))
    if system.kind == "onestep":
        if N > 1:  # a single block has no wrap-around entry
            out[0] = -alpha * (system.M @ U[-1])
        return out
    a, b, dt, r = system.method.a, system.method.b, system.dt, system.method.r
    for i in range(min(r, N)):
        for lag in range(i + 1, r + 1):
            j = N + i - lag
            if i < j < N:
                out[i] += alpha * (a[lag] * U[j] + dt * b[lag] * (system.A @ U[j]))
    return out


# -- instrumentation ----------------------------------------------------------

def error_in_eigencoords(err, problem: SpatialProblem, Nt: Optional[int] = None) -> float:
    """``max |(I_t (x) Q) err|`` where ``Q`` maps into the eigenbasis of ``A``."""
    if problem is None or not problem.has_eigentransform:
        raise ValueError("problem has no eigentransform")
    E = np.asarray(err).reshape(-1, problem.m)
    if Nt is not None and E.shape[0] != Nt:
        raise ValueError(f"expected {Nt} time blocks, got {E.shape[0]}")
    if E.size == 0:
        return 0.0
    # per-mode sequences are the columns of the transformed block array
    return float(np.abs(problem.to_eigencoords(E)).max())


@dataclass
class IterationHistory:
    alpha: float
    label: str
    Nt: int
    m: int
    dt: float
    err_inf: list = field(default_factory=list)
    transformed_err_inf: list = field(default_factory=list)
    residual_inf: list = field(default_factory=list)
    theoretical_bound: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def bound(self) -> float:
        return self.alpha / (1.0 - self.alpha)

    @property
    def iterations(self) -> int:
        """Number of completed sweeps (entries minus the initial guess)."""
        return len(self.residual_inf) - 1

    def ratios(self, which: str = "transformed_err_inf") -> np.ndarray:
        vals = np.asarray(getattr(self, which), dtype=float)
        return vals[1:] / vals[:-1]

    def floor(self, which: str = "transformed_err_inf", tail: int = 5) -> float:
        """Median of the last ``tail`` entries: the stagnation level of a run."""
        vals = np.asarray(getattr(self, which), dtype=float)
        return float(np.median(vals[-tail:]))

    def rows(self):
        for k in range(len(self.residual_inf)):
            yield {
                "iter": k,
                "err_inf": self.err_inf[k],
                "transformed_err_inf": self.transformed_err_inf[k],
                "residual_inf": self.residual_inf[k],
                "bound": self.theoretical_bound[k],
            }


def _stagnated(vals) -> bool:
    if len(vals) < 4:
        return False
    last = vals[-4:]
    return all(abs(b - a) < 0.01 * abs(a) for a, b in zip(last[:-1], last[1:]))


def _diverging(vals) -> bool:
    if len(vals) < 4:
        return False
    last = vals[-4:]
    increasing = all(b > a for a, b in zip(last[:-1], last[1:]))
    return increasing and last[-1] > 10.0 * last[0]


def iterate(system: AllAtOnceSystem, config: SolverConfig, u_exact=None, u0=None):
    """Run the preconditioned stationary iteration.

    ``config.update == "increment"`` applies ``P^{-1}`` to the residual;
    ``"direct"`` computes ``u <- P^{-1}((P - K) u + b)``, which is the same map
    in exact arithmetic but carries the diagonalization roundoff into ``u``.

    Returns ``(u, history)``.  With ``u_exact`` the history records the error
    and its eigencoordinate norm; stagnation and divergence are judged on the
    error then, on the residual otherwise.
    """
    b = system.rhs
    pre = _preconditioner(system, config)
    if u0 is None:
        u = np.zeros(b.shape, dtype=b.dtype)
    else:
        u = np.array(system.blocks(u0), dtype=np.result_type(b, u0))
    b_norm = float(np.abs(b).max(initial=0.0))
    tol = 1e-12 * b_norm if config.tol is None else config.tol
    problem = system.problem
    transformable = problem is not None and problem.has_eigentransform
    if u_exact is not None:
        u_exact = system.blocks(u_exact)
    label = getattr(system.method, "label", "custom")
    hist = IterationHistory(config.alpha, label, system.n_blocks, system.m, system.dt)

    k = 0
    while True:
        resid = b - apply_operator(system, u)
        hist.residual_inf.append(float(np.abs(resid).max(initial=0.0)))
        hist.theoretical_bound.append(hist.bound)
        if u_exact is not None:
            err = u - u_exact
            hist.err_inf.append(float(np.abs(err).max(initial=0.0)))
            hist.transformed_err_inf.append(
                error_in_eigencoords(err, problem) if transformable else math.nan)
        else:
            hist.err_inf.append(math.nan)
            hist.transformed_err_inf.append(math.nan)
        monitor = hist.err_inf if u_exact is not None else hist.residual_inf

        if hist.residual_inf[-1] <= tol:
            hist.stop_reason = "converged"
            break
        if k >= config.max_iterations:
            hist.stop_reason = "max_iterations"
            break
        if config.stagnation and _stagnated(monitor):
            hist.stop_reason = "stagnated"
            break
        if _diverging(monitor):
            hist.stop_reason = "diverged"
            raise DivergenceError(
                f"iteration diverged at sweep {k} (alpha={config.alpha})", history=hist)
        if config.update == "increment":
            u = u + pre.apply(resid)
        else:
            u = pre.apply(apply_correction(system, config.alpha, u) + b)
        k += 1
    return u, hist
