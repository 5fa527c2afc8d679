"""All-at-once assembly of one-step and multistep time discretizations.

Block vectors are arrays of shape ``(N, m)``: row ``n`` is the spatial state
at the ``n``-th unknown time level.  Functions accept flat vectors of length
``N * m`` as well and return the blocked form.

One-step schemes are written ``y_{n+1} = M y_n + eta_n`` with ``M = R(dt A)``,
so the operator is ``K = I_t (x) I_x - B (x) M`` with ``B`` the ones-subdiagonal
shift.  Multistep schemes have unknowns ``y_r .. y_{Nt}`` and operator
``K = B1 (x) I_x + dt B2 (x) A`` with lower-triangular Toeplitz ``B1``, ``B2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg

from ._linalg import checked_lu
from .integrators import MultistepMethod, OneStepMethod, amplification_matrix
from .problems import SpatialProblem

__all__ = [
    "AllAtOnceSystem",
    "apply_operator",
    "assemble_multistep",
    "assemble_onestep",
    "dense_operator",
    "integrate_onestep",
    "onestep_system",
    "sequential_solve",
]

StartupSource = Union[str, OneStepMethod]


def _result_dtype(*arrays):
    return np.result_type(*[np.asarray(a).dtype for a in arrays], np.float64)


def _lu(matrix, what="implicit step"):
    return checked_lu(matrix, f"{what} matrix")


@dataclass
class AllAtOnceSystem:
    """The space-time system ``K u = b``.

    For ``kind == "onestep"`` the data is the amplification matrix ``M``;
    for ``kind == "multistep"`` it is ``method``, ``A``, ``dt`` and the
    ``startup`` values ``y_0 .. y_{r-1}``.
    """

    kind: str
    rhs: np.ndarray
    dt: float
    Nt: int
    A: np.ndarray
    M: Optional[np.ndarray] = None
    method: Optional[Union[OneStepMethod, MultistepMethod]] = None
    startup: Optional[np.ndarray] = None
    problem: Optional[SpatialProblem] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_blocks(self) -> int:
        return self.rhs.shape[0]

    @property
    def m(self) -> int:
        return self.rhs.shape[1]

    @property
    def size(self) -> int:
        return self.rhs.size

    @property
    def is_real(self) -> bool:
        return np.isrealobj(self.rhs) and np.isrealobj(self.A) and (
            self.M is None or np.isrealobj(self.M)
        )

    @property
    def r(self) -> int:
        return self.method.r if self.kind == "multistep" else 1

    def blocks(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.size != self.size:
            raise ValueError(f"expected {self.size} entries, got {u.size}")
        return u.reshape(self.n_blocks, self.m)

    def times(self) -> np.ndarray:
        """Time of each unknown block."""
        first = self.r if self.kind == "multistep" else 1
        return self.dt * np.arange(first, self.Nt + 1)


def onestep_system(M, y0, Nt: int, eta=None, dt: float = 1.0, A=None,
                   method=None, problem=None) -> AllAtOnceSystem:
    """One-step system from an explicit amplification matrix.

    ``eta`` (shape ``(Nt, m)``) holds ``eta_0 .. eta_{Nt-1}``; zero if omitted.
    """
    M = np.atleast_2d(np.asarray(M))
    y0 = np.atleast_1d(np.asarray(y0))
    if Nt < 1:
        raise ValueError("Nt must be >= 1")
    m = M.shape[0]
    if M.shape != (m, m) or y0.shape != (m,):
        raise ValueError("shape mismatch between M and y0")
    dtype = _result_dtype(M, y0) if eta is None else _result_dtype(M, y0, eta)
    rhs = np.zeros((Nt, m), dtype=dtype)
    if eta is not None:
        rhs += np.asarray(eta).reshape(Nt, m)
    rhs[0] += M @ y0
    if A is None:
        A = np.zeros_like(M)
    return AllAtOnceSystem("onestep", rhs, dt, Nt, np.asarray(A), M=M,
                           method=method, problem=problem)


def _rk_source_terms(problem, method, Nt, dt):
    """``eta_n`` for ``n = 0 .. Nt-1``: the forcing contribution of one RK step."""
    tab = method.tableau
    s, m = tab.stages, problem.m
    Z = dt * problem.A
    lu = _lu(np.eye(s * m) + np.kron(tab.theta, Z), "stage system")
    bZ = np.kron(tab.b[None, :], Z)
    bI = np.kron(tab.b[None, :], np.eye(m))
    thetaI = np.kron(tab.theta, np.eye(m))
    eta = []
    for n in range(Nt):
        G = np.concatenate([problem.g((n + c) * dt) for c in tab.c])
        stages = scipy.linalg.lu_solve(lu, dt * thetaI @ G)
        eta.append(-bZ @ stages + dt * bI @ G)
    return np.array(eta)


def assemble_onestep(problem: SpatialProblem, method: OneStepMethod, Nt: int,
                     dt: float) -> AllAtOnceSystem:
    if not dt > 0:
        raise ValueError("dt must be positive")
    M = amplification_matrix(method, problem.A, dt)
    eta = None if problem.source is None else _rk_source_terms(problem, method, Nt, dt)
    return onestep_system(M, problem.y0, Nt, eta=eta, dt=dt, A=problem.A,
                          method=method, problem=problem)


def integrate_onestep(problem: SpatialProblem, method: OneStepMethod, Nt: int,
                      dt: float, y0=None) -> np.ndarray:
    """Plain time stepping through the stage equations; returns ``y_1 .. y_Nt``.

    Independent of :func:`amplification_matrix`: every step solves the
    ``s * m`` stage system directly.
    """
    tab = method.tableau
    s, m = tab.stages, problem.m
    Z = dt * problem.A
    lu = _lu(np.eye(s * m) + np.kron(tab.theta, Z), "stage system")
    y = np.array(problem.y0 if y0 is None else y0, dtype=_result_dtype(problem.A, problem.y0))
    out = np.empty((Nt, m), dtype=y.dtype)
    forced = problem.source is not None
    for n in range(Nt):
        rhs = np.tile(y, s)
        if forced:
            G = np.concatenate([problem.g((n + c) * dt) for c in tab.c])
            rhs = rhs + dt * np.kron(tab.theta, np.eye(m)) @ G
        stages = scipy.linalg.lu_solve(lu, rhs).reshape(s, m)
        incr = -stages @ Z.T
        if forced:
            incr = incr + dt * G.reshape(s, m)
        y = y + tab.b @ incr
        out[n] = y
    return out


def _startup_values(problem, method, dt, startup_source):
    r = method.r
    if isinstance(startup_source, OneStepMethod):
        steps = integrate_onestep(problem, startup_source, r - 1, dt) if r > 1 else np.empty((0, problem.m))
        return np.vstack([problem.y0[None, :], steps])
    if startup_source == "exact":
        return np.array([problem.exact_solution(n * dt) for n in range(r)])
    raise ValueError(f"unknown startup source {startup_source!r}")


def assemble_multistep(problem: SpatialProblem, method: MultistepMethod, Nt: int,
                       dt: float, startup_source: StartupSource = "exact",
                       startup=None) -> AllAtOnceSystem:
    """Unknowns ``y_r .. y_Nt``; the startup values are folded into the rhs.

    ``startup`` (shape ``(r, m)``) overrides ``startup_source`` when given.
    """
    r = method.r
    if not dt > 0:
        raise ValueError("dt must be positive")
    if Nt < r:
        raise ValueError(f"Nt={Nt} is smaller than the step count r={r}")
    if startup is None:
        startup = _startup_values(problem, method, dt, startup_source)
    startup = np.asarray(startup).reshape(r, problem.m)
    A = problem.A
    _lu(method.a[0] * np.eye(problem.m) + dt * method.b[0] * A)

    n_unknown = Nt - r + 1
    forced = problem.source is not None
    dtype = _result_dtype(A, startup)
    g = None
    if forced:
        g = np.array([problem.g(n * dt) for n in range(Nt + 1)])
        dtype = _result_dtype(A, startup, g)
    rhs = np.zeros((n_unknown, problem.m), dtype=dtype)
    startup_A = startup @ A.T
    for i in range(n_unknown):
        n = r + i
        if forced:
            rhs[i] += dt * sum(method.b[j] * g[n - j] for j in range(r + 1))
        for j in range(i + 1, r + 1):
            k = n - j  # startup level
            rhs[i] -= method.a[j] * startup[k] + dt * method.b[j] * startup_A[k]
    return AllAtOnceSystem("multistep", rhs, dt, Nt, A, method=method,
                           startup=startup, problem=problem)


def apply_operator(system: AllAtOnceSystem, u) -> np.ndarray:
    """Matrix-free ``K u`` in ``O(N)`` block operations."""
    U = system.blocks(u)
    if system.kind == "onestep":
        out = np.array(U, dtype=np.result_type(U, system.M))
        out[1:] -= U[:-1] @ system.M.T
        return out
    a, b, dt = system.method.a, system.method.b, system.dt
    AU = U @ system.A.T
    out = np.zeros(U.shape, dtype=np.result_type(U, system.A))
    for j in range(system.method.r + 1):
        if j >= U.shape[0]:
            break
        out[j:] += a[j] * U[: U.shape[0] - j] + dt * b[j] * AU[: U.shape[0] - j]
    return out


def sequential_solve(system: AllAtOnceSystem) -> np.ndarray:
    """Block forward substitution, i.e. ordinary time stepping."""
    rhs = system.rhs
    N = system.n_blocks
    if system.kind == "onestep":
        M = system.M
        out = np.empty(rhs.shape, dtype=np.result_type(rhs, M))
        prev = np.zeros(system.m, dtype=out.dtype)
        for n in range(N):
            prev = rhs[n] + M @ prev
            out[n] = prev
        return out
    a, b, dt, A = system.method.a, system.method.b, system.dt, system.A
    r = system.method.r
    lu = system._cache.get("step_lu")
    if lu is None:
        lu = _lu(a[0] * np.eye(system.m) + dt * b[0] * A)
        system._cache["step_lu"] = lu
    out = np.zeros(rhs.shape, dtype=np.result_type(rhs, A))
    for i in range(N):
        acc = np.array(rhs[i], dtype=out.dtype)
        for j in range(1, min(i, r) + 1):
            acc -= a[j] * out[i - j] + dt * b[j] * (A @ out[i - j])
        out[i] = scipy.linalg.lu_solve(lu, acc)
    return out


def dense_operator(system: AllAtOnceSystem) -> np.ndarray:
    """Dense ``K``. Test oracles only."""
    N, m = system.n_blocks, system.m
    if system.kind == "onestep":
        B = np.eye(N, k=-1)
        return np.eye(N * m) - np.kron(B, system.M)
    B1 = sum(c * np.eye(N, k=-j) for j, c in enumerate(system.method.a) if j < N)
    B2 = sum(c * np.eye(N, k=-j) for j, c in enumerate(system.method.b) if j < N)
    return np.kron(B1, np.eye(m)) + system.dt * np.kron(B2, system.A)
