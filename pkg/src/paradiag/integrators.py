"""One-step (Runge-Kutta) and linear multistep method descriptors.

Stability functions follow the Dahlquist convention for ``y' = -lambda y``:
with ``z = dt * lambda`` a one-step method maps ``y_n`` to ``R(z) y_n`` and

    R(z) = 1 - z b^T (I + z Theta)^{-1} 1.

Multistep coefficients are stored for the scheme

    sum_j a_j y_{n+r-j} + dt sum_j b_j A y_{n+r-j} = dt sum_j b_j g_{n+r-j}

so the characteristic polynomial is ``p(s; z) = sum_j (a_j + z b_j) s^(r-j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from ._linalg import checked_lu
from .errors import DegenerateLeadingCoefficientError, PoleError

__all__ = [
    "ButcherTableau",
    "MultistepMethod",
    "OneStepMethod",
    "StabilityReport",
    "adams_moulton4",
    "amplification_matrix",
    "assumption1_check",
    "assumption2_check",
    "bdf",
    "characteristic_roots",
    "implicit_euler",
    "sdirk2",
    "stability_eval",
]

# Root-condition thresholds.
ROOT_TOL = 1e-9
ROOT_TOL_STRICT = 1e-9
ROOT_TOL_SEP = 1e-7
STABILITY_TOL = 1e-12


@dataclass(frozen=True)
class ButcherTableau:
    theta: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        s = theta.shape[0]
        if s < 1 or theta.shape != (s, s) or b.shape != (s,) or c.shape != (s,):
            raise ValueError("inconsistent Butcher tableau shapes")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class OneStepMethod:
    tableau: ButcherTableau
    label: str = "rk"

    @property
    def stages(self) -> int:
        return self.tableau.stages

    def R(self, z) -> complex:
        return stability_eval(self, z)

    def rational_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Numerator and denominator of ``R(z)`` as ascending coefficient arrays.

        Only two-stage methods are supported.  For ``X`` 2x2,
        ``det(I + zX) = 1 + tr(X) z + det(X) z^2``; the numerator uses
        ``X = Theta - 1 b^T`` (matrix determinant lemma).
        """
        if self.stages != 2:
            raise ValueError("rational form is implemented for two-stage methods only")
        theta, b = self.tableau.theta, self.tableau.b

        def det_poly(X):
            return np.array([1.0, np.trace(X), np.linalg.det(X)])

        return det_poly(theta - np.outer(np.ones(2), b)), det_poly(theta)


def sdirk2(gamma: float, b: float = 0.5, label: str | None = None) -> OneStepMethod:
    """Two-stage SDIRK with diagonal ``gamma`` and weights ``(b, 1 - b)``.

    The off-diagonal entry is fixed by the order-2 condition
    ``gamma b + (gt + gamma)(1 - b) = 1/2``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if b == 1:
        raise ZeroDivisionError("b = 1 makes the order condition singular")
    gt = (0.5 - gamma * b) / (1.0 - b) - gamma
    theta = np.array([[gamma, 0.0], [gt, gamma]])
    tableau = ButcherTableau(theta, [b, 1.0 - b], [gamma, gamma + gt])
    return OneStepMethod(tableau, label or f"sdirk2(gamma={gamma:.6g}, b={b:.6g})")


def stability_eval(method: OneStepMethod, z) -> complex:
    z = complex(z)
    tab = method.tableau
    s = tab.stages
    lhs = np.eye(s) + z * tab.theta
    lu = checked_lu(lhs, f"stage matrix at z={z} (pole of R)", PoleError)
    k = scipy.linalg.lu_solve(lu, np.ones(s, dtype=complex))
    return complex(1.0 - z * tab.b @ k)


@dataclass(frozen=True)
class StabilityReport:
    max_abs_R: float
    worst_eigenvalue: complex | None
    stable: bool


def assumption1_check(method: OneStepMethod, spectrum, dt: float) -> StabilityReport:
    """Certify ``|R(dt * lambda)| <= 1`` on ``spectrum`` (tolerance 1e-12)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    spectrum = np.atleast_1d(np.asarray(spectrum, dtype=complex))
    if spectrum.size == 0:
        return StabilityReport(0.0, None, True)
    mags = np.array([abs(stability_eval(method, dt * lam)) for lam in spectrum])
    worst = int(np.argmax(mags))
    max_abs = float(mags[worst])
    return StabilityReport(max_abs, complex(spectrum[worst]), max_abs <= 1.0 + STABILITY_TOL)


def amplification_matrix(method: OneStepMethod, A, dt: float) -> np.ndarray:
    """Dense ``R(dt A) = I - (b^T (x) dtA)(I_s (x) I + Theta (x) dtA)^{-1}(1 (x) I)``."""
    A = np.atleast_2d(np.asarray(A))
    m = A.shape[0]
    tab = method.tableau
    s = tab.stages
    Z = dt * A
    stage = np.eye(s * m) + np.kron(tab.theta, Z)
    rhs = np.kron(np.ones((s, 1)), np.eye(m))
    lu = checked_lu(stage, "stage system")
    stages = scipy.linalg.lu_solve(lu, rhs)
    M = np.eye(m) - np.kron(tab.b[None, :], Z) @ stages
    if np.isrealobj(A):
        M = M.real
    return M


@dataclass(frozen=True)
class MultistepMethod:
    """An ``r``-step method with coefficient vectors ``a`` (``a[0] == 1``) and ``b``."""

    a: np.ndarray
    b: np.ndarray
    label: str = "multistep"

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.size < 2 or a.shape != b.shape:
            raise ValueError("a and b must both have r + 1 >= 2 entries")
        if a[0] != 1.0:
            raise ValueError("coefficients must be normalized so that a[0] == 1")
        if abs(a.sum()) > 1e-12:
            raise ValueError("inconsistent method: sum(a) must vanish")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def r(self) -> int:
        return self.a.size - 1

    def char_poly(self, z) -> np.ndarray:
        """Descending coefficients of ``p(s; z)``."""
        return self.a + complex(z) * self.b


def _frac(*xs):
    return [float(Fraction(x)) for x in xs]


_BDF = {
    1: (_frac(1, -1), _frac(1, 0)),
    2: (_frac(1, "-4/3", "1/3"), _frac("2/3", 0, 0)),
    3: (_frac(1, "-18/11", "9/11", "-2/11"), _frac("6/11", 0, 0, 0)),
    4: (_frac(1, "-48/25", "36/25", "-16/25", "3/25"), _frac("12/25", 0, 0, 0, 0)),
}


def bdf(order: int) -> MultistepMethod:
    """BDF of order 1-4."""
    try:
        a, b = _BDF[order]
    except KeyError:
        raise ValueError(f"BDF order must be in 1..4, got {order}") from None
    return MultistepMethod(a, b, f"bdf{order}")


def implicit_euler() -> MultistepMethod:
    return MultistepMethod([1.0, -1.0], [1.0, 0.0], "implicit_euler")


def adams_moulton4() -> MultistepMethod:
    """Modified four-step Adams-Moulton method (third order).

    ``y_{n+1} - y_n + dt A (2/3 y_{n+1} + 5/12 y_{n-1} - 1/12 y_{n-3}) = 0``.
    """
    a = _frac(1, -1, 0, 0, 0)
    b = _frac("2/3", 0, "5/12", 0, "-1/12")
    return MultistepMethod(a, b, "am4")


def characteristic_roots(method: MultistepMethod, z) -> np.ndarray:
    """Roots of ``p(s; z)`` from the companion matrix (``numpy.roots``)."""
    coeffs = method.char_poly(z)
    lead = coeffs[0]
    if abs(lead) <= 1e-14 * max(1.0, np.abs(coeffs).max()):
        raise DegenerateLeadingCoefficientError(f"p(s; {z}) drops degree: a0 + z b0 = {lead}")
    return np.roots(coeffs).astype(complex)


def _root_condition(roots: np.ndarray) -> bool:
    mags = np.abs(roots)
    if np.any(mags > 1.0 + ROOT_TOL):
        return False
    boundary = roots[mags >= 1.0 - ROOT_TOL_STRICT]
    for i in range(boundary.size):
        for j in range(i + 1, boundary.size):
            if abs(boundary[i] - boundary[j]) <= ROOT_TOL_SEP:
                return False
    return True


def assumption2_check(method: MultistepMethod, spectrum, dt: float) -> StabilityReport:
    """Root condition for every ``z = dt * lambda``; reports the largest root modulus."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    spectrum = np.atleast_1d(np.asarray(spectrum, dtype=complex))
    if spectrum.size == 0:
        return StabilityReport(0.0, None, True)
    stable = True
    worst_mag, worst_lam = -math.inf, None
    for lam in spectrum:
        roots = characteristic_roots(method, dt * lam)
        mag = float(np.abs(roots).max())
        if mag > worst_mag:
            worst_mag, worst_lam = mag, complex(lam)
        stable &= _root_condition(roots)
    return StabilityReport(worst_mag, worst_lam, bool(stable))
