"""Fourier primitives and alpha-circulant eigenstructure.

DFT convention, used everywhere in the package::

    forward:  V_k = sum_n v_n exp(-2 pi i k n / N)          (unnormalized)
    inverse:  v_n = (1/N) sum_k V_k exp(+2 pi i k n / N)

This is ``numpy.fft``'s default ("backward") normalization.

An alpha-circulant matrix ``C`` with first column ``c`` has entries
``C[i, j] = c[(i - j) % N]`` for ``i >= j`` and ``alpha * c[(i - j) % N]`` for
``i < j``.  With ``Gamma = diag(alpha**(n/N))`` it factors as::

    C = Gamma^{-1} F^{-1} diag(fft(Gamma c)) F Gamma

so the "analysis" map ``V^{-1} = F Gamma`` scales then transforms, and the
"synthesis" map ``V = Gamma^{-1} F^{-1}`` inverts that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AlphaCirculant",
    "SpectralTransform",
    "alpha_basis_apply",
    "alpha_circulant_eigenvalues",
    "dft",
]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return alpha


def dft(v, direction: str = "forward", axis: int = 0) -> np.ndarray:
    """Discrete Fourier transform along ``axis`` using the module convention.

    ``direction`` is ``"forward"`` (negative exponent, unnormalized) or
    ``"inverse"`` (positive exponent, scaled by ``1/N``).
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise ValueError("dft requires a non-empty input")
    if direction == "forward":
        return np.fft.fft(v, axis=axis)
    if direction == "inverse":
        return np.fft.ifft(v, axis=axis)
    raise ValueError(f"unknown direction {direction!r}")


def _scaling(n: int, alpha: float) -> np.ndarray:
    # principal real root: alpha**(k/N), k = 0..N-1
    return alpha ** (np.arange(n) / n)


@dataclass(frozen=True)
class AlphaCirculant:
    """An ``N x N`` alpha-circulant matrix stored by its first column."""

    first_column: np.ndarray
    alpha: float

    def __post_init__(self):
        col = np.atleast_1d(np.asarray(self.first_column, dtype=complex))
        if col.ndim != 1 or col.size < 1:
            raise ValueError("first_column must be a non-empty vector")
        object.__setattr__(self, "first_column", col)
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    @classmethod
    def from_coefficients(cls, coeffs, n: int, alpha: float) -> "AlphaCirculant":
        """Build the ``n x n`` matrix whose first column starts with ``coeffs``.

        Coefficients beyond index ``n - 1`` are dropped; missing ones are zero.
        """
        col = np.zeros(n, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)[:n]
        col[: coeffs.size] = coeffs
        return cls(col, alpha)

    @classmethod
    def shift(cls, n: int, alpha: float) -> "AlphaCirculant":
        """The matrix with ones on the subdiagonal and ``alpha`` in the corner."""
        return cls.from_coefficients([0.0, 1.0], n, alpha)

    @property
    def n(self) -> int:
        return self.first_column.size

    def dense(self) -> np.ndarray:
        """Dense reconstruction. Test oracles only."""
        n = self.n
        i, j = np.indices((n, n))
        out = self.first_column[(i - j) % n]
        return np.where(i < j, self.alpha * out, out)

    def eigenvalues(self) -> np.ndarray:
        return alpha_circulant_eigenvalues(self)

    def matvec(self, v) -> np.ndarray:
        """``C @ v`` through the diagonalization; ``v`` may carry trailing axes."""
        v = np.asarray(v, dtype=complex)
        lam = self.eigenvalues().reshape((-1,) + (1,) * (v.ndim - 1))
        p = alpha_basis_apply(v, self.alpha, "analysis")
        return alpha_basis_apply(lam * p, self.alpha, "synthesis")


def alpha_circulant_eigenvalues(C: AlphaCirculant) -> np.ndarray:
    """Eigenvalues ``lambda_k = sum_j c_j (alpha**(1/N) w**k)**j`` with ``w = exp(-2 pi i / N)``.

    Ordered to match :func:`alpha_basis_apply`: frequency ``k`` of the analysis
    output is scaled by ``lambda_k``.
    """
    alpha = _check_alpha(C.alpha)
    return np.fft.fft(_scaling(C.n, alpha) * C.first_column)


def alpha_basis_apply(blocks, alpha: float, direction: str) -> np.ndarray:
    """Apply ``V^{-1} (x) I`` ("analysis") or ``V (x) I`` ("synthesis").

    ``blocks`` is an array of shape ``(N, ...)``: ``N`` time blocks, each of
    any (common) shape.  A ragged sequence of blocks is rejected.
    """
    alpha = _check_alpha(alpha)
    try:
        arr = np.asarray(blocks, dtype=complex)
    except ValueError as exc:  # ragged input
        raise ValueError("all blocks must have the same length") from exc
    if arr.ndim == 0 or arr.shape[0] < 1:
        raise ValueError("need at least one block")
    n = arr.shape[0]
    gamma = _scaling(n, alpha).reshape((-1,) + (1,) * (arr.ndim - 1))
    if direction == "analysis":
        return np.fft.fft(gamma * arr, axis=0)
    if direction == "synthesis":
        return np.fft.ifft(arr, axis=0) / gamma
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class SpectralTransform:
    """The pair ``(V^{-1}, V)`` diagonalizing every ``N x N`` alpha-circulant."""

    n: int
    alpha: float
    _gamma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        object.__setattr__(self, "_gamma", _scaling(self.n, self.alpha))

    def analysis(self, blocks) -> np.ndarray:
        return alpha_basis_apply(blocks, self.alpha, "analysis")

    def synthesis(self, blocks) -> np.ndarray:
        return alpha_basis_apply(blocks, self.alpha, "synthesis")

    def dense_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(V, V^{-1})``. Test oracles only."""
        n = self.n
        k = np.arange(n)
        F = np.exp(-2j * np.pi * np.outer(k, k) / n)
        V_inv = F * self._gamma[None, :]
        V = (F.conj().T / n) / self._gamma[:, None]
        return V, V_inv
