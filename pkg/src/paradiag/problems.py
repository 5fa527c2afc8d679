"""Semi-discrete test problems ``y' + A y = g`` on periodic grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["SpatialProblem", "advection_diffusion", "scalar_problem", "wave_first_order"]

Sampler = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class SpatialProblem:
    """A linear operator with initial data, forcing, and (optionally) its eigenbasis.

    ``to_eigencoords`` maps a state vector into coordinates in which ``A`` is
    diagonal: ``to_eigencoords(A @ v) == eigenvalues * to_eigencoords(v)``.
    ``from_eigencoords`` is its inverse.  ``eigenvalues`` may be given without
    a transform (e.g. for defective operators) so the spectrum is still
    available for stability checks.
    """

    A: np.ndarray
    y0: np.ndarray
    source: Optional[Sampler] = None
    eigenvalues: Optional[np.ndarray] = None
    to_eigencoords: Optional[Callable[[np.ndarray], np.ndarray]] = None
    from_eigencoords: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "problem"

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def has_eigentransform(self) -> bool:
        return self.to_eigencoords is not None and self.from_eigencoords is not None

    @property
    def is_real(self) -> bool:
        return np.isrealobj(self.A) and np.isrealobj(self.y0)

    def g(self, t: float) -> np.ndarray:
        if self.source is None:
            return np.zeros(self.m, dtype=self.A.dtype)
        return np.asarray(self.source(t))

    def exact_solution(self, t: float) -> np.ndarray:
        """``exp(-tA) y0`` for unforced problems with an eigentransform."""
        if self.source is not None:
            raise ValueError("exact solution is only available for unforced problems")
        if not self.has_eigentransform:
            raise ValueError(f"{self.label}: no eigentransform available")
        coeffs = self.to_eigencoords(self.y0)
        y = self.from_eigencoords(np.exp(-t * self.eigenvalues) * coeffs)
        return y.real if self.is_real else y


def _grid(nx: int) -> tuple[np.ndarray, float]:
    if nx < 3:
        raise ValueError(f"need at least 3 grid points, got {nx}")
    dx = 1.0 / nx
    return -0.5 + dx * np.arange(nx), dx


def _circulant_from_row(row) -> np.ndarray:
    row = np.asarray(row)
    n = row.size
    i, j = np.indices((n, n))
    return row[(j - i) % n]


def _fourier_pair(n: int):
    # to_eig = inverse DFT; coordinate j of a circulant with first row r
    # is scaled by sum_k r_k exp(-2 pi i j k / n).
    def to_eig(v):
        return np.fft.ifft(np.asarray(v), axis=-1)

    def from_eig(w):
        return np.fft.fft(np.asarray(w), axis=-1)

    return to_eig, from_eig


def advection_diffusion(nu: float, nx: int) -> SpatialProblem:
    """Centered differences for ``u_t - nu u_xx + u_x = 0`` on ``(-1/2, 1/2)``, periodic.

    Both parts are circulant.  The diffusion part has first row
    ``nu (2, -1, 0, ..., 0, -1) / dx^2`` and the advection part has first row
    ``(0, -1, 0, ..., 0, 1) / (2 dx)``.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    x, dx = _grid(nx)
    diff = np.zeros(nx)
    diff[[0, 1, -1]] = [2.0, -1.0, -1.0]
    adv = np.zeros(nx)
    adv[[1, -1]] = [-1.0, 1.0]
    A = nu / dx**2 * _circulant_from_row(diff) + 1.0 / (2.0 * dx) * _circulant_from_row(adv)
    theta = 2.0 * np.pi * np.arange(nx) / nx
    eigs = 2.0 * nu / dx**2 * (1.0 - np.cos(theta)) + 1j / dx * np.sin(theta)
    to_eig, from_eig = _fourier_pair(nx)
    return SpatialProblem(
        A=A,
        y0=np.sin(2.0 * np.pi * x),
        eigenvalues=eigs,
        to_eigencoords=to_eig,
        from_eigencoords=from_eig,
        label=f"advection_diffusion(nu={nu:g}, nx={nx})",
    )


def wave_first_order(nx: int) -> SpatialProblem:
    """``u_tt = u_xx`` reduced to first order: ``A = [[0, -I], [-Lap_h, 0]]``.

    The constant Fourier mode gives a 2x2 Jordan block, so ``A`` is not
    diagonalizable; only the spectrum ``{+-i sqrt(mu_j)}`` is attached.
    Initial data are ``u = sin(2 pi x)``, ``u_t = 0``.
    """
    x, dx = _grid(nx)
    row = np.zeros(nx)
    row[[0, 1, -1]] = [2.0, -1.0, -1.0]
    neg_lap = _circulant_from_row(row) / dx**2
    Z = np.zeros((nx, nx))
    A = np.block([[Z, -np.eye(nx)], [neg_lap, Z]])
    mu = 2.0 / dx**2 * (1.0 - np.cos(2.0 * np.pi * np.arange(nx) / nx))
    root = np.sqrt(mu)
    eigs = np.concatenate([1j * root, -1j * root])
    y0 = np.concatenate([np.sin(2.0 * np.pi * x), np.zeros(nx)])
    return SpatialProblem(A=A, y0=y0, eigenvalues=eigs, label=f"wave(nx={nx})")


def scalar_problem(lam: complex, y0: complex = 1.0) -> SpatialProblem:
    """The Dahlquist test equation ``y' + lam y = 0``."""
    lam = complex(lam)
    if lam.real < 0:
        raise ValueError("Re(lambda) must be non-negative")
    if lam.imag == 0 and complex(y0).imag == 0:
        A = np.array([[lam.real]])
        y = np.array([complex(y0).real])
    else:
        A = np.array([[lam]])
        y = np.array([complex(y0)])
    return SpatialProblem(
        A=A,
        y0=y,
        eigenvalues=np.array([lam]),
        to_eigencoords=lambda v: np.array(v, dtype=complex),
        from_eigencoords=lambda w: np.array(w, dtype=complex),
        label=f"scalar(lambda={lam:g})",
    )
