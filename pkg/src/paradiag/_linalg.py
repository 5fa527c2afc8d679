"""Dense LU factorization with an explicit singularity check."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import SingularSystemError

PIVOT_RTOL = 1e-14


def checked_lu(matrix, what: str = "matrix", error=SingularSystemError):
    """``scipy.linalg.lu_factor`` that raises ``error`` on a negligible pivot.

    A pivot counts as negligible when it is below ``PIVOT_RTOL`` times
    ``max(1, max|matrix|)``.  scipy's own warning is suppressed because the
    condition is reported through the exception instead.
    """
    matrix = np.asarray(matrix)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            lu = scipy.linalg.lu_factor(matrix, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise error(f"cannot factor {what}") from exc
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    if np.min(np.abs(np.diag(lu[0]))) <= PIVOT_RTOL * scale:
        raise error(f"singular {what}")
    return lu
