"""Jacobi-preconditioned conjugate gradients for the assembled SPD systems."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, SolverInternalError

DEFAULT_TOL = 1e-10


PRECONDITIONERS = ("jacobi", "amg")

# true-residual restarts before giving up
MAX_RESTARTS = 5

# accepted multiple of the round-off floor of b - a x (see ``residual_floor``)
FLOOR_FACTOR = 4.0

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """``maxiter=None`` means ``50 * n ** (1 / dim)`` for ``n`` unknowns.

    ``preconditioner`` is ``"jacobi"`` (diagonal scaling) or ``"amg"``
    (one smoothed-aggregation V-cycle from the optional ``pyamg``
    package); both give the same
    solution up to ``tol``.
    """

    tol: float = DEFAULT_TOL
    maxiter: int | None = None
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def iterations_for(self, n, dim):
        if self.maxiter is not None:
            return self.maxiter
        return max(50, int(50 * n ** (1.0 / dim)))


def amg_preconditioner(a):
    try:
        import pyamg
    except ImportError:
        raise ImportError("the 'amg' preconditioner needs pyamg "
                          "(pip install 'artifact[amg]')") from None

    return pyamg.smoothed_aggregation_solver(a.tocsr()).aspreconditioner(cycle="V")


def residual_floor(a, x, b):
    """Relative residual that rounding alone produces when evaluating
    ``b - a x`` in double precision: ``eps * || |a||x| + |b| || / ||b||``."""
    eps = np.finfo(float).eps
    return eps * np.linalg.norm(abs(a) @ np.abs(x) + np.abs(b)) / np.linalg.norm(b)


def pcg(a, b, x0=None, tol=DEFAULT_TOL, maxiter=1000, project_mean=False, precond=None):
    """Solve ``a x = b`` for symmetric positive (semi-)definite ``a``.

    Stops when the recursively updated residual satisfies
    ``||r|| <= tol * ||b||`` and the true residual ``b - a x`` confirms it,
    restarting from the true residual otherwise.  If ``tol`` lies below the
    rounding floor of the system (:func:`residual_floor`), a true residual
    within ``FLOOR_FACTOR`` times that floor is accepted instead.  With ``project_mean`` the
    iteration is restricted to zero-sum vectors, which makes singular
    periodic systems (kernel = constants) solvable; ``b`` must then have zero
    sum up to round-off.  ``precond`` maps a residual to a preconditioned
    residual (any object with ``@`` works); the default is Jacobi.

    Returns ``(x, iterations, relative_residual)``.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise SolverInternalError("matrix has non-positive diagonal entries")
    if precond is None:
        inv_diag = 1.0 / diag

        def apply(r):
            return inv_diag * r
    else:
        def apply(r):
            return precond @ r

    def proj(v):
        return v - v.mean() if project_mean else v

    b = proj(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    x = np.zeros(n) if x0 is None else proj(np.array(x0, dtype=float))
    k = 0
    floor = None
    # the recursively updated residual drifts from b - a x on ill-conditioned
    # systems; convergence is only accepted once the true residual agrees
    for _ in range(MAX_RESTARTS + 1):
        r = proj(b - a @ x)
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, k, res
        if k > 0:
            floor = FLOOR_FACTOR * residual_floor(a, x, b)
            if res <= floor:
                log.debug("pcg: residual %.2e limited by rounding (tol %.1e)", res, tol)
                return x, k, res
        z = proj(apply(r))
        p = z.copy()
        rz = r @ z
        while res > tol:
            if k >= maxiter:
                raise ConvergenceError(res, k)
            ap = a @ p
            pap = p @ ap
            if pap <= 0:
                raise SolverInternalError("matrix is not positive definite on the search space")
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            if project_mean:
                r = proj(r)
            z = proj(apply(r))
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
            res = np.linalg.norm(r) / bnorm
            k += 1
    res = np.linalg.norm(proj(b - a @ x)) / bnorm
    if res > max(tol, floor or 0.0, FLOOR_FACTOR * residual_floor(a, x, b)):
        raise ConvergenceError(res, k)
    return x, k, res
