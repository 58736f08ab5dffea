"""Stationary, periodic and transient diffusion solvers on structured grids.

The estimation set-up is the slab ``(0, L) x omega`` with ``x`` along axis 0:
Dirichlet data ``c0`` on the inlet face ``x = 0``, a Robin outflow
``-n.(d grad u) = M (u - c1)`` on ``x = L`` and insulated remaining faces.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, DegenerateGradientError, SolverInternalError
from .grid import (ScalarField, StructuredGrid, TensorField, face_mass_matrix,
                   face_weights, mass_matrix, reference_gradient_load,
                   element_nodes, stiffness_matrix, volume_weights)
from .linalg import SolverOptions, amg_preconditioner, pcg

log = logging.getLogger(__name__)

INLET = (0, 0)
OUTLET = (0, 1)


@dataclass(frozen=True)
class EstimationBC:
    """Boundary data of the estimation problem.

    ``c0=None`` makes the inlet face insulated as well (used for transients).
    """

    c0: float | None = 1.0
    c1: float = 0.0
    mass_transfer: float = 1.0

    def __post_init__(self):
        if not self.mass_transfer > 0:
            raise ValueError("mass transfer coefficient M must be positive")


@dataclass
class FluxHistory:
    times: np.ndarray
    flux: np.ndarray
    final: ScalarField | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.flux = np.asarray(self.flux, dtype=float)
        if self.times.shape != self.flux.shape:
            raise ValueError("times and flux differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass
class Estimate:
    d_eff: float
    u_out: float
    n_average: float
    solution: ScalarField


@dataclass
class CellSolution:
    correctors: list
    effective: np.ndarray
    iterations: list = field(default_factory=list)


def _operator(fld: TensorField, bc: EstimationBC | None):
    """Global matrix and load vector before Dirichlet elimination."""
    g = fld.grid
    a = stiffness_matrix(fld)
    if fld.reaction is not None:
        a = a + mass_matrix(g, fld.reaction)
    rhs = np.zeros(g.n_nodes)
    if bc is not None:
        robin = face_mass_matrix(g, *OUTLET)
        a = a + bc.mass_transfer * robin
        rhs += bc.mass_transfer * bc.c1 * face_weights(g, *OUTLET)
    return a.tocsr(), rhs


def _dirichlet(grid, bc):
    if bc is None or bc.c0 is None:
        return np.zeros(grid.n_nodes, dtype=bool)
    return grid.face_nodes(*INLET)


def _solve_reduced(a, rhs, fixed, fixed_values, opts, dim, x0=None):
    """Eliminate strongly imposed nodes and solve the remaining SPD system."""
    free = ~fixed
    u = np.zeros(a.shape[0])
    u[fixed] = fixed_values
    a_ff = a[free][:, free]
    b = rhs[free] - a[free][:, fixed] @ u[fixed]
    guess = None if x0 is None else x0[free]
    precond = amg_preconditioner(a_ff) if opts.preconditioner == "amg" else None
    x, its, res = pcg(a_ff, b, guess, opts.tol, opts.iterations_for(a_ff.shape[0], dim),
                      precond=precond)
    u[free] = x
    return u, its, res


def solve_stationary_bvp(fld: TensorField, bc: EstimationBC, options=SolverOptions()) -> ScalarField:
    """Multilinear finite-element solution of ``-div(d grad u) (+ r u) = 0``
    with the estimation boundary conditions."""
    g = fld.grid
    a, rhs = _operator(fld, bc)
    fixed = _dirichlet(g, bc)
    u, its, res = _solve_reduced(a, rhs, fixed, bc.c0 if bc.c0 is not None else 0.0,
                                 options, g.dim)
    log.debug("stationary solve: %d iterations, residual %.2e", its, res)
    return ScalarField(g, u.reshape(g.node_shape), {"iterations": its, "residual": res})


def boundary_average(u: ScalarField, face) -> float:
    """Mean of the multilinear trace of ``u`` over ``face = (axis, side)``."""
    axis, side = face
    w = face_weights(u.grid, axis, side)
    return float(w @ u.values.ravel() / u.grid.face_measure(axis))


def inflow_flux(fld: TensorField, bc: EstimationBC, u: ScalarField) -> float:
    """Total flux entering through the Dirichlet face, recovered from the
    residual of the assembled system at the constrained nodes."""
    a, rhs = _operator(fld, bc)
    fixed = _dirichlet(fld.grid, bc)
    residual = a @ u.values.ravel() - rhs
    return float(residual[fixed].sum())


def outflow_flux(bc: EstimationBC, u: ScalarField) -> float:
    """Total Robin outflow ``integral of M (u - c1)`` over the outlet face."""
    g = u.grid
    return bc.mass_transfer * (boundary_average(u, OUTLET) - bc.c1) * g.face_measure(0)


def estimate(fld: TensorField, bc: EstimationBC, options=SolverOptions()) -> Estimate:
    if bc.c0 is None:
        raise ValueError("estimation requires Dirichlet inlet data c0")
    u = solve_stationary_bvp(fld, bc, options)
    u_out = boundary_average(u, OUTLET)
    n_avg = bc.mass_transfer * (u_out - bc.c1)
    drop = bc.c0 - u_out
    if abs(drop) < 1e-14 * abs(bc.c0) or drop == 0.0:
        raise DegenerateGradientError(f"c0 - u_out = {drop:.3e} is degenerate")
    d_eff = n_avg * fld.grid.extent[0] / drop
    return Estimate(d_eff, u_out, n_avg, u)


def estimate_effective_diffusivity(fld: TensorField, bc: EstimationBC,
                                   options=SolverOptions()) -> float:
    """Apparent diffusivity along x: ``N_average * L / (c0 - u_out)``."""
    return estimate(fld, bc, options).d_eff


def solve_cell_problem(fld: TensorField, options=SolverOptions()) -> CellSolution:
    """Periodic correctors and the homogenized tensor of a period cell.

    For each direction ``j`` solves ``div(d grad phi_j) = div(d e_j)`` with
    ``phi_j`` periodic and of zero mean, then averages
    ``d_ij - d_ik d_k phi_j``.
    """
    g = fld.grid
    dim = g.dim
    a = stiffness_matrix(fld, periodic=True)
    conn = element_nodes(g, periodic=True)
    d = fld.tensors.reshape(-1, dim, dim)
    grad_load = reference_gradient_load(g.spacing)
    volume = float(np.prod(g.extent))
    mean_d = d.mean(axis=0)
    loads = []
    for j in range(dim):
        local = np.einsum("ei,ia->ea", d[:, :, j], grad_load)
        loads.append(np.bincount(conn.ravel(), local.ravel(), minlength=g.n_cells))
    correctors, its = [], []
    for j in range(dim):
        phi, k, _ = pcg(a, loads[j], tol=options.tol,
                        maxiter=options.iterations_for(g.n_cells, dim), project_mean=True)
        scale = max(np.abs(phi).max(), 1e-300)
        if abs(phi.mean()) > max(options.tol, 1e-12) * scale:
            raise SolverInternalError(f"corrector {j} drifted off the zero-mean space")
        correctors.append(ScalarField(g, phi.reshape(g.cells), {"periodic": True}))
        its.append(k)
    eff = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            eff[i, j] = mean_d[i, j] - loads[i] @ correctors[j].values.ravel() / volume
    eff = 0.5 * (eff + eff.T)
    return CellSolution(correctors, eff, its)


def capacity_mass(fld: TensorField, u: ScalarField) -> float:
    """Integral of ``sigma u`` over the domain."""
    return float(volume_weights(fld.grid, fld.capacity()) @ u.values.ravel())


def solve_transient(fld: TensorField, initial: ScalarField, bc: EstimationBC | None,
                    t_end: float, dt: float, options=SolverOptions()) -> FluxHistory:
    """Backward-Euler integration of ``sigma u_t - div(d grad u) + r u = 0``.

    ``bc=None`` insulates every face.  Records the mean outflow flux
    ``M (u_out - c1)`` after every step (zero when insulated).

    With every face insulated and no reaction the exact discrete solution
    keeps ``integral of sigma u`` fixed.  Rounding in the solve (``dt K``
    can exceed the capacity term by many orders) breaks this slightly, so
    each step is shifted by the constant that restores the balance.
    Constants lie in the kernel of ``K``; the shift is the energy-optimal
    correction along that direction and leaves fluxes unchanged.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < dt:
        raise ValueError("t_end must be at least dt")
    g = fld.grid
    steps = int(np.ceil(t_end / dt - 1e-9))
    k, rhs_bc = _operator(fld, bc)
    cap = mass_matrix(g, fld.capacity())
    a = (cap / dt + k).tocsr()
    fixed = _dirichlet(g, bc)
    c0 = bc.c0 if bc is not None and bc.c0 is not None else 0.0
    u = np.asarray(initial.values, dtype=float).ravel().copy()
    if u.shape[0] != g.n_nodes:
        raise ValueError("initial field does not match the grid")
    outlet_w = face_weights(g, *OUTLET) / g.face_measure(0)
    conservative = bc is None and fld.reaction is None
    cap_w = np.asarray(cap.sum(axis=0)).ravel()
    times, flux = [], []
    correction = 0.0
    for n in range(1, steps + 1):
        u_old = u
        rhs = cap @ u / dt + rhs_bc
        try:
            u, _, _ = _solve_reduced(a, rhs, fixed, c0, options, g.dim, x0=u)
        except ConvergenceError as exc:
            raise ConvergenceError(exc.residual, exc.iterations, step=n) from exc
        if conservative:
            lost = cap_w @ u_old - cap_w @ u
            u += lost / cap_w.sum()
            scale = abs(cap_w @ u_old)
            if scale > 0:
                correction = max(correction, abs(lost) / scale)
        times.append(n * dt)
        flux.append(0.0 if bc is None else bc.mass_transfer * (outlet_w @ u - bc.c1))
    final = ScalarField(g, u.reshape(g.node_shape), {"mass_correction": correction})
    return FluxHistory(np.array(times), np.array(flux), final)


def initial_field(grid: StructuredGrid, func) -> ScalarField:
    """Nodal interpolant of ``func(*coordinates)``."""
    return ScalarField(grid, func(*grid.node_coordinates()))
