"""Uniform tensor-product grids and multilinear finite-element assembly.

Nodes are numbered in C order over the node array, i.e. the last axis runs
fastest.  Element matrices are built from 1D stiffness, mass and
derivative-mass blocks via Kronecker products, so the same code serves
bilinear (2D) and trilinear (3D) elements.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class StructuredGrid:
    extent: tuple
    cells: tuple

    def __post_init__(self):
        extent = tuple(float(e) for e in self.extent)
        cells = tuple(int(c) for c in self.cells)
        if len(extent) != len(cells) or len(cells) not in (2, 3):
            raise ValueError("grid must be 2D or 3D with one extent per axis")
        if min(extent) <= 0:
            raise ValueError("extents must be positive")
        if min(cells) < 1:
            raise ValueError("need at least one cell per axis")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def unit(cls, dim, cells_per_axis):
        return cls((1.0,) * dim, (cells_per_axis,) * dim)

    @property
    def dim(self):
        return len(self.cells)

    @property
    def spacing(self):
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def node_shape(self):
        return tuple(c + 1 for c in self.cells)

    @property
    def n_nodes(self):
        return int(np.prod(self.node_shape))

    @property
    def n_cells(self):
        return int(np.prod(self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def coordinates(self, axis):
        return np.linspace(0.0, self.extent[axis], self.cells[axis] + 1)

    def node_coordinates(self):
        """Arrays of nodal coordinates, one per axis, each of node_shape."""
        return np.meshgrid(*(self.coordinates(a) for a in range(self.dim)), indexing="ij")

    def face_nodes(self, axis, side):
        """Boolean node mask of the boundary face ``axis = 0`` (side 0) or
        ``axis = extent`` (side 1)."""
        mask = np.zeros(self.node_shape, dtype=bool)
        idx = [slice(None)] * self.dim
        idx[axis] = 0 if side == 0 else -1
        mask[tuple(idx)] = True
        return mask.ravel()

    def face_measure(self, axis):
        return float(np.prod([e for a, e in enumerate(self.extent) if a != axis]))


@dataclass
class TensorField:
    """Element-wise constant diffusion tensors with optional capacity and
    reaction coefficients (``sigma``, ``reaction``: one value per cell)."""

    grid: StructuredGrid
    tensors: np.ndarray
    sigma: np.ndarray | None = None
    reaction: np.ndarray | None = None

    def __post_init__(self):
        g = self.grid
        t = np.asarray(self.tensors, dtype=float)
        if t.shape != g.cells + (g.dim, g.dim):
            raise ValueError(f"tensors shape {t.shape} does not match grid {g.cells}")
        if np.any(t != np.swapaxes(t, -1, -2)):
            raise ValueError("cell tensors must be symmetric")
        if np.linalg.eigvalsh(t.reshape(-1, g.dim, g.dim))[:, 0].min() <= 0:
            raise ValueError("cell tensors must be positive definite")
        self.tensors = t
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), g.cells).copy()
            if self.sigma.min() <= 0:
                raise ValueError("sigma must be positive")
        if self.reaction is not None:
            self.reaction = np.broadcast_to(np.asarray(self.reaction, dtype=float), g.cells).copy()
            if self.reaction.min() < 0:
                raise ValueError("reaction rate must be non-negative")

    @classmethod
    def constant(cls, grid, tensor, sigma=None, reaction=None):
        tensor = np.asarray(tensor, dtype=float)
        if tensor.ndim == 0:
            tensor = tensor * np.eye(grid.dim)
        elif tensor.ndim == 1:
            tensor = np.diag(tensor)
        tensors = np.broadcast_to(tensor, grid.cells + tensor.shape).copy()
        return cls(grid, tensors, sigma, reaction)

    def capacity(self):
        return np.ones(self.grid.cells) if self.sigma is None else self.sigma


@dataclass
class ScalarField:
    """Nodal values on a grid; ``values`` has the grid's node shape (or its
    cell shape for periodic grids)."""

    grid: StructuredGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains non-finite values")


def _ref_1d(h):
    stiff = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    mass = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0
    # deriv[a, b] = integral of phi_a' * phi_b
    deriv = np.array([[-0.5, -0.5], [0.5, 0.5]])
    return stiff, mass, deriv


def _kron(blocks):
    return reduce(np.kron, blocks)


def reference_stiffness(spacing):
    """Array ``K[i, j, a, b]`` = integral over one element of
    ``d_i phi_a * d_j phi_b``."""
    dim = len(spacing)
    ref = [_ref_1d(h) for h in spacing]
    out = np.empty((dim, dim, 2**dim, 2**dim))
    for i in range(dim):
        for j in range(dim):
            blocks = []
            for k, (stiff, mass, deriv) in enumerate(ref):
                if k == i == j:
                    blocks.append(stiff)
                elif k == i:
                    blocks.append(deriv)
                elif k == j:
                    blocks.append(deriv.T)
                else:
                    blocks.append(mass)
            out[i, j] = _kron(blocks)
    return out


def reference_mass(spacing):
    return _kron([_ref_1d(h)[1] for h in spacing])


def reference_gradient_load(spacing):
    """Array ``g[i, a]`` = integral over one element of ``d_i phi_a``."""
    dim = len(spacing)
    out = np.empty((dim, 2**dim))
    for i in range(dim):
        vecs = [np.array([-1.0, 1.0]) if k == i else np.array([h / 2, h / 2])
                for k, h in enumerate(spacing)]
        out[i] = _kron(vecs)
    return out


def element_nodes(grid, periodic=False):
    """Global node indices of each element's corners, shape
    ``(n_cells, 2**dim)``; cells in C order, corners in Kronecker order."""
    cells = np.array(grid.cells)
    shape = grid.cells if periodic else grid.node_shape
    origin = np.stack(np.meshgrid(*(np.arange(c) for c in grid.cells), indexing="ij"), -1)
    origin = origin.reshape(-1, grid.dim)
    corners = np.array(list(itertools.product((0, 1), repeat=grid.dim)))
    idx = origin[:, None, :] + corners[None, :, :]
    if periodic:
        idx = idx % cells
    return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), shape)


def _scatter(conn, local, n):
    rows = np.repeat(conn, conn.shape[1], axis=1).ravel()
    cols = np.tile(conn, (1, conn.shape[1])).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness_matrix(field: TensorField, periodic=False):
    g = field.grid
    d = field.tensors.reshape(-1, g.dim, g.dim)
    local = np.einsum("eij,ijab->eab", d, reference_stiffness(g.spacing))
    local = 0.5 * (local + np.swapaxes(local, 1, 2))
    n = g.n_cells if periodic else g.n_nodes
    return _scatter(element_nodes(g, periodic), local, n)


def mass_matrix(grid: StructuredGrid, weights=None, periodic=False):
    """Consistent mass matrix with an optional per-cell weight."""
    w = np.ones(grid.n_cells) if weights is None else np.asarray(weights, dtype=float).ravel()
    local = w[:, None, None] * reference_mass(grid.spacing)[None]
    n = grid.n_cells if periodic else grid.n_nodes
    return _scatter(element_nodes(grid, periodic), local, n)


def face_mass_matrix(grid: StructuredGrid, axis, side):
    """Boundary mass matrix of one face, embedded in the full node space."""
    nodes = np.flatnonzero(grid.face_nodes(axis, side))
    if grid.dim == 2:
        h = grid.spacing[1 - axis]
        n = grid.cells[1 - axis]
        diag = np.r_[h / 3, np.full(n - 1, 2 * h / 3), h / 3]
        local = sp.diags([np.full(n, h / 6), diag, np.full(n, h / 6)], [-1, 0, 1]).tocoo()
    else:
        face = StructuredGrid([e for a, e in enumerate(grid.extent) if a != axis],
                              [c for a, c in enumerate(grid.cells) if a != axis])
        local = mass_matrix(face).tocoo()
    return sp.coo_matrix((local.data, (nodes[local.row], nodes[local.col])),
                         shape=(grid.n_nodes, grid.n_nodes)).tocsr()


def face_weights(grid: StructuredGrid, axis, side):
    """Quadrature weights ``w`` with ``w @ u`` = face integral of the
    multilinear trace of ``u``."""
    return np.asarray(face_mass_matrix(grid, axis, side).sum(axis=0)).ravel()


def volume_weights(grid: StructuredGrid, weights=None):
    return np.asarray(mass_matrix(grid, weights).sum(axis=0)).ravel()
