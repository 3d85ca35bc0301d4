"""Structured quadrilateral meshes with bilinear (Q1) elements."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonPositiveParameter, PointOutsideDomain

# 2-point Gauss rule on [0, 1]
_G = 0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)
# local node order: (0,0), (1,0), (1,1), (0,1), counter-clockwise
_LOCAL = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])


def _q1_basis(xi, eta):
    """Values and reference gradients of the four bilinear basis functions."""
    sx = np.where(_LOCAL[:, 0] == 1, xi, 1.0 - xi)
    sy = np.where(_LOCAL[:, 1] == 1, eta, 1.0 - eta)
    dsx = np.where(_LOCAL[:, 0] == 1, 1.0, -1.0)
    dsy = np.where(_LOCAL[:, 1] == 1, 1.0, -1.0)
    return sx * sy, np.stack([dsx * sy, sx * dsy], axis=-1)


@dataclass(frozen=True)
class Mesh2D:
    """``nx`` by ``ny`` rectangular cells on ``[0, Lx] x [0, Ly]``.

    Node ``(i, j)`` has index ``i + j * (nx + 1)``.
    """

    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise NonPositiveParameter(f"need nx, ny >= 1, got {self.nx}, {self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise NonPositiveParameter(f"need Lx, Ly > 0, got {self.Lx}, {self.Ly}")

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def hx(self):
        return self.Lx / self.nx

    @property
    def hy(self):
        return self.Ly / self.ny

    @cached_property
    def coords(self):
        x = np.linspace(0.0, self.Lx, self.nx + 1)
        y = np.linspace(0.0, self.Ly, self.ny + 1)
        X, Y = np.meshgrid(x, y)  # row j, column i
        return np.column_stack([X.ravel(), Y.ravel()])

    def node(self, i, j):
        return i + j * (self.nx + 1)

    @cached_property
    def cells(self):
        """``(n_cells, 4)`` global node indices in local order."""
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        i, j = i.ravel(), j.ravel()
        return np.stack([self.node(i + a, j + b) for a, b in _LOCAL], axis=1)

    @cached_property
    def quadrature(self):
        """Basis values ``phi[q, a]``, physical gradients ``dphi[q, a, :]``, weights ``w[q]``.

        Identical on every cell of a uniform mesh.
        """
        pts = [(xi, eta) for eta in _G for xi in _G]
        phi, dphi = zip(*(_q1_basis(xi, eta) for xi, eta in pts))
        phi = np.array(phi)
        dphi = np.array(dphi) / np.array([self.hx, self.hy])
        w = np.full(len(pts), 0.25 * self.hx * self.hy)
        return phi, dphi, w

    @cached_property
    def boundary(self):
        """Node index arrays for the four edges."""
        ix = np.arange(self.nx + 1)
        iy = np.arange(self.ny + 1)
        return {
            "bottom": self.node(ix, 0),
            "top": self.node(ix, self.ny),
            "left": self.node(0, iy),
            "right": self.node(self.nx, iy),
        }

    def assemble(self, elem):
        """Scatter per-cell ``(n_cells, 4, 4)`` element matrices into a dense global matrix."""
        n = self.n_nodes
        A = np.zeros(n * n)
        c = self.cells
        idx = (c[:, :, None] * n + c[:, None, :]).ravel()
        np.add.at(A, idx, np.broadcast_to(elem, (self.n_cells, 4, 4)).ravel())
        return A.reshape(n, n)

    def scatter(self, elem_vec):
        """Scatter per-cell ``(n_cells, 4)`` element vectors into a global vector."""
        out = np.zeros(self.n_nodes)
        np.add.at(out, self.cells.ravel(), np.asarray(elem_vec).ravel())
        return out

    def cell_values(self, u):
        """Nodal field (..., n_nodes) -> values at quadrature points (..., n_cells, 4)."""
        phi, _, _ = self.quadrature
        return np.asarray(u)[..., self.cells] @ phi.T

    def cell_gradients(self, u):
        """Nodal field (..., n_nodes) -> gradients at quadrature points (..., n_cells, 4, 2)."""
        _, dphi, _ = self.quadrature
        return np.einsum("...ca,qad->...cqd", np.asarray(u)[..., self.cells], dphi)

    def interpolation_matrix(self, points):
        """Rows of bilinear interpolation weights for each point (dense, ``(m, n_nodes)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tol = 1e-12 * max(self.Lx, self.Ly)
        W = np.zeros((len(pts), self.n_nodes))
        for k, (x, y) in enumerate(pts):
            if not (-tol <= x <= self.Lx + tol and -tol <= y <= self.Ly + tol):
                raise PointOutsideDomain(k)
            i = min(int(np.floor(x / self.hx)), self.nx - 1)
            j = min(int(np.floor(y / self.hy)), self.ny - 1)
            i, j = max(i, 0), max(j, 0)
            xi = np.clip(x / self.hx - i, 0.0, 1.0)
            eta = np.clip(y / self.hy - j, 0.0, 1.0)
            vals, _ = _q1_basis(xi, eta)
            for (a, b), v in zip(_LOCAL, vals):
                W[k, self.node(i + a, j + b)] += v
        return W

    def nodes_on_vertical_line(self, x):
        """Nodes of the grid column closest to abscissa ``x``, bottom to top."""
        i = int(round(np.clip(x, 0.0, self.Lx) / self.hx))
        return self.node(i, np.arange(self.ny + 1))

    def nearest_node(self, point):
        d = np.sum((self.coords - np.asarray(point, dtype=float)) ** 2, axis=1)
        return int(np.argmin(d))
