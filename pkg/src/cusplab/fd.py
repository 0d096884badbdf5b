"""Five-point Laplacian on rectilinear (possibly graded) grids with cut-cell Dirichlet rows.

Irregular boundaries are handled by linear ghost extrapolation along each grid
line: a link from an interior node to an exterior neighbour is replaced by a
link to the boundary crossing at fraction ``theta`` of the spacing.  This only
changes the diagonal and the right-hand side, so the assembled matrix stays
symmetric positive definite (rows are scaled by the dual cell size) and
conjugate gradients apply.  Graded grids make the matrix far too anisotropic
for multigrid, so CG is preconditioned with a sparse LU factorization and in
practice stops after one or two iterations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu

__all__ = ["RectGrid", "graded_axis", "insert_nodes", "solve_dirichlet", "DirichletSolution",
           "boundary_crossings"]


def graded_axis(lo: float, hi: float, spacing: Callable[[np.ndarray], np.ndarray],
                required=()) -> np.ndarray:
    """Nodes from ``lo`` to ``hi`` whose local gap follows ``spacing(u)``."""
    if not hi > lo:
        raise ValueError("empty axis")
    nodes = [lo]
    u = lo
    while True:
        h = float(spacing(np.asarray(u)))
        h = float(spacing(np.asarray(u + 0.5 * h)))
        if not h > 0:
            raise ValueError("spacing must be positive")
        if u + 1.5 * h >= hi:
            break
        u += h
        nodes.append(u)
    nodes.append(hi)
    return insert_nodes(np.asarray(nodes), required)


def insert_nodes(nodes: np.ndarray, required=()) -> np.ndarray:
    """Add the ``required`` coordinates, snapping a nearby node onto each of them."""
    nodes = np.array(nodes, dtype=float)
    for r in np.atleast_1d(np.asarray(required, dtype=float)):
        if r <= nodes[0] or r >= nodes[-1]:
            continue
        i = np.searchsorted(nodes, r)
        left, right = nodes[i - 1], nodes[i]
        gap = right - left
        if r - left < 0.3 * gap and i - 1 > 0:
            nodes[i - 1] = r
        elif right - r < 0.3 * gap and i < nodes.size - 1:
            nodes[i] = r
        elif r != left and r != right:
            nodes = np.insert(nodes, i, r)
    nodes = np.unique(nodes)
    return nodes


@dataclass(frozen=True)
class RectGrid:
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def uniform(cls, bbox, h: float, pad: int = 2, required_x=(), required_y=()) -> "RectGrid":
        x0, x1, y0, y1 = bbox
        nx = int(np.ceil((x1 - x0) / h)) + 2 * pad
        ny = int(np.ceil((y1 - y0) / h)) + 2 * pad
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        x = cx + h * (np.arange(nx + 1) - nx / 2)
        y = cy + h * (np.arange(ny + 1) - ny / 2)
        return cls(insert_nodes(x, required_x), insert_nodes(y, required_y))

    def refined(self) -> "RectGrid":
        """Halve every interval; the old nodes are the even-indexed new ones."""

        def half(a):
            out = np.empty(2 * a.size - 1)
            out[0::2] = a
            out[1::2] = 0.5 * (a[:-1] + a[1:])
            return out

        return RectGrid(half(self.x), half(self.y))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.y.size, self.x.size)

    @property
    def points(self) -> np.ndarray:
        return self.x[None, :] + 1j * self.y[:, None]

    @property
    def h_max(self) -> float:
        return float(max(np.diff(self.x).max(), np.diff(self.y).max()))

    def locate(self, z) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Cell indices (i, j) and local coordinates (s, t) for bilinear interpolation."""
        z = np.asarray(z, dtype=complex)
        i = np.clip(np.searchsorted(self.x, z.real) - 1, 0, self.x.size - 2)
        j = np.clip(np.searchsorted(self.y, z.imag) - 1, 0, self.y.size - 2)
        s = (z.real - self.x[i]) / (self.x[i + 1] - self.x[i])
        t = (z.imag - self.y[j]) / (self.y[j + 1] - self.y[j])
        return i, j, s, t


def boundary_crossings(contains, p: np.ndarray, q: np.ndarray, iters: int = 52) -> np.ndarray:
    """Fraction theta in (0, 1] along p -> q where membership switches off.

    ``p`` is inside and ``q`` outside; bisection keeps that invariant.
    """
    lo = np.zeros(p.shape)
    hi = np.ones(p.shape)
    d = q - p
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ins = contains(p + mid * d)
        lo = np.where(ins, mid, lo)
        hi = np.where(ins, hi, mid)
    return hi


@dataclass
class DirichletSolution:
    grid: RectGrid
    values: np.ndarray  # nan outside the domain
    inside: np.ndarray  # nodes carrying a value (unknowns and snapped nodes)
    iterations: int
    unknowns: int


def solve_dirichlet(grid: RectGrid, contains, boundary_value, rhs_density=None,
                    theta_min: float = 1e-3, rtol: float = 1e-10, maxiter: int = 2000) -> DirichletSolution:
    """Solve Laplace(u) = rhs_density in the domain with u = boundary_value on its boundary.

    Nodes within ``theta_min`` of a spacing from the boundary are snapped to the
    boundary value.
    """
    Z = grid.points
    ny, nx = grid.shape
    inside = np.asarray(contains(Z), dtype=bool)
    if inside[0, :].any() or inside[-1, :].any() or inside[:, 0].any() or inside[:, -1].any():
        raise ValueError("domain touches the grid edge; enlarge the bounding box")
    hx = np.diff(grid.x)
    hy = np.diff(grid.y)
    dual_x = np.zeros(nx)
    dual_x[1:-1] = 0.5 * (hx[:-1] + hx[1:])
    dual_y = np.zeros(ny)
    dual_y[1:-1] = 0.5 * (hy[:-1] + hy[1:])

    # (dj, di, spacing array accessor, face weight)
    directions = [
        (0, 1, lambda j, i: hx[i], lambda j, i: dual_y[j]),
        (0, -1, lambda j, i: hx[i - 1], lambda j, i: dual_y[j]),
        (1, 0, lambda j, i: hy[j], lambda j, i: dual_x[i]),
        (-1, 0, lambda j, i: hy[j - 1], lambda j, i: dual_x[i]),
    ]
    J, I = np.nonzero(inside)
    cut = []
    for dj, di, spacing, face in directions:
        nb_in = inside[J + dj, I + di]
        jj, ii = J[~nb_in], I[~nb_in]
        if jj.size:
            p = Z[jj, ii]
            q = Z[jj + dj, ii + di]
            th = boundary_crossings(contains, p, q)
            cut.append((dj, di, jj, ii, th, p + th * (q - p)))

    # snap nodes that sit essentially on the boundary
    fixed = np.zeros(grid.shape, dtype=bool)
    fixed_val = np.zeros(grid.shape)
    fixed_th = np.full(grid.shape, np.inf)
    for dj, di, jj, ii, th, zb in cut:
        small = th < theta_min
        if small.any():
            bv = np.asarray(boundary_value(zb[small]), dtype=float)
            better = th[small] < fixed_th[jj[small], ii[small]]
            js, is_ = jj[small][better], ii[small][better]
            fixed[js, is_] = True
            fixed_val[js, is_] = bv[better]
            fixed_th[js, is_] = th[small][better]

    unknown = inside & ~fixed
    index = -np.ones(grid.shape, dtype=np.int64)
    n = int(unknown.sum())
    index[unknown] = np.arange(n)
    J, I = np.nonzero(unknown)
    row = index[J, I]
    diag = np.zeros(n)
    b = np.zeros(n)
    if rhs_density is not None:
        b -= np.asarray(rhs_density(Z[J, I]), dtype=float) * dual_x[I] * dual_y[J]
    rows, cols, vals = [], [], []
    cut_lookup = {}
    for dj, di, jj, ii, th, zb in cut:
        cut_lookup[(dj, di)] = (jj, ii, th, zb)
    for dj, di, spacing, face in directions:
        jn, in_ = J + dj, I + di
        w = face(J, I) / spacing(J, I)
        nb_unknown = unknown[jn, in_]
        nb_fixed = fixed[jn, in_]
        diag[nb_unknown | nb_fixed] += w[nb_unknown | nb_fixed]
        rows.append(row[nb_unknown])
        cols.append(index[jn[nb_unknown], in_[nb_unknown]])
        vals.append(-w[nb_unknown])
        b[nb_fixed] += w[nb_fixed] * fixed_val[jn[nb_fixed], in_[nb_fixed]]
    for dj, di, spacing, face in directions:
        if (dj, di) not in cut_lookup:
            continue
        jj, ii, th, zb = cut_lookup[(dj, di)]
        keep = unknown[jj, ii]
        jj, ii, th, zb = jj[keep], ii[keep], th[keep], zb[keep]
        if not jj.size:
            continue
        w = face(jj, ii) / (th * spacing(jj, ii))
        r = index[jj, ii]
        np.add.at(diag, r, w)
        np.add.at(b, r, w * np.asarray(boundary_value(zb), dtype=float))
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))

    iters = 0
    if n:
        lu = splu(K.tocsc(), permc_spec="COLAMD")
        M = LinearOperator((n, n), matvec=lu.solve, dtype=float)

        def count(_):
            nonlocal iters
            iters += 1

        u, info = cg(K, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=count)
        if info != 0:
            raise RuntimeError(f"conjugate gradients did not converge (info={info}, n={n})")
    else:
        u = np.zeros(0)
    values = np.full(grid.shape, np.nan)
    values[unknown] = u
    values[fixed] = fixed_val[fixed]
    return DirichletSolution(grid, values, inside, iters, n)
