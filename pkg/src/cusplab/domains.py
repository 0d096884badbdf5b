"""Planar domain oracles: membership, boundary distance, bounding box.

Every solver in the package talks to domains through ``DomainOracle``.  The
cusp, its conformal image and the barrier region carry a dense polyline copy of
their boundary, so distances come from a k-d tree instead of a minimization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .conformal import f_inverse, f_map, hopf_constant
from .geometry import CuspParams, planar_cusp_contains, wall_arc_meeting_height

__all__ = [
    "DomainOracle",
    "Disk",
    "Annulus",
    "Polyline",
    "TruncatedCusp",
    "ImageDomain",
    "BarrierRegion",
]


class DomainOracle:
    """Interface: ``contains``, ``boundary_distance``, ``nearest_boundary`` and ``bbox``."""

    bbox: tuple[float, float, float, float]

    def contains(self, z) -> np.ndarray:
        raise NotImplementedError

    def nearest_boundary(self, z) -> tuple[np.ndarray, np.ndarray]:
        """(distance, nearest boundary point) for an array of points."""
        raise NotImplementedError

    def boundary_distance(self, z) -> np.ndarray:
        return self.nearest_boundary(z)[0]

    @property
    def diameter(self) -> float:
        x0, x1, y0, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)


@dataclass(frozen=True)
class Disk(DomainOracle):
    R: float
    center: complex = 0j

    @property
    def bbox(self):
        c = self.center
        return (c.real - self.R, c.real + self.R, c.imag - self.R, c.imag + self.R)

    def contains(self, z):
        return np.abs(np.asarray(z, dtype=complex) - self.center) < self.R

    def nearest_boundary(self, z):
        w = np.asarray(z, dtype=complex) - self.center
        r = np.abs(w)
        unit = np.where(r > 0, w / np.where(r > 0, r, 1.0), 1.0)
        return np.abs(self.R - r), self.center + self.R * unit


@dataclass(frozen=True)
class Annulus(DomainOracle):
    r_in: float
    r_out: float

    @property
    def bbox(self):
        return (-self.r_out, self.r_out, -self.r_out, self.r_out)

    def contains(self, z):
        r = np.abs(np.asarray(z, dtype=complex))
        return (r > self.r_in) & (r < self.r_out)

    def nearest_boundary(self, z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        unit = np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0)
        d_in, d_out = np.abs(r - self.r_in), np.abs(self.r_out - r)
        inner = d_in < d_out
        return np.where(inner, d_in, d_out), np.where(inner, self.r_in, self.r_out) * unit


class Polyline:
    """Closed polyline with fast nearest-point queries.

    The nearest point is searched on the segments adjacent to the ``k`` nearest
    vertices; with dense, graded vertices this is exact up to chord effects.
    """

    def __init__(self, pts: np.ndarray, k: int = 6):
        pts = np.asarray(pts, dtype=complex)
        keep = np.concatenate([[True], np.abs(np.diff(pts)) > 0])
        self.pts = pts[keep]
        self.k = min(k, self.pts.size)
        self.tree = cKDTree(np.column_stack([self.pts.real, self.pts.imag]))

    def nearest(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = z.ravel()
        _, idx = self.tree.query(np.column_stack([z.real, z.imag]), k=self.k)
        idx = idx.reshape(z.size, -1)
        n = self.pts.size
        best_d = np.full(z.size, np.inf)
        best_p = np.zeros(z.size, dtype=complex)
        for shift in (-1, 0):
            a = self.pts[(idx + shift) % n]
            b = self.pts[(idx + shift + 1) % n]
            ab = b - a
            L2 = np.abs(ab) ** 2
            t = np.clip(((z[:, None] - a) * np.conj(ab)).real / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
            p = a + t * ab
            d = np.abs(z[:, None] - p)
            j = np.argmin(d, axis=1)
            dj = d[np.arange(z.size), j]
            better = dj < best_d
            best_d = np.where(better, dj, best_d)
            best_p = np.where(better, p[np.arange(z.size), j], best_p)
        return best_d.reshape(shape), best_p.reshape(shape)


def _wall_heights(ystar: float, n: int, floor: float) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(floor, ystar, n)])


class TruncatedCusp(DomainOracle):
    """The planar domain {x > C|y|^alpha, |z| < R}."""

    def __init__(self, params: CuspParams, R: float, n_wall: int = 6000, n_arc: int = 4000):
        self.params = params
        self.R = float(R)
        self.ystar = wall_arc_meeting_height(params, R)
        self.phi_star = math.atan2(self.ystar, params.C * self.ystar**params.alpha)
        y = _wall_heights(self.ystar, n_wall, self.ystar * 1e-16)
        upper = params.C * y**params.alpha + 1j * y
        ang = np.linspace(self.phi_star, -self.phi_star, n_arc)[1:-1]
        arc = self.R * np.exp(1j * ang)
        lower = np.conj(upper[::-1])
        self.boundary = Polyline(np.concatenate([upper, arc, lower]))
        self.bbox = (0.0, self.R, -self.ystar, self.ystar)

    def contains(self, z):
        return planar_cusp_contains(self.params, self.R, z)

    def nearest_boundary(self, z):
        z = np.asarray(z, dtype=complex)
        d, p = self.boundary.nearest(z)
        # the arc is exact: compare with the radial projection when it lands on the arc
        r = np.abs(z)
        on_arc = np.abs(np.angle(z)) <= self.phi_star
        d_arc = np.where(on_arc, self.R - r, np.inf)
        use = d_arc < d
        p_arc = self.R * np.exp(1j * np.angle(z))
        return np.where(use, d_arc, d), np.where(use, p_arc, p)


class ImageDomain(DomainOracle):
    """D = F(truncated cusp), with membership through the inverse map."""

    def __init__(self, params: CuspParams, R: float, n_wall: int = 6000, n_arc: int = 4000):
        self.params = params
        self.R = float(R)
        self.source = TruncatedCusp(params, R, n_wall=16, n_arc=16)
        ystar = self.source.ystar
        # wall heights chosen so the images span |F| from ~e^-700 up to F(wall end)
        s_lo = (hopf_constant(params) / 700.0) ** (1.0 / params.gap)
        y_lo = (s_lo / params.C) ** (1.0 / params.alpha)
        y = np.geomspace(min(y_lo, ystar * 1e-3), ystar, n_wall)
        upper = f_map(params, params.C * y**params.alpha + 1j * y)
        ang = np.linspace(self.source.phi_star, -self.source.phi_star, n_arc)[1:-1]
        arc = f_map(params, self.R * np.exp(1j * ang))
        pts = np.concatenate([[0j], upper, arc, np.conj(upper[::-1])])
        self.boundary = Polyline(pts)
        xr = f_map(params, self.R).real
        ym = np.abs(pts.imag).max()
        self.bbox = (0.0, max(xr, pts.real.max()), -ym, ym)

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape, dtype=bool)
        ok = (w.real > 0) & np.isfinite(w)
        if np.any(ok):
            z = f_inverse(self.params, w[ok])
            good = np.isfinite(z)
            inside = np.zeros(z.shape, dtype=bool)
            inside[good] = planar_cusp_contains(self.params, self.R, z[good])
            out[ok] = inside
        return out

    def nearest_boundary(self, w):
        return self.boundary.nearest(w)


class BarrierRegion(DomainOracle):
    """D_B intersected with the disk of radius r: {x > h_B(|y|), |y| < u0, |z| < r}."""

    def __init__(self, profile, r: float, n: int = 4000):
        if not (0 < r < profile.u0):
            raise ValueError("region radius must lie in (0, u0)")
        self.profile = profile
        self.r = float(r)
        # the curve x = h_B(|y|) meets |z| = r at height ystar
        from scipy.optimize import brentq

        ystar = brentq(lambda y: profile.h(y) ** 2 + y * y - r * r, 0.0, r, xtol=1e-16)
        self.ystar = ystar
        y = np.concatenate([[0.0], np.geomspace(ystar * 1e-12, ystar, n)])
        upper = profile.h(y) + 1j * y
        phi = math.atan2(ystar, float(profile.h(ystar)))
        arc = r * np.exp(1j * np.linspace(phi, -phi, n)[1:-1])
        self.phi_star = phi
        self.boundary = Polyline(np.concatenate([upper, arc, np.conj(upper[::-1])]))
        self.bbox = (0.0, r, -ystar, ystar)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        ay = np.abs(z.imag)
        inside = (ay < self.profile.u0) & (np.abs(z) < self.r)
        hx = np.zeros(z.shape)
        hx[inside] = self.profile.h(ay[inside])
        return inside & (z.real > hx)

    def nearest_boundary(self, z):
        return self.boundary.nearest(z)
