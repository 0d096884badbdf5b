"""Cusp geometry: membership, boundary distance and the axis-distance bounds.

Points in C^n are handled as real vectors in R^{2n}; complex input is split
into interleaved (Re, Im) coordinates so that the real inner product agrees
with Re<z, v>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CuspParams",
    "CuspFrame",
    "cusp_contains",
    "planar_cusp_contains",
    "boundary_distance_planar",
    "axis_distance_bounds",
    "holder_to_cusp",
    "wall_arc_meeting_height",
]


@dataclass(frozen=True)
class CuspParams:
    """Aperture constant ``C`` and exponent ``alpha`` of the cusp {x > C|y|^alpha}."""

    C: float
    alpha: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.C) and self.C > 0):
            raise ValueError(f"C must be a positive finite real, got {self.C!r}")
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in the open interval (0,1), got {self.alpha!r}")

    @property
    def gap(self) -> float:
        """The exponent 1/alpha - 1 that governs the map and the Hopf bound."""
        return 1.0 / self.alpha - 1.0

    @property
    def wall_scale(self) -> float:
        """C^{-1/alpha}: the wall is |y| = wall_scale * x^{1/alpha}."""
        return self.C ** (-1.0 / self.alpha)

    def half_width(self, x):
        """Half-width (x/C)^{1/alpha} of the cusp channel at axis coordinate x."""
        return (np.asarray(x, dtype=float) / self.C) ** (1.0 / self.alpha)

    def to_json(self) -> dict:
        return {"C": self.C, "alpha": self.alpha}

    @classmethod
    def from_json(cls, obj: dict) -> "CuspParams":
        return cls(float(obj["C"]), float(obj["alpha"]))


def _as_real_vector(z) -> np.ndarray:
    arr = np.asarray(z)
    if np.iscomplexobj(arr):
        out = np.empty(arr.shape[:-1] + (2 * arr.shape[-1],), dtype=float)
        out[..., 0::2] = arr.real
        out[..., 1::2] = arr.imag
        return out
    return arr.astype(float)


@dataclass(frozen=True)
class CuspFrame:
    vertex: np.ndarray
    axis: np.ndarray
    params: CuspParams
    radius: float
    _v: np.ndarray = field(init=False, repr=False, compare=False)
    _p: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        p = _as_real_vector(np.atleast_1d(self.vertex))
        v = _as_real_vector(np.atleast_1d(self.axis))
        if p.shape != v.shape or p.ndim != 1:
            raise ValueError("vertex and axis must be vectors of the same dimension")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("vertex and axis must be finite")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, |axis| = {np.linalg.norm(v)!r}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "_p", p)
        object.__setattr__(self, "_v", v)

    @property
    def dim(self) -> int:
        return self._p.size

    def to_json(self) -> dict:
        return {
            "C": self.params.C,
            "alpha": self.params.alpha,
            "vertex": self._p.tolist(),
            "axis": self._v.tolist(),
            "radius": self.radius,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CuspFrame":
        return cls(
            np.asarray(obj["vertex"], dtype=float),
            np.asarray(obj["axis"], dtype=float),
            CuspParams(float(obj["C"]), float(obj["alpha"])),
            float(obj["radius"]),
        )


def cusp_contains(frame: CuspFrame, z) -> np.ndarray | bool:
    """True iff <z-p, v> > C |pi_v(z-p)|^alpha and |z-p| < radius.

    ``z`` may be a single point or an array of points (last axis = coordinates).
    """
    w = _as_real_vector(z)
    if w.shape[-1] != frame.dim:
        raise ValueError(f"point dimension {w.shape[-1]} does not match frame dimension {frame.dim}")
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite coordinates")
    d = w - frame._p
    along = d @ frame._v
    perp = d - along[..., None] * frame._v
    lateral = np.linalg.norm(perp, axis=-1)
    inside = (along > frame.params.C * lateral**frame.params.alpha) & (
        np.linalg.norm(d, axis=-1) < frame.radius
    )
    return inside if inside.ndim else bool(inside)


def planar_cusp_contains(params: CuspParams, R: float, z) -> np.ndarray:
    """Vectorized membership in the planar truncated cusp {x > C|y|^alpha, |z| < R}."""
    z = np.asarray(z, dtype=complex)
    return (z.real > params.C * np.abs(z.imag) ** params.alpha) & (np.abs(z) < R)


def wall_arc_meeting_height(params: CuspParams, R: float) -> float:
    """Height y* > 0 where the wall x = C y^alpha meets the circle |z| = R."""
    from scipy.optimize import brentq

    f = lambda y: (params.C * y**params.alpha) ** 2 + y * y - R * R
    return brentq(f, 0.0, R, xtol=1e-16, rtol=1e-15)


class _PlanarCuspCurves:
    """The three boundary curves of the truncated planar cusp, parametrized on [0, 1].

    Walls use y = y* u^2 so that samples crowd toward the vertex.
    """

    def __init__(self, params: CuspParams, R: float):
        self.params = params
        self.R = R
        self.ystar = wall_arc_meeting_height(params, R)
        self.phi_star = math.atan2(self.ystar, params.C * self.ystar**params.alpha)

    def point(self, curve: int, u):
        u = np.asarray(u, dtype=float)
        if curve == 2:
            ang = self.phi_star * (2.0 * u - 1.0)
            return self.R * np.cos(ang) + 1j * self.R * np.sin(ang)
        y = self.ystar * u * u
        x = self.params.C * y**self.params.alpha
        return x + 1j * (y if curve == 0 else -y)


def boundary_distance_planar(
    params: CuspParams,
    R: float,
    z,
    n_samples: int = 4096,
    n_brackets: int = 3,
    check_inside: bool = True,
) -> np.ndarray | float:
    """Distance from z to the boundary of the truncated cusp by brute force.

    Dense sampling of the two walls and the arc, followed by golden-section
    refinement of the best brackets.  Works on arrays of points.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite point")
    if check_inside and not np.all(planar_cusp_contains(params, R, z)):
        bad = z[~planar_cusp_contains(params, R, z)][0]
        raise ValueError(f"point {bad!r} is outside the truncated cusp")
    curves = _PlanarCuspCurves(params, R)
    u = np.linspace(0.0, 1.0, n_samples)
    du = u[1] - u[0]
    samples = np.concatenate([curves.point(c, u) for c in range(3)])

    out = np.empty(z.size)
    chunk = max(1, 2_000_000 // samples.size)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for s in range(0, z.size, chunk):
        zz = z[s : s + chunk]
        d = np.abs(zz[:, None] - samples[None, :])
        best = np.argpartition(d, n_brackets - 1, axis=1)[:, :n_brackets]
        curve_id = best // n_samples
        centre = u[best % n_samples]
        lo = np.clip(centre - du, 0.0, 1.0)
        hi = np.clip(centre + du, 0.0, 1.0)
        zb = zz[:, None]

        def dist(t):
            pts = np.where(
                curve_id == 0,
                curves.point(0, t),
                np.where(curve_id == 1, curves.point(1, t), curves.point(2, t)),
            )
            return np.abs(zb - pts)

        for _ in range(60):
            c = hi - invphi * (hi - lo)
            e = lo + invphi * (hi - lo)
            left = dist(c) < dist(e)
            hi = np.where(left, e, hi)
            lo = np.where(left, lo, c)
        refined = np.minimum(dist(0.5 * (lo + hi)), np.minimum(dist(lo), dist(hi)))
        out[s : s + chunk] = np.minimum(refined.min(axis=1), d.min(axis=1))
    return float(out[0]) if scalar else out


def axis_distance_bounds(params: CuspParams, t: float) -> tuple[float, float]:
    """Two-sided bound on the boundary distance of the axis point at height t."""
    if not (t > 0):
        raise ValueError(f"t must be positive, got {t!r}")
    if t > 1:
        raise ValueError(f"the bound is only asserted for t <= 1, got {t!r}")
    scale = t ** (1.0 / params.alpha)
    lower = min(0.5, (2.0 * params.C) ** (-1.0 / params.alpha)) * scale
    upper = params.C ** (-1.0 / params.alpha) * scale
    return lower, upper


def holder_to_cusp(pieces: Iterable[Sequence[float]]) -> CuspParams:
    """Combine local Hölder data (C_j, alpha_j) into one cusp: largest C, smallest alpha."""
    pieces = list(pieces)
    if not pieces:
        raise ValueError("need at least one (C, alpha) pair")
    return CuspParams(max(float(c) for c, _ in pieces), min(float(a) for _, a in pieces))
