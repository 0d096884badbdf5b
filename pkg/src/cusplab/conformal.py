"""The explicit map F(z) = exp(-A z^{-(1/alpha - 1)}) of a planar cusp.

F sends the truncated cusp onto a domain D whose boundary near 0 is the graph
x = h(|y|) with h(y) ~ A2 |y| (log 1/|y|)^{-2}.  Tiny images underflow double
precision very quickly, so most quantities are also available in log form:
``log_f_map`` returns the complex logarithm G(z) = -A z^{-k} of F(z).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .geometry import CuspParams, planar_cusp_contains

__all__ = [
    "hopf_constant",
    "f_map",
    "log_f_map",
    "f_inverse",
    "BoundaryPolar",
    "boundary_polar",
    "injectivity_radius",
    "collision_scan",
    "AsymptoticFit",
    "ImageProfile",
    "image_profile",
    "angle_deficit",
]


def hopf_constant(params: CuspParams) -> float:
    """A = pi C^{1/alpha} / (2 (1/alpha - 1))."""
    return math.pi * params.C ** (1.0 / params.alpha) / (2.0 * params.gap)


def _check_points(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite input to the cusp map")
    if np.any(z == 0):
        raise ValueError("z = 0 is the essential singularity of the cusp map")
    return z


def log_f_map(params: CuspParams, z):
    """Principal logarithm of F: G(z) = -A z^{-k}, k = 1/alpha - 1."""
    z = _check_points(z)
    return -hopf_constant(params) * z ** (-params.gap)


def f_map(params: CuspParams, z):
    """F(z) = exp(-A z^{-(1/alpha-1)}) with the principal power; F(1) = e^{-A}."""
    out = np.exp(log_f_map(params, z))
    return complex(out) if out.ndim == 0 else out


def f_inverse(params: CuspParams, w):
    """Inverse of F on its image: z = (-Log w / A)^{-1/k}.

    Points with w = 0 or Re(-Log w) <= 0 have no preimage in the cusp and map to nan.
    """
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = -np.log(w) / hopf_constant(params)
        z = lw ** (-1.0 / params.gap)
    bad = ~np.isfinite(lw) | (lw.real <= 0)
    z = np.where(bad, np.nan + 0j, z)
    return complex(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class BoundaryPolar:
    """Polar data of gamma_c(s) = s + i c s^{1/alpha} and of its image under F."""

    s: np.ndarray
    c: float
    r: np.ndarray
    theta: np.ndarray
    log_r_tilde: np.ndarray
    theta_tilde: np.ndarray

    @property
    def r_tilde(self) -> np.ndarray:
        # underflows to 0 for tiny s; log_r_tilde stays exact
        return np.exp(self.log_r_tilde)


def boundary_polar(params: CuspParams, c: float, s) -> BoundaryPolar:
    cmax = params.wall_scale
    if abs(c) > cmax * (1 + 1e-15):
        raise ValueError(f"|c| = {abs(c)!r} exceeds C^(-1/alpha) = {cmax!r}")
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("s must be positive")
    k = params.gap
    A = hopf_constant(params)
    r = np.sqrt(s * s + c * c * s ** (2.0 / params.alpha))
    theta = np.arctan(c * s**k)
    rk = r**k
    return BoundaryPolar(
        s=s,
        c=float(c),
        r=r,
        theta=theta,
        log_r_tilde=-A * np.cos(k * theta) / rk,
        theta_tilde=A * np.sin(k * theta) / rk,
    )


def boundary_point(params: CuspParams, c: float, s):
    s = np.asarray(s, dtype=float)
    return s + 1j * c * s ** (1.0 / params.alpha)


def injectivity_radius(params: CuspParams, safety: float = 0.9) -> float:
    """Radius below which F is injective on the truncated cusp, shrunk by ``safety``."""
    k = params.gap
    return safety * (math.pi / (k * params.C ** (1.0 / params.alpha))) ** (1.0 / k)


def sample_cusp_points(params: CuspParams, R: float, n: int, seed: int) -> np.ndarray:
    """Quasi-random points of the truncated cusp.

    Half are Sobol points of the bounding box kept by rejection; the other half
    are drawn in (log |z|, relative angle) coordinates so the vertex region is
    represented.
    """
    sob = qmc.Sobol(d=2, scramble=True, seed=seed)
    box = []
    need = n - n // 2
    ymax = R
    while sum(len(b) for b in box) < need:
        u = sob.random(2 ** int(math.ceil(math.log2(max(need, 2)))) * 2)
        z = u[:, 0] * R + 1j * (2 * u[:, 1] - 1) * ymax
        box.append(z[planar_cusp_contains(params, R, z)])
    box = np.concatenate(box)[:need]
    sob2 = qmc.Sobol(d=2, scramble=True, seed=seed + 1)
    u = sob2.random(2 ** int(math.ceil(math.log2(max(n // 2, 2)))))[: n // 2]
    x = R * np.exp(-12.0 * u[:, 0]) * 0.999
    w = params.half_width(x)
    z2 = x + 1j * (2 * u[:, 1] - 1) * w * 0.999
    z2 = z2[planar_cusp_contains(params, R, z2)]
    return np.concatenate([box, z2])


def collision_scan(params: CuspParams, R: float, n_pairs: int = 100_000, seed: int = 0,
                   image_tol: float = 1e-12, preimage_tol: float = 1e-9) -> dict:
    """Look for pairs of distinct points with (relatively) coincident images.

    Images are compared in the logarithmic chart G = log F, where
    |F(z1) - F(z2)| / |F(z1)| = |1 - exp(G(z2) - G(z1))|; images of points near
    the vertex underflow in the plain chart and would collide spuriously.
    Two checks run: ``n_pairs`` random pairs, and every near-neighbour pair of
    the image point cloud found by a k-d tree.
    """
    # rejection can drop a few of the vertex-chart points; oversample, then trim
    pts = sample_cusp_points(params, R, 2 * n_pairs + n_pairs // 10 + 16, seed)[: 2 * n_pairs]
    if pts.size < 2 * n_pairs:
        raise RuntimeError("could not draw enough cusp points for the requested pairs")
    rng = np.random.default_rng(seed)
    G = log_f_map(params, pts)
    i, j = rng.permutation(pts.size)[: 2 * (pts.size // 2)].reshape(2, -1)
    with np.errstate(over="ignore"):
        rel = np.abs(-np.expm1(G[j] - G[i]))
    pre = np.abs(pts[i] - pts[j])
    pair_viol = int(np.count_nonzero((rel < image_tol) & (pre > preimage_tol)))

    tree = cKDTree(np.column_stack([G.real, G.imag]))
    dist, nn = tree.query(np.column_stack([G.real, G.imag]), k=2)
    a = np.arange(pts.size)
    b = nn[:, 1]
    rel_nn = np.abs(-np.expm1(G[b] - G[a]))
    pre_nn = np.abs(pts[a] - pts[b])
    nn_viol = int(np.count_nonzero((rel_nn < image_tol) & (pre_nn > preimage_tol)))
    return {
        "pairs": int(i.size),
        "points": int(pts.size),
        "pair_violations": pair_viol,
        "neighbour_violations": nn_viol,
        "min_relative_image_gap": float(min(rel.min(), rel_nn.min())),
        "ok": pair_viol == 0 and nn_viol == 0,
    }


def angle_deficit(params: CuspParams, s, dps: int = 40) -> np.ndarray:
    """pi/2 - theta_tilde(s) on the upper wall, in extended precision.

    The difference cancels catastrophically in double precision for small s.
    """
    out = []
    with mpmath.workdps(dps):
        k = 1 / mpmath.mpf(params.alpha) - 1
        cw = mpmath.mpf(params.C) ** (-1 / mpmath.mpf(params.alpha))
        A = mpmath.pi * mpmath.mpf(params.C) ** (1 / mpmath.mpf(params.alpha)) / (2 * k)
        for si in np.atleast_1d(np.asarray(s, dtype=float)):
            si = mpmath.mpf(si)
            u = cw * si**k
            th = mpmath.atan(u)
            rk = (si * si + cw * cw * si ** (2 / mpmath.mpf(params.alpha))) ** (k / 2)
            out.append(float(mpmath.pi / 2 - A * mpmath.sin(k * th) / rk))
    return np.asarray(out)


@dataclass(frozen=True)
class AsymptoticFit:
    exponent_expected: float
    coefficient: float
    residual: float
    window: tuple[float, float]
    free_exponent: float = math.nan

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be nonnegative")
        if not self.window[0] < self.window[1]:
            raise ValueError("empty fit window")


@dataclass(frozen=True)
class ImageProfile:
    s: np.ndarray
    log_y_tilde: np.ndarray
    log_x_tilde: np.ndarray
    log_r_tilde: np.ndarray
    theta_tilde: np.ndarray
    deficit: np.ndarray
    a1_fit: AsymptoticFit
    a2_fit: AsymptoticFit
    A: float

    @property
    def y_tilde(self) -> np.ndarray:
        return np.exp(self.log_y_tilde)

    @property
    def x_tilde(self) -> np.ndarray:
        return np.exp(self.log_x_tilde)

    @property
    def consistency(self) -> float:
        """A2_fit / (A1_fit A^2); the two fits are independent."""
        return self.a2_fit.coefficient / (self.a1_fit.coefficient * self.A**2)

    def rows(self):
        for i in range(self.s.size):
            yield (self.s[i], self.y_tilde[i], self.x_tilde[i], self.log_r_tilde[i], self.theta_tilde[i])


def _fixed_exponent_fit(x, y, p, window) -> AsymptoticFit:
    logc = np.log(y) - p * np.log(x)
    coef = float(np.exp(np.mean(logc)))
    resid = float(np.max(np.abs(y / (coef * x**p) - 1.0)))
    free = float(np.polyfit(np.log(x), np.log(y), 1)[0]) if x.size > 1 else math.nan
    return AsymptoticFit(p, coef, resid, window, free)


def image_profile(params: CuspParams, s_grid, window=(1e-6, 1e-4)) -> ImageProfile:
    """Upper image-boundary samples and the two asymptotic fits.

    Along the upper wall (c = C^{-1/alpha}) the image point has
    log(1/y~) = -log r~ - log sin theta~ and x~ = y~ tan(pi/2 - theta~).
    The first fit is pi/2 - theta~ ~ A1 s^{2k}; the second is
    h(y) ~ A2 y (log 1/y)^{-2}, whose normalized ratio
    tan(pi/2 - theta~) (log 1/y~)^2 is fitted by a constant.
    """
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(s <= 0):
        raise ValueError("s_grid must be a 1-d array of positive reals")
    if np.any(np.diff(s) >= 0):
        raise ValueError("s_grid must be strictly descending")
    if s[0] >= injectivity_radius(params, safety=1.0):
        raise ValueError("s_grid leaves the injectivity region")
    bp = boundary_polar(params, params.wall_scale, s)
    deficit = angle_deficit(params, s)
    log_y = bp.log_r_tilde + np.log(np.sin(bp.theta_tilde))
    log_x = log_y + np.log(np.tan(deficit))
    k = params.gap
    A = hopf_constant(params)
    w = (s >= window[0] * (1 - 1e-12)) & (s <= window[1] * (1 + 1e-12))
    if np.count_nonzero(w) < 2:
        raise ValueError("fewer than two samples inside the fit window")
    a1 = _fixed_exponent_fit(s[w], deficit[w], 2.0 * k, tuple(window))
    ratio = np.tan(deficit[w]) * log_y[w] ** 2
    a2 = _fixed_exponent_fit(s[w], ratio, 0.0, tuple(window))
    return ImageProfile(s, log_y, log_x, bp.log_r_tilde, bp.theta_tilde, deficit, a1, a2, A)
