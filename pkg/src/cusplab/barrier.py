"""Comparison function near the flat boundary point of the image domain.

The model profile is h_B(u) = B u (log 1/u)^{-2}.  Above the graph x = h_B(|y|)
the function

    phi(z) = x + 2 h_B(x) + 2 x I(x) - 2 h_B(|z|),   I(x) = int_0^x h_B(u)/u^2 du,

is subharmonic where w(u) = h_B''(u) + h_B'(u)/u is nonincreasing, because
Laplace(phi) = 2 (w(x) - w(|z|)).  For h_B, I(x) = B / log(1/x) in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "HBProfile",
    "GenericProfile",
    "hb_eval",
    "integral_to",
    "BarrierReport",
    "check_ln_conditions",
    "phi_eval",
    "ScanResult",
    "phi_subharmonicity_scan",
    "barrier_bound_constant",
    "monotone_limit",
    "phi_on_axis",
    "e2_samples",
    "green_bound_check",
]


def monotone_limit() -> float:
    """Largest u with w = h_B'' + h_B'/u nonincreasing on (0, u]; independent of B.

    w(u) = (B/u)(L^-2 + 4L^-3 + 6L^-4) with L = log(1/u), and w' <= 0 exactly when
    L^3 + 2L^2 - 6L - 24 >= 0.
    """
    roots = np.roots([1.0, 2.0, -6.0, -24.0])
    L = max(r.real for r in roots if abs(r.imag) < 1e-12)
    return math.exp(-L)


@dataclass(frozen=True)
class HBProfile:
    B: float
    u0: float

    def __post_init__(self):
        if not (self.B > 0 and math.isfinite(self.B)):
            raise ValueError("B must be positive")
        if not (0 < self.u0 < 1):
            raise ValueError("u0 must lie in (0, 1)")

    def h(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            L = -np.log(u)
            out = np.where(u > 0, self.B * u / np.where(u > 0, L, 1.0) ** 2, 0.0)
        return out

    def dh(self, u):
        L = -np.log(np.asarray(u, dtype=float))
        return self.B * (L**-2 + 2 * L**-3)

    def d2h(self, u):
        u = np.asarray(u, dtype=float)
        L = -np.log(u)
        return self.B * (2 * L**-3 + 6 * L**-4) / u

    def integral_to(self, x):
        """int_0^x h_B(u)/u^2 du = B / log(1/x)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, self.B / -np.log(np.where(x > 0, x, 0.5)), 0.0)


@dataclass(frozen=True)
class GenericProfile:
    """Any profile given by a callable; derivatives by finite differences, integral by quadrature."""

    func: Callable[[np.ndarray], np.ndarray]
    u0: float

    def h(self, u):
        return np.asarray(self.func(np.asarray(u, dtype=float)), dtype=float)

    def dh(self, u):
        u = np.asarray(u, dtype=float)
        s = 1e-4 * u
        return (self.h(u + s) - self.h(u - s)) / (2 * s)

    def d2h(self, u):
        # nested differences: s*s underflows for tiny u
        u = np.asarray(u, dtype=float)
        s = 1e-3 * u
        h0 = self.h(u)
        return ((self.h(u + s) - h0) / s - (h0 - self.h(u - s)) / s) / s

    def integral_to(self, x):
        return np.vectorize(lambda xx: _quad_integral(self, xx))(np.asarray(x, dtype=float))


_S_MAX = 700.0  # h(exp(-s)) stays a normal double


def _quad_integral(profile, x: float) -> float:
    """int_0^x h(u)/u^2 du after substituting u = exp(-s).

    The s-integral stops at exp(-700); the remaining tail is estimated from
    a power law f(s) ~ s^-p fitted between s/2 and s, and is infinite for p <= 1.
    """
    if x <= 0:
        return 0.0
    f = lambda s: float(profile.h(math.exp(-s))) / math.exp(-s)
    s0 = -math.log(x)
    if s0 >= _S_MAX:
        return 0.0
    val, _ = quad(f, s0, _S_MAX, epsabs=0.0, epsrel=1e-12, limit=400)
    f_end, f_mid = f(_S_MAX), f(_S_MAX / 2)
    if f_end == 0.0:
        return val
    if f_mid == 0.0 or f_end / f_mid <= 0:
        return math.inf
    p = math.log(f_mid / f_end) / math.log(2.0)
    if p <= 1.0 + 1e-6:
        return math.copysign(math.inf, f_end)
    return val + _S_MAX * f_end / (p - 1.0)


def hb_eval(profile, u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u >= profile.u0):
        raise ValueError(f"u must lie in [0, u0 = {profile.u0})")
    return profile.h(u)


def integral_to(profile, x, method: str = "closed"):
    """int_0^x h(u)/u^2 du; ``method='quad'`` forces adaptive quadrature."""
    if method == "quad":
        return np.vectorize(lambda xx: _quad_integral(profile, xx))(np.asarray(x, dtype=float))
    return profile.integral_to(x)


@dataclass
class BarrierReport:
    conditions_ok: tuple[bool, bool, bool, bool]
    M: float = math.nan
    region: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(self.conditions_ok)


def check_ln_conditions(profile, grid_n: int = 2000, u_min_factor: float = 1e-200) -> BarrierReport:
    """Check conditions (1)-(4) for a profile on a logarithmic grid in (0, u0)."""
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    u = np.geomspace(profile.u0 * u_min_factor, profile.u0 * (1 - 1e-9), grid_n)
    with np.errstate(all="ignore"):
        h = profile.h(u)
        dh = profile.dh(u)
        d2h = profile.d2h(u)
    finite = bool(np.all(np.isfinite(h)) and np.all(np.isfinite(dh)) and np.all(np.isfinite(d2h)))

    # (1) C^1 up to 0 with h'(0) = 0: quotients h(u)/u and h'(u) shrink toward u -> 0
    q = h / u
    low = slice(0, grid_n // 2)
    q_small = abs(q[0]) <= 1e-2 * np.max(np.abs(q))
    dh_small = abs(dh[0]) <= 1e-2 * np.max(np.abs(dh))
    q_monotone = bool(np.all(np.diff(np.abs(q[low])) >= -1e-12 * np.abs(q[low][1:])))
    c1 = bool(finite and q_small and dh_small and q_monotone)

    # (2) integral finite on (0, eps) for eps < min(u0, 1)
    eps = np.geomspace(profile.u0 * 1e-6, profile.u0 * 0.99, 5)
    with np.errstate(all="ignore"):
        ints = np.asarray(profile.integral_to(eps), dtype=float)
    c2 = bool(np.all(np.isfinite(ints)))

    # (3) h' >= 0
    c3 = finite and bool(np.all(dh >= 0))

    # (4) w = h'' + h'/u nonincreasing, adjacent-pair comparison with relative slack
    w = d2h + dh / u
    rises = np.diff(w) > 1e-9 * np.abs(w[:-1])
    c4 = finite and not bool(np.any(rises))
    bad = u[1:][rises]
    details = {
        "grid_n": grid_n,
        "u_range": [float(u[0]), float(u[-1])],
        "condition4_violations": int(rises.sum()),
        "condition4_violation_range": [float(bad.min()), float(bad.max())] if bad.size else None,
        "monotone_limit": monotone_limit(),
    }
    return BarrierReport((c1, c2, c3, c4), details=details)


def phi_eval(profile, z):
    """phi(z) = x + 2h(x) + 2x I(x) - 2h(|z|) for z = x + iy with 0 <= x, |z| < u0."""
    z = np.asarray(z, dtype=complex)
    x = z.real
    r = np.abs(z)
    if np.any(x < 0) or np.any(r >= profile.u0):
        raise ValueError("phi is defined for 0 <= x and |z| < u0")
    return x + 2 * profile.h(x) + 2 * x * profile.integral_to(x) - 2 * profile.h(r)


def phi_on_axis(profile, x):
    """Closed form phi(x) = x + 2 x I(x) on the positive real axis."""
    x = np.asarray(x, dtype=float)
    return x + 2 * x * profile.integral_to(x)


@dataclass
class ScanResult:
    max_violation: float  # most negative discrete Laplacian (positive if none negative)
    argmin: complex
    points: int
    scale: float
    tolerance: float
    grid_h: float

    def to_json(self) -> dict:
        return {
            "max_violation": self.max_violation,
            "argmin": [self.argmin.real, self.argmin.imag],
            "points": self.points,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "grid_h": self.grid_h,
        }


def _region_mask(profile, Z, r):
    x, y = Z.real, np.abs(Z.imag)
    inside = (np.abs(Z) < r) & (y < profile.u0)
    hx = np.where(inside, profile.h(np.where(inside, y, 0.0)), np.inf)
    return inside & (x > hx)


def phi_subharmonicity_scan(profile, region_radius: float, grid_h: float, func=None,
                            rows_per_chunk: int = 256) -> ScanResult:
    """Most negative five-point Laplacian of phi (or ``func``) over D_B intersected with a disk.

    Only nodes whose four neighbours are inside are scanned.  ``tolerance`` is
    the size of the O(h^2) truncation term, estimated from the change of the
    discrete Laplacian between spacings h and 2h.  Rows are processed in
    chunks; the reduction is a plain minimum so chunking cannot change it.
    """
    if not (grid_h > 0 and region_radius > 0 and region_radius < profile.u0):
        raise ValueError("need 0 < grid_h and 0 < region_radius < u0")
    f = func if func is not None else (lambda z: phi_eval(profile, z))
    h = float(grid_h)
    nx = int(region_radius / h) + 1
    xs = h * np.arange(nx + 1)
    ys = h * np.arange(-nx, nx + 1)
    if xs.size < 5:
        raise ValueError("degenerate grid")
    best, arg, count, scale, tol = math.inf, 0j, 0, 0.0, 0.0
    for s in range(0, ys.size, rows_per_chunk):
        yy = ys[s : s + rows_per_chunk]
        Z = xs[None, :] + 1j * yy[:, None]
        ok = _region_mask(profile, Z, region_radius)
        for d in (h, -h, 1j * h, -1j * h, 2 * h, -2 * h, 2j * h, -2j * h):
            ok &= _region_mask(profile, Z + d, region_radius)
        if not ok.any():
            continue
        Zc = Z[ok]
        f0 = f(Zc)
        lap = (f(Zc + h) + f(Zc - h) + f(Zc + 1j * h) + f(Zc - 1j * h) - 4 * f0) / (h * h)
        lap2 = (f(Zc + 2 * h) + f(Zc - 2 * h) + f(Zc + 2j * h) + f(Zc - 2j * h) - 4 * f0) / (4 * h * h)
        i = int(np.argmin(lap))
        if lap[i] < best:
            best, arg = float(lap[i]), complex(Zc[i])
        count += int(ok.sum())
        scale = max(scale, float(np.max(np.abs(f0))) / (h * h))
        tol = max(tol, float(np.max(np.abs(lap2 - lap))) / 3.0)
    if count == 0:
        raise ValueError("no interior grid points in the region")
    return ScanResult(best, arg, count, scale, tol, h)


def e2_samples(profile, r: float, n: int = 1000) -> np.ndarray:
    """Points of the curve x = h_B(|y|) inside the disk of radius r."""
    from scipy.optimize import brentq

    ystar = brentq(lambda y: float(profile.h(y)) ** 2 + y * y - r * r, 0.0, r, xtol=1e-16)
    y = np.linspace(-ystar, ystar, n + 2)[1:-1]
    return profile.h(np.abs(y)) + 1j * y


def barrier_bound_constant(profile, green_on_E1, phi_on_E1) -> float:
    """M = max(phi on E1) / min(-g on E1)."""
    g = np.asarray(green_on_E1, dtype=float)
    ph = np.asarray(phi_on_E1, dtype=float)
    if g.size == 0 or ph.size == 0:
        raise ValueError("E1 samples must be nonempty")
    if np.any(-g <= 0):
        raise ValueError("-g must be positive on E1 (E1 must lie inside the domain)")
    M = float(np.max(ph) / np.min(-g))
    if not M > 0:
        raise ValueError("phi must be positive somewhere on E1")
    return M


def _image_grid(domain, r: float, pole: float, h_core: float, h_far: float = 0.01, growth: float = 0.15):
    """Grid fine (spacing h_core) around the origin and the pole, coarsening linearly outside."""
    from .fd import RectGrid, graded_axis

    core = 1.3 * max(r, pole)
    spacing = lambda u: np.minimum(h_far, h_core + growth * np.maximum(0.0, np.abs(u) - core))
    x0, x1, y0, y1 = domain.bbox
    x = graded_axis(x0 - 3 * h_core - 2 * h_far, x1 + 2 * h_far, spacing, required=(pole,))
    y = graded_axis(y0 - 2 * h_far, y1 + 2 * h_far, spacing, required=(0.0,))
    return RectGrid(x, y)


def green_bound_check(params, R: float = 1.0, a: float = 0.5, r: float | None = None,
                      B_factor: float = 1.5, n_arc: int = 401, core_cells: int = 60,
                      check_spacing: float | None = None) -> BarrierReport:
    """Build h_B from the fitted image profile and verify -g_D(z, F(a)) >= phi(z)/M.

    B is ``B_factor`` times the fitted profile constant; u0 stays below both
    the first point where the image wall reaches h_B and the monotonicity limit
    of condition (4).  g_D is the finite-difference Green function of the image
    domain, and a point passes when -g + err >= phi/M.
    """
    from .conformal import f_map, image_profile, injectivity_radius
    from .domains import BarrierRegion, ImageDomain
    from .geometry import wall_arc_meeting_height
    from .green import green_fd

    if not (0 < a < R):
        raise ValueError("the pole a must lie on the axis inside the cusp, 0 < a < R")
    if B_factor <= 1:
        raise ValueError("B_factor must exceed 1 so that h < h_B near 0")
    x_end = params.C * wall_arc_meeting_height(params, R) ** params.alpha
    s_hi = min(x_end, 0.99 * injectivity_radius(params, safety=1.0))
    prof_img = image_profile(params, np.geomspace(s_hi, 1e-6, 300))
    A2 = prof_img.a2_fit.coefficient
    B = B_factor * A2

    # first sample (from the vertex outwards) where the wall reaches h_B
    y_img, x_img = prof_img.y_tilde[::-1], prof_img.x_tilde[::-1]
    probe = HBProfile(B, 0.999)
    ok = (y_img > 0) & (y_img < 0.999)
    above = ok & (x_img >= probe.h(np.where(ok, y_img, 0.5)))
    crossing = float(y_img[np.argmax(above)]) if above.any() else None
    u0 = 0.99 * min(crossing or 1.0, monotone_limit())
    profile = HBProfile(B, u0)
    conditions = check_ln_conditions(profile).conditions_ok

    pole = float(f_map(params, a).real)
    if r is None:
        r = 0.5 * min(u0, pole)
    if not (0 < r < u0):
        raise ValueError(f"r = {r} must lie in (0, u0 = {u0})")
    if not r < pole:
        raise ValueError(f"r = {r} must be below |F(a)| = {pole} so the pole stays outside")
    domain = ImageDomain(params, R)
    region = BarrierRegion(profile, r)
    # containment of D_B in Delta_r in the image domain, checked on its boundary curve
    wall = e2_samples(profile, r, 2000)
    if not bool(np.all(domain.contains(wall))):
        raise ValueError("D_B intersected with Delta_r is not contained in the image domain")

    green = green_fd(domain, pole, grid=_image_grid(domain, r, pole, r / core_cells))
    E1 = r * np.exp(1j * region.phi_star * np.linspace(-1.0, 1.0, n_arc))
    g1, _ = green.values(E1)
    phi1 = phi_eval(profile, E1)
    M = barrier_bound_constant(profile, g1, phi1)

    hs = check_spacing or r / 200
    X, Y = np.meshgrid(np.arange(hs, r, hs), np.arange(-r + hs, r, hs))
    Z = (X + 1j * Y).ravel()
    Z = Z[region.contains(Z)]
    gz, ez = green.values(Z)
    slack = -gz + ez - phi_eval(profile, Z) / M
    report = BarrierReport(tuple(conditions), M=M)
    report.region = {"B": B, "u0": u0, "r": r, "pole": pole, "a": a, "R": R,
                     "profile_constant": A2, "wall_crossing": crossing}
    report.details = {
        "points_checked": int(Z.size),
        "violations": int(np.count_nonzero(slack < 0)),
        "min_slack": float(slack.min()),
        "min_ratio": float(np.min(-gz / (phi_eval(profile, Z) / M))),
        "green_unknowns": green.fine.unknowns,
        "max_relative_error_E1": float(np.max(_rel(green.values(E1)))),
    }
    return report


def _rel(vals):
    g, e = vals
    return e / np.maximum(np.abs(g), 1e-300)
