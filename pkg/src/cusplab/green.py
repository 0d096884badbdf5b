"""Green functions of planar domains (negative convention, g = log|z - a| + harmonic).

Three independent routes:

* ``green_disk``: the closed form on a disk, used as the oracle;
* ``green_fd``: the logarithmic pole is subtracted analytically and the
  harmonic remainder H (with H = -log|z - a| on the boundary) is solved with the
  cut-cell five-point scheme on a grid and on its halving;
* ``green_wos``: g(z, a) = log|z - a| - E log|X - a| where X is the exit point
  of planar Brownian motion started at z, sampled by walk on spheres.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conformal import f_map, hopf_constant, injectivity_radius
from .domains import DomainOracle, ImageDomain, TruncatedCusp
from .fd import DirichletSolution, RectGrid, graded_axis, solve_dirichlet
from .geometry import CuspParams

__all__ = [
    "GreenEstimate",
    "WosConfig",
    "green_disk",
    "FDGreen",
    "green_fd",
    "green_wos",
    "comparison_lemma_bound",
    "cusp_grid",
    "image_grid",
    "AxisProfileRow",
    "AxisProfile",
    "axis_green_profile",
]

METHODS = ("disk_closed_form", "finite_difference", "walk_on_spheres")


@dataclass(frozen=True)
class GreenEstimate:
    value: float
    error: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.error >= 0:
            raise ValueError("error must be nonnegative")

    def to_json(self) -> dict:
        return {"value": self.value, "error": self.error, "method": self.method}


def green_disk(R: float, z, a) -> GreenEstimate | np.ndarray:
    """g(z, a) = log|R(z - a)| - log|R^2 - conj(a) z| on the disk of radius R."""
    z = np.asarray(z, dtype=complex)
    a = complex(a)
    if np.any(np.abs(z) >= R) or abs(a) >= R:
        raise ValueError("points must lie inside the disk")
    if np.any(z == a):
        raise ValueError("z = a is the logarithmic pole")
    val = np.log(R * np.abs(z - a)) - np.log(np.abs(R * R - np.conj(a) * z))
    if val.ndim == 0:
        return GreenEstimate(float(min(val, 0.0)), 0.0, "disk_closed_form")
    return np.minimum(val, 0.0)


@dataclass
class FDGreen:
    """Grid Green function on a grid and its halving, with pointwise error bars.

    ``error`` at a point is |g_fine - g_coarse|, the change under halving, which
    bounds the error of the fine value for any convergence order >= 1.
    """

    a: complex
    coarse: DirichletSolution
    fine: DirichletSolution

    def _eval(self, sol: DirichletSolution, z: np.ndarray) -> np.ndarray:
        grid = sol.grid
        H = sol.values
        i, j, s, t = grid.locate(z)
        corners = [(j, i), (j, i + 1), (j + 1, i), (j + 1, i + 1)]
        weights = [(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t]
        full = np.ones(z.shape, dtype=bool)
        for jj, ii in corners:
            full &= sol.inside[jj, ii]
        Zg = grid.points
        log_a = np.log(np.abs(z - self.a))
        out = np.zeros(z.shape)
        h_int = np.zeros(z.shape)
        g_int = np.zeros(z.shape)
        for (jj, ii), w in zip(corners, weights):
            hv = np.where(sol.inside[jj, ii], H[jj, ii], 0.0)
            h_int += w * hv
            gv = np.where(sol.inside[jj, ii], H[jj, ii] + np.log(np.abs(Zg[jj, ii] - self.a)), 0.0)
            g_int += w * gv
        out = np.where(full, log_a + h_int, g_int)
        return np.minimum(out, 0.0)

    def values(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        gf = self._eval(self.fine, z)
        gc = self._eval(self.coarse, z)
        return gf, np.abs(gf - gc)

    def __call__(self, z):
        return self.values(z)[0]

    def estimate(self, z) -> GreenEstimate:
        v, e = self.values(np.asarray([z], dtype=complex))
        return GreenEstimate(float(v[0]), float(e[0]), "finite_difference")

    def node_values(self, level: str = "fine") -> np.ndarray:
        """g on the grid nodes; exactly 0 off the domain."""
        sol = self.fine if level == "fine" else self.coarse
        Z = sol.grid.points
        with np.errstate(divide="ignore"):
            g = sol.values + np.log(np.abs(Z - self.a))
        return np.where(sol.inside, g, 0.0)


def green_fd(domain: DomainOracle, a, grid_h: float | None = None, grid: RectGrid | None = None,
             rtol: float = 1e-10) -> FDGreen:
    """Finite-difference Green function with pole at ``a``.

    Either ``grid_h`` (uniform grid over the bounding box) or an explicit
    ``grid`` is given; the solve is repeated on the halved grid.
    """
    a = complex(a)
    if grid is None:
        if grid_h is None or not grid_h > 0:
            raise ValueError("grid_h must be positive")
        grid = RectGrid.uniform(domain.bbox, grid_h, required_x=(a.real,), required_y=(a.imag,))
        h_ref = grid_h
    else:
        i = np.clip(np.searchsorted(grid.x, a.real), 1, grid.x.size - 1)
        j = np.clip(np.searchsorted(grid.y, a.imag), 1, grid.y.size - 1)
        h_ref = max(grid.x[i] - grid.x[i - 1], grid.y[j] - grid.y[j - 1])
    if not bool(domain.contains(a)):
        raise ValueError("source point is outside the domain")
    dist = float(np.asarray(domain.boundary_distance(np.asarray([a])))[0])
    if dist < 10 * h_ref:
        raise ValueError(f"source at distance {dist:.3g} from the boundary; need >= 10 grid spacings ({10 * h_ref:.3g})")

    def bval(z):
        return -np.log(np.abs(np.asarray(z) - a))

    coarse = solve_dirichlet(grid, domain.contains, bval, rtol=rtol)
    fine = solve_dirichlet(grid.refined(), domain.contains, bval, rtol=rtol)
    return FDGreen(a, coarse, fine)


@dataclass(frozen=True)
class WosConfig:
    epsilon_shell: float = 1e-4
    max_steps: int = 10_000
    trials: int = 100_000
    seed: int = 42
    block: int = 4096
    workers: int = 1

    def validate(self, domain: DomainOracle) -> None:
        if not (self.epsilon_shell > 0 and self.epsilon_shell < domain.diameter / 100):
            raise ValueError("epsilon_shell must be positive and below diameter/100")
        if self.trials < 1000:
            raise ValueError("trials must be at least 1000")
        if self.max_steps < 1 or self.block < 1 or self.workers < 1:
            raise ValueError("max_steps, block and workers must be positive")


def _wos_block(domain: DomainOracle, z: complex, n: int, seed: int, block: int, eps: float,
               max_steps: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    x = np.full(n, z, dtype=complex)
    active = np.ones(n, dtype=bool)
    exit_pt = np.zeros(n, dtype=complex)
    for _ in range(max_steps):
        # one angle per walker per step, drawn for every walker to keep streams aligned
        ang = rng.random(n) * (2 * math.pi)
        idx = np.nonzero(active)[0]
        if not idx.size:
            break
        d, p = domain.nearest_boundary(x[idx])
        done = d < eps
        exit_pt[idx[done]] = p[done]
        active[idx[done]] = False
        mv = idx[~done]
        x[mv] += d[~done] * np.exp(1j * ang[mv])
    stuck = int(active.sum())
    if stuck:
        _, p = domain.nearest_boundary(x[active])
        exit_pt[active] = p
    return exit_pt, stuck


def wos_exit_points(domain: DomainOracle, z, config: WosConfig) -> tuple[np.ndarray, int]:
    """Exit points of ``config.trials`` walks from z, in trial order."""
    config.validate(domain)
    z = complex(z)
    nblocks = -(-config.trials // config.block)
    sizes = [min(config.block, config.trials - b * config.block) for b in range(nblocks)]
    job = lambda b: _wos_block(domain, z, sizes[b], config.seed, b, config.epsilon_shell, config.max_steps)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            parts = list(ex.map(job, range(nblocks)))
    else:
        parts = [job(b) for b in range(nblocks)]
    return np.concatenate([p[0] for p in parts]), sum(p[1] for p in parts)


def green_wos(domain: DomainOracle, z, a, config: WosConfig) -> GreenEstimate:
    z, a = complex(z), complex(a)
    if z == a:
        raise ValueError("z = a is the logarithmic pole")
    if not (bool(domain.contains(z)) and bool(domain.contains(a))):
        raise ValueError("z and a must lie inside the domain")
    exits, stuck = wos_exit_points(domain, z, config)
    if stuck > 0.01 * config.trials:
        raise RuntimeError(
            f"{stuck} of {config.trials} walks exceeded max_steps={config.max_steps}; "
            "increase max_steps or the epsilon shell"
        )
    f = np.log(np.abs(exits - a))
    val = math.log(abs(z - a)) - float(np.mean(f))
    # floor at rounding level: on a disk centred at a every log|X - a| is identical
    err = float(np.std(f, ddof=1) / math.sqrt(f.size)) + 1e-14 * (1.0 + abs(val))
    return GreenEstimate(min(val, 0.0), err, "walk_on_spheres")


def comparison_lemma_bound(rho_on_circle, R1: float, R2: float, g_at: GreenEstimate,
                           rho=None, z=None) -> float:
    """Upper bound (min over the circle of -rho) / log(R2/R1) * g(z, a) for rho(z).

    When ``rho`` (a callable) and ``z`` are supplied, the bound is checked
    against the direct value and a violation raises.
    """
    samples = np.asarray(rho_on_circle, dtype=float)
    if samples.size == 0:
        raise ValueError("need samples of rho on the circle")
    if np.any(samples >= 0):
        raise ValueError("rho must be negative on the circle")
    if not R2 > R1 > 0:
        raise ValueError("need 0 < R1 < R2")
    bound = float(np.min(-samples) / math.log(R2 / R1) * g_at.value)
    if rho is not None and z is not None:
        direct = float(rho(z))
        if direct > bound + 1e-12 * max(1.0, abs(bound)) + 3 * g_at.error:
            raise AssertionError(f"rho(z) = {direct} exceeds the comparison bound {bound}")
    return bound


def cusp_grid(params: CuspParams, R: float, x_min: float, required=(), growth: float = 0.2,
              h_max: float = 0.02) -> RectGrid:
    """Tensor grid for the truncated cusp, graded toward the vertex.

    The x spacing follows ``growth`` times the local half-width of the cusp
    (frozen below ``x_min / 2``); the y spacing follows ``growth * |y|`` with
    the same floor, so each cross-section is resolved by a fixed number of cells.
    """
    floor_w = params.half_width(x_min / 2)
    sx = lambda x: np.clip(growth * params.half_width(np.maximum(x, x_min / 2)), 0, h_max)
    sy = lambda y: np.clip(growth * np.maximum(np.abs(y), floor_w), 0, h_max)
    ystar = TruncatedCusp(params, R, n_wall=16, n_arc=16).ystar
    xs = graded_axis(-2 * h_max, R + 2 * h_max, sx, required=required)
    yh = graded_axis(0.0, ystar + 2 * h_max, sy)
    return RectGrid(xs, np.concatenate([-yh[::-1], yh[1:]]))


def image_grid(domain: ImageDomain, x_min: float, required=(), growth: float = 0.2,
               h_max: float = 0.005) -> RectGrid:
    """Tensor grid for the image domain, graded toward the flat boundary point 0."""
    sp = lambda u: np.clip(growth * np.maximum(np.abs(u), x_min), 0, h_max)
    _, x1, _, y1 = domain.bbox
    xs = graded_axis(-2 * h_max, x1 + 2 * h_max, sp, required=required)
    yh = graded_axis(0.0, y1 + 2 * h_max, sp)
    return RectGrid(xs, np.concatenate([-yh[::-1], yh[1:]]))


@dataclass(frozen=True)
class AxisProfileRow:
    t: float
    g_direct: GreenEstimate
    g_via_image: GreenEstimate
    bound_value: float
    ratio: float
    x_image: float

    @property
    def invariance_ok(self) -> bool:
        gap = abs(self.g_direct.value - self.g_via_image.value)
        return gap <= self.g_direct.error + self.g_via_image.error

    @property
    def resolvable(self) -> bool:
        g = self.g_direct
        return -g.value >= RESOLVABLE_FLOOR and g.error <= 0.1 * -g.value


RESOLVABLE_FLOOR = 1e-8


@dataclass
class AxisProfile:
    params: CuspParams
    R: float
    a: float
    rows: list[AxisProfileRow]
    decay_constant: float  # fitted slope of log(-g) against -t^{-k}
    A: float
    mapped_ratio_low: float
    mapped_ratio_high: float
    mapped_decade: tuple[float, float]
    unknowns: tuple[int, int]

    @property
    def decay_relative_error(self) -> float:
        return abs(self.decay_constant / self.A - 1.0)

    @property
    def invariance_ok(self) -> bool:
        return all(r.invariance_ok for r in self.rows)

    @property
    def mapped_ratio_spread(self) -> float:
        return self.mapped_ratio_high / self.mapped_ratio_low

    def csv_rows(self):
        for r in self.rows:
            yield (r.t, r.g_direct.value, r.g_direct.error, r.g_via_image.value, r.g_via_image.error,
                   r.bound_value, r.ratio)


def axis_green_profile(params: CuspParams, R: float, t_grid, growth: float = 0.2,
                       h_max: float = 0.02) -> AxisProfile:
    """Green function of the truncated cusp along its axis, directly and through F.

    The pole is a = R/2.  The direct values come from the cusp grid, the
    mapped ones from the image domain at F(t); the decay constant is fitted
    over resolvable rows only (|g| >= 1e-8 with relative error <= 10%).
    """
    t = np.sort(np.asarray(t_grid, dtype=float))
    if t.size < 3:
        raise ValueError("need at least three t values")
    if R > injectivity_radius(params, safety=1.0):
        raise ValueError("R exceeds the injectivity radius of the cusp map")
    a = R / 2
    if not (t[0] > 0 and t[-1] < a):
        raise ValueError(f"t values must lie in (0, R/2 = {a})")
    k = params.gap
    A = hopf_constant(params)

    direct = green_fd(TruncatedCusp(params, R), a,
                      grid=cusp_grid(params, R, t[0], required=t, growth=growth, h_max=h_max))
    gd, ed = direct.values(t + 0j)

    image = ImageDomain(params, R)
    xi = np.asarray(f_map(params, t), dtype=complex).real
    pole = f_map(params, a).real
    mapped = green_fd(image, pole,
                      grid=image_grid(image, xi.min() / 4, required=xi, growth=growth, h_max=h_max / 4))
    gi, ei = mapped.values(xi + 0j)

    with np.errstate(under="ignore"):
        bound = -np.exp(-A / t**k)
    rows = [
        AxisProfileRow(float(t[i]), GreenEstimate(float(gd[i]), float(ed[i]), "finite_difference"),
                       GreenEstimate(float(gi[i]), float(ei[i]), "finite_difference"),
                       float(bound[i]), float(gd[i] / bound[i]) if bound[i] != 0 else math.inf,
                       float(xi[i]))
        for i in range(t.size)
    ]
    use = np.array([r.resolvable for r in rows])
    if use.sum() < 3:
        raise ValueError("fewer than three resolvable rows for the decay fit")
    slope = float(np.polyfit(-1.0 / t[use] ** k, np.log(-gd[use]), 1)[0])

    # mapped linearity over the decade of x starting at the smallest image point
    lin = gi / -xi
    dec = xi <= 10 * xi.min()
    return AxisProfile(params, R, a, rows, slope, A, float(lin[dec].min()), float(lin[dec].max()),
                       (float(xi.min()), float(xi[dec].max())),
                       (direct.fine.unknowns, mapped.fine.unknowns))
