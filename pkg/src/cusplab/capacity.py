"""Newtonian capacity in R^m, the dyadic cusp shells and the Wiener series at the vertex.

Cap(K) is the infimum of the Dirichlet energy of test functions equal to 1 on
K.  Two grid solvers minimise a discrete energy on tensor-product grids:

* ``capacity_variational`` works on a Cartesian grid in R^m (optionally one
  orthant with reflection symmetry) and is calibrated on balls.
* ``capacity_axisymmetric`` handles sets invariant under rotations of the
  first m-1 coordinates, which covers both the cusp shells E_k and their
  boxes F_k.  With s the lateral radius and t the axis coordinate the energy
  is |S^{m-2}| * integral of |grad phi|^2 s^(m-2) ds dt.

``capacity_hitting_mc`` gives hitting probabilities from a launch sphere by
walk on spheres; only ratios of these are meaningful.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, spsolve
from scipy.special import gamma

from .geometry import CuspParams

__all__ = [
    "CapacityEstimate",
    "TensorGrid",
    "sphere_area",
    "ball_capacity",
    "capacity_variational",
    "capacity_axisymmetric",
    "Cylinder",
    "Ball",
    "HittingEstimate",
    "capacity_hitting_mc",
    "ShellSpec",
    "shell_family",
    "WienerRow",
    "WienerReport",
    "wiener_report",
]

MAX_UNKNOWNS = 3_000_000


def sphere_area(d: int) -> float:
    """Area of the unit sphere S^d in R^(d+1)."""
    return 2 * math.pi ** ((d + 1) / 2) / gamma((d + 1) / 2)


def ball_capacity(m: int, r: float) -> float:
    """Energy capacity of the ball of radius r in R^m: (m-2) |S^(m-1)| r^(m-2)."""
    return (m - 2) * sphere_area(m - 1) * r ** (m - 2)


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    error: float
    method: str
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.value >= 0 and self.error >= 0):
            raise ValueError("capacity and its error must be nonnegative")
        if self.method not in ("variational_grid", "hitting_mc"):
            raise ValueError(f"unknown method {self.method!r}")

    def to_json(self) -> dict:
        return {"value": self.value, "error": self.error, "method": self.method, **self.details}


# ---------------------------------------------------------------- tensor grids


def _graded_nodes(lo_fine: float, hi_fine: float, h: float, outer: float, growth: float,
                  start: float | None = None) -> np.ndarray:
    """Uniform spacing h on [lo_fine, hi_fine], geometric growth out to +-outer.

    With ``start`` given the axis begins there (a symmetry plane or s = 0)
    instead of growing towards -outer.
    """
    n = max(1, int(math.ceil((hi_fine - lo_fine) / h)))
    core = np.linspace(lo_fine, hi_fine, n + 1)
    hh = (hi_fine - lo_fine) / n

    def grow(x0, limit, sign):
        out, step, x = [], hh, x0
        while sign * (limit - x) > 1e-12:
            step *= growth
            x = x + sign * step
            if sign * (x - limit) > -0.5 * step:
                x = limit
            out.append(x)
        return out

    right = grow(hi_fine, outer, 1)
    if start is None:
        left = grow(lo_fine, -outer, -1)[::-1]
        return np.concatenate([left, core, right])
    if lo_fine > start:
        m = max(1, int(math.ceil((lo_fine - start) / hh)))
        return np.concatenate([np.linspace(start, lo_fine, m + 1)[:-1], core, right])
    return np.concatenate([core, right])


@dataclass(frozen=True)
class TensorGrid:
    """Tensor grid with per-axis weights x^power (power 0 for Cartesian axes).

    An axis starting at 0 with ``mirrored`` set carries a reflection
    (Neumann) condition there; every other end node is held at 0.
    """

    axes: tuple
    powers: tuple
    mirrored: tuple

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coarse(self) -> "TensorGrid":
        """Every other node, keeping both ends."""
        def half(a):
            idx = np.arange(0, a.size, 2)
            if idx[-1] != a.size - 1:
                idx = np.append(idx, a.size - 1)
            return a[idx]
        return TensorGrid(tuple(half(a) for a in self.axes), self.powers, self.mirrored)

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")


def _axis_operators(x: np.ndarray, power: int):
    """Dual-cell measures and the 1-D stiffness matrix for weight x^power."""
    p1 = power + 1

    def integral(a, b):
        return (np.abs(b) ** p1 * np.sign(b) - np.abs(a) ** p1 * np.sign(a)) / p1 if power else b - a

    mid = 0.5 * (x[:-1] + x[1:])
    left = np.concatenate([[x[0]], mid])
    right = np.concatenate([mid, [x[-1]]])
    mu = integral(left, right)
    h = np.diff(x)
    cond = integral(x[:-1], x[1:]) / h**2
    D = sp.diags([-np.ones(h.size), np.ones(h.size)], [0, 1], shape=(h.size, x.size))
    G = (D.T @ sp.diags(cond) @ D).tocsr()
    return mu, G


def _assemble(grid: TensorGrid) -> sp.csr_matrix:
    ops = [_axis_operators(a, p) for a, p in zip(grid.axes, grid.powers)]
    K = None
    for d in range(len(ops)):
        term = None
        for e, (mu, G) in enumerate(ops):
            f = G if e == d else sp.diags(mu)
            term = f if term is None else sp.kron(term, f, format="csr")
        K = term if K is None else K + term
    return K.tocsr()


def _boundary_mask(grid: TensorGrid) -> np.ndarray:
    b = np.zeros(grid.shape, dtype=bool)
    for d, (a, mir) in enumerate(zip(grid.axes, grid.mirrored)):
        sl = [slice(None)] * len(grid.axes)
        sl[d] = -1
        b[tuple(sl)] = True
        if not mir:
            sl[d] = 0
            b[tuple(sl)] = True
    return b


def _energy(grid: TensorGrid, contains: Callable, rtol: float = 1e-8, maxiter: int = 5000) -> tuple[float, dict]:
    n = grid.size
    if n > MAX_UNKNOWNS:
        raise MemoryError(f"grid of shape {grid.shape} has {n} nodes, above the {MAX_UNKNOWNS} limit")
    X = grid.mesh()
    on = np.asarray(contains(*X), dtype=bool)
    if not on.any():
        return 0.0, {"nodes": n, "set_nodes": 0, "iterations": 0}
    bnd = _boundary_mask(grid)
    if (on & bnd).any():
        raise ValueError("the set touches the outer boundary; enlarge the box")
    K = _assemble(grid)
    fixed = (on | bnd).ravel()
    phi = on.ravel().astype(float)
    free = ~fixed
    Kff = K[free][:, free]
    rhs = -(K[free][:, fixed] @ phi[fixed])
    iters = 0
    if len(grid.axes) == 2:
        phi[free] = spsolve(Kff.tocsc(), rhs)
    else:
        dinv = 1.0 / Kff.diagonal()
        M = sp.diags(dinv)

        def count(_):
            nonlocal iters
            iters += 1

        x, info = cg(Kff, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=count)
        if info != 0:
            raise RuntimeError(f"conjugate gradients did not converge after {maxiter} iterations")
        phi[free] = x
    E = float(phi @ (K @ phi))
    return E, {"nodes": n, "set_nodes": int(on.sum()), "iterations": iters}


def _estimate(make_grid: Callable[[float, float], TensorGrid], contains, h: float, outer: float,
              factor: float) -> CapacityEstimate:
    fine = make_grid(h, outer)
    E, info = _energy(fine, contains)
    if E == 0.0:
        return CapacityEstimate(0.0, 0.0, "variational_grid", {"nodes": info["nodes"]})
    E2, _ = _energy(fine.coarse(), contains)
    Eb, _ = _energy(make_grid(h, 2 * outer), contains)
    err_h = abs(E - E2)
    err_box = abs(E - Eb)
    return CapacityEstimate(factor * E, factor * (err_h + err_box), "variational_grid",
                            {"grid_error": factor * err_h, "box_error": factor * err_box,
                             "nodes": info["nodes"], "set_nodes": info["set_nodes"],
                             "iterations": info["iterations"]})


def capacity_variational(contains: Callable, m: int, extent: float, grid_h: float,
                         outer_box_scale: float = 8.0, symmetric: bool = False,
                         growth: float = 1.3) -> CapacityEstimate:
    """Capacity of {contains} in R^m on a Cartesian grid, uniform near the set.

    ``contains(x1, ..., xm)`` is a vectorised membership predicate for a set
    inside the cube [-extent, extent]^m.  The outer box has half-width
    ``outer_box_scale`` times the set diameter; ``symmetric`` solves on one
    orthant for sets symmetric under every coordinate reflection.  The error
    adds the change under coarsening to 2h and under doubling the box.
    """
    if m not in (3, 4, 5, 6):
        raise ValueError("m must be 3, 4, 5 or 6")
    if not (extent > 0 and grid_h > 0):
        raise ValueError("extent and grid_h must be positive")
    if outer_box_scale < 8:
        raise ValueError("outer_box_scale must be at least 8")
    fine_hi = extent + 2 * grid_h

    def make(h, outer):
        if symmetric:
            a = _graded_nodes(0.0, fine_hi, h, outer, growth, start=0.0)
        else:
            a = _graded_nodes(-fine_hi, fine_hi, h, outer, growth)
        return TensorGrid((a,) * m, (0,) * m, (symmetric,) * m)

    return _estimate(make, contains, grid_h, outer_box_scale * 2 * extent, 2.0**m if symmetric else 1.0)


def capacity_axisymmetric(contains: Callable, m: int, s_max: float, t_range: tuple, s_h: float, t_h: float,
                          outer_box_scale: float = 8.0, growth: float = 1.2) -> CapacityEstimate:
    """Capacity of a set invariant under rotations of the first m-1 coordinates.

    ``contains(s, t)`` tests the lateral radius s >= 0 and axis coordinate t.
    The set lies in s <= s_max, t in t_range.  Spacing is s_h for s up to
    2 s_max (geometric beyond) and t_h along t_range.
    """
    if m < 3:
        raise ValueError("m must be at least 3")
    t0, t1 = t_range
    diam = 2 * max(s_max, abs(t0), abs(t1), t1 - t0)
    centre = 0.5 * (t0 + t1)

    def make(scale, outer):
        s = _graded_nodes(0.0, 2 * s_max, s_h * scale, outer, growth, start=0.0)
        t = centre + _graded_nodes(t0 - centre - 2 * t_h, t1 - centre + 2 * t_h, t_h * scale, outer, growth)
        return TensorGrid((s, t), (m - 2, 0), (True, False))

    return _estimate(lambda f, o: make(f, o), contains, 1.0, outer_box_scale * diam, sphere_area(m - 2))


# ---------------------------------------------------------------- hitting probabilities


@dataclass(frozen=True)
class Cylinder:
    """Closed B^(m-1)(radius) x [t0, t1] with the last coordinate as axis."""

    radius: float
    t0: float
    t1: float

    def contains(self, x: np.ndarray) -> np.ndarray:
        s = np.linalg.norm(x[..., :-1], axis=-1)
        t = x[..., -1]
        return (s <= self.radius) & (t >= self.t0) & (t <= self.t1)

    def distance(self, x: np.ndarray) -> np.ndarray:
        s = np.linalg.norm(x[..., :-1], axis=-1)
        t = x[..., -1]
        ds = np.maximum(s - self.radius, 0.0)
        dt = np.maximum(np.maximum(self.t0 - t, t - self.t1), 0.0)
        return np.hypot(ds, dt)

    @property
    def scale(self) -> float:
        return max(self.radius, self.t1 - self.t0)

    @property
    def reach(self) -> float:
        return math.hypot(self.radius, max(abs(self.t0), abs(self.t1)))


@dataclass(frozen=True)
class Ball:
    centre: tuple
    radius: float

    def contains(self, x):
        return np.linalg.norm(x - np.asarray(self.centre), axis=-1) <= self.radius

    def distance(self, x):
        return np.maximum(np.linalg.norm(x - np.asarray(self.centre), axis=-1) - self.radius, 0.0)

    @property
    def scale(self) -> float:
        return self.radius

    @property
    def reach(self) -> float:
        return float(np.linalg.norm(self.centre)) + self.radius


@dataclass(frozen=True)
class HittingEstimate:
    probability: float
    stderr: float
    hits: int
    trials: int
    inconclusive: bool

    def ratio_to(self, other: "HittingEstimate") -> tuple[float, float]:
        """self/other with a first-order error."""
        if self.inconclusive or other.inconclusive:
            return math.nan, math.inf
        r = self.probability / other.probability
        return r, r * math.hypot(self.stderr / self.probability, other.stderr / other.probability)

    def to_estimate(self) -> CapacityEstimate:
        return CapacityEstimate(self.probability, self.stderr, "hitting_mc",
                                {"hits": self.hits, "trials": self.trials, "relative": True})


_BLOCK = 4096


def _hit_block(target, m, launch, outer, n, seed, block, eps, max_steps):
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    x = rng.standard_normal((n, m))
    x *= launch / np.linalg.norm(x, axis=1, keepdims=True)
    alive = np.ones(n, dtype=bool)
    hit = np.zeros(n, dtype=bool)
    eps_out = eps
    for _ in range(max_steps):
        if not alive.any():
            break
        xa = x[alive]
        d_set = target.distance(xa) if target is not None else np.full(xa.shape[0], np.inf)
        d_out = outer - np.linalg.norm(xa, axis=1)
        idx = np.nonzero(alive)[0]
        h = d_set <= eps
        out = d_out <= eps_out
        hit[idx[h]] = True
        alive[idx[h | out]] = False
        go = ~(h | out)
        r = np.minimum(d_set[go], d_out[go])
        step = rng.standard_normal((r.size, m))
        step *= (r / np.linalg.norm(step, axis=1))[:, None]
        x[idx[go]] = xa[go] + step
    else:
        if alive.any():
            raise RuntimeError("walks did not terminate within max_steps")
    return int(hit.sum())


def capacity_hitting_mc(target, m: int, launch_radius: float, outer_radius: float, trials: int,
                        seed: int = 42, max_steps: int = 100_000) -> HittingEstimate:
    """P(hit target before leaving the outer sphere) from a uniform start on the launch sphere.

    ``target`` needs ``distance(x)`` and ``reach`` (an enclosing radius about
    the origin) or may be None for the empty set.  The average over the
    launch sphere is proportional to the condenser capacity of the target, so
    ratios of probabilities estimate capacity ratios.
    """
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    if outer_radius < 8 * launch_radius:
        raise ValueError("outer_radius must be at least 8 launch radii")
    if target is not None and target.reach > launch_radius / 4:
        raise ValueError("target must lie within a quarter of the launch radius")
    eps = 1e-4 * (target.scale if target is not None else launch_radius)
    hits = 0
    for b, start in enumerate(range(0, trials, _BLOCK)):
        hits += _hit_block(target, m, launch_radius, outer_radius, min(_BLOCK, trials - start),
                           seed, b, eps, max_steps)
    p = hits / trials
    se = math.sqrt(max(p * (1 - p), 1.0 / trials) / trials) if hits else 0.0
    return HittingEstimate(p, se, hits, trials, inconclusive=hits == 0)


# ---------------------------------------------------------------- cusp shells and the Wiener series


@dataclass(frozen=True)
class ShellSpec:
    """E_k = cusp intersected with 2^(-k-1) <= |x| <= 2^(-k), and its covering box F_k.

    Coordinates are (s, t): s the norm of the 2n-1 lateral coordinates, t the
    cusp axis.  The cusp is t >= C s^alpha.
    """

    k: int
    m: int
    params: CuspParams

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.box_radius > 0:
            raise ValueError(f"k = {self.k} is out of representable range")

    @property
    def inner_radius(self) -> float:
        return 2.0 ** (-self.k - 1)

    @property
    def outer_radius(self) -> float:
        return 2.0 ** (-self.k)

    @property
    def box_radius(self) -> float:
        return (2.0 ** (-self.k) / self.params.C) ** (1.0 / self.params.alpha)

    @property
    def box_t_range(self) -> tuple[float, float]:
        return 2.0 ** (-self.k - 2), 2.0 ** (-self.k + 1)

    def contains(self, s, t):
        s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
        r = np.hypot(s, t)
        return (t >= self.params.C * s**self.params.alpha) & (r >= self.inner_radius) & (r <= self.outer_radius)

    def box_contains(self, s, t):
        s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
        t0, t1 = self.box_t_range
        return (s <= self.box_radius) & (t >= t0) & (t <= t1)

    def contains_point(self, x) -> np.ndarray:
        """Membership for points of R^m given as (..., m) arrays."""
        x = np.asarray(x, dtype=float)
        return self.contains(np.linalg.norm(x[..., :-1], axis=-1), x[..., -1])

    def affine_map(self, y) -> np.ndarray:
        """The map sending F = B_1 x [1/4, 2] onto F_k."""
        y = np.asarray(y, dtype=float)
        out = y.copy()
        out[..., :-1] *= self.box_radius
        out[..., -1] *= 2.0 ** (-self.k)
        return out

    def box(self) -> Cylinder:
        t0, t1 = self.box_t_range
        return Cylinder(self.box_radius, t0, t1)


def shell_family(params: CuspParams, n: int, k_range) -> list[ShellSpec]:
    if n < 2:
        raise ValueError("the box construction needs n >= 2")
    return [ShellSpec(int(k), 2 * n, params) for k in k_range]


def _shell_capacity(shell: ShellSpec, which: str, resolution: int) -> CapacityEstimate:
    """Cap of F_k or E_k, computed on the copy rescaled by 2^k (capacity scales by L^(m-2))."""
    L = 2.0 ** shell.k
    t0, t1 = shell.box_t_range
    r = shell.box_radius * L
    pred = shell.box_contains if which == "box" else shell.contains
    est = capacity_axisymmetric(lambda s, t: pred(s / L, t / L), shell.m, r, (t0 * L, t1 * L),
                                s_h=r / resolution, t_h=(t1 - t0) * L / (4 * resolution))
    f = L ** (-(shell.m - 2))
    return CapacityEstimate(est.value * f, est.error * f, est.method,
                            {**est.details, "rescaled_by": L})


@dataclass(frozen=True)
class WienerRow:
    k: int
    cap: float
    cap_error: float
    weight: float
    term: float
    partial_sum: float
    cap_shell: float | None = None
    cap_shell_error: float | None = None

    @property
    def box_bound_ok(self) -> bool:
        """Cap(E_k) <= Cap(F_k) up to the combined error."""
        if self.cap_shell is None:
            return True
        return self.cap_shell <= self.cap + 3 * (self.cap_error + self.cap_shell_error)


@dataclass(frozen=True)
class WienerReport:
    n: int
    params: CuspParams
    rows: tuple
    verdict: str
    fitted_term_ratio: float
    ratio_stderr: float
    predicted_ratio: float
    thinness: str
    note: str = ""

    @property
    def consecutive_ratios(self) -> list[float]:
        return [b.term / a.term for a, b in zip(self.rows, self.rows[1:])]

    def csv_rows(self):
        for r in self.rows:
            yield (r.k, r.cap, r.weight, r.term, r.partial_sum)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "params": self.params.to_json(),
            "verdict": self.verdict,
            "thinness": self.thinness,
            "fitted_term_ratio": self.fitted_term_ratio,
            "ratio_stderr": self.ratio_stderr,
            "predicted_ratio": self.predicted_ratio,
            "consecutive_ratios": self.consecutive_ratios,
            "rows": [r.__dict__ for r in self.rows],
            "note": self.note,
        }


def wiener_report(params: CuspParams, n: int, k_range=range(2, 7), method: str = "variational",
                  resolution: int = 16, shell_check: bool = True, workers: int = 1) -> WienerReport:
    """Wiener series terms 2^(k(m-2)) Cap(F_k) for the closed cusp in C^n = R^(2n).

    For n = 1 nothing is computed: the complement of a closed planar cusp is
    simply connected, so the vertex is regular and the cusp is not thin.
    """
    predicted = 2.0 ** (-(2 * n - 3) * (1 / params.alpha - 1)) if n >= 2 else math.nan
    if n == 1:
        return WienerReport(1, params, (), "diverging", math.nan, math.nan, predicted, "not_thin",
                            "not computed: the complement of a closed planar cusp is simply connected")
    if 2 * n > 6:
        raise ValueError("capacity solvers support m = 2n <= 6")
    if method != "variational":
        raise ValueError(f"unsupported method {method!r}")
    shells = shell_family(params, n, k_range)
    jobs = [(sh, "box") for sh in shells] + ([(sh, "shell") for sh in shells] if shell_check else [])
    run = lambda job: _shell_capacity(job[0], job[1], resolution)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            caps = list(ex.map(run, jobs))
    else:
        caps = [run(j) for j in jobs]
    rows, total = [], 0.0
    for i, shell in enumerate(shells):
        box = caps[i]
        cs = caps[len(shells) + i] if shell_check else None
        w = 2.0 ** (shell.k * (shell.m - 2))
        total += w * box.value
        rows.append(WienerRow(shell.k, box.value, box.error, w, w * box.value, total,
                              cs.value if cs else None, cs.error if cs else None))
    if len(rows) < 3:
        return WienerReport(n, params, tuple(rows), "inconclusive", math.nan, math.nan, predicted,
                            "inconclusive", "fewer than three shells")
    k = np.array([r.k for r in rows], dtype=float)
    y = np.log([r.term for r in rows])
    sig = np.array([max(r.cap_error / r.cap, 1e-12) for r in rows])
    A = np.vstack([k, np.ones_like(k)]).T
    W = np.diag(1 / sig**2)
    cov = np.linalg.inv(A.T @ W @ A)
    coef = cov @ A.T @ W @ y
    resid = y - A @ coef
    dof = max(1, k.size - 2)
    scale = max(1.0, float(resid @ W @ resid) / dof)
    slope_se = math.sqrt(cov[0, 0] * scale)
    ratio = math.exp(coef[0])
    ratio_se = ratio * slope_se
    if ratio < 1 - 3 * ratio_se:
        verdict, thin = "converging", "thin"
    elif ratio > 1 + 3 * ratio_se:
        verdict, thin = "diverging", "not_thin"
    else:
        verdict, thin = "inconclusive", "inconclusive"
    return WienerReport(n, params, tuple(rows), verdict, ratio, ratio_se, predicted, thin)
