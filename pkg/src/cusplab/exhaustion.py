"""Envelopes, the alpha/a recursions, the convex function tau and a planar patching model.

The envelopes are

    psi(t) = -C1 (-log(-t))^(-beta),    phi(t) = -C2 exp(-A / (-t)^k),  k = 1/alpha - 1,

and alpha_{nu+1} = psi^{-1}(phi(alpha_nu) / 2).  Writing alpha = -exp(-L), the
recursion reads log L_{nu+1} = (log C1 - log C2 + A exp(k L_nu) + log 2) / beta,
which is how it is iterated here.  For most constants the sequence leaves the
double range within two or three steps; ``ExhaustionParams.slow_model`` picks
constants for which the recursion creeps through a bottleneck and produces a
few dozen representable terms.

The patching model replaces plurisubharmonicity with planar subharmonicity on
a disk: it is a model of the covering argument, not a computation of genuine
relative extremal functions in C^n.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import lambertw

__all__ = [
    "ExhaustionParams",
    "RecursionRangeError",
    "envelope_eval",
    "psi_inverse",
    "log_alpha_sequence",
    "alpha_sequence",
    "a_sequence",
    "SequenceTable",
    "sequence_table",
    "tau_eval",
    "tau_inverse",
    "lambda_of",
    "relative_extremal_annulus",
    "Patch",
    "default_covering",
    "DiskModel",
    "PatchReport",
    "patch_decay_sim",
]

# alpha and a are kept as normal doubles: exp(-L) with L below this bound
EXP_RANGE = 700.0


class RecursionRangeError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"index {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class ExhaustionParams:
    C1: float = 1.0
    beta: float = 1.0
    C2: float = 1.0
    A: float = math.pi / 2
    alpha: float = 0.5
    alpha1: float = -0.01

    def __post_init__(self):
        for name in ("C1", "beta", "C2", "A"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite real, got {v!r}")
        if not (0 < self.alpha < 1):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (-1 < self.alpha1 < 0):
            raise ValueError(f"alpha1 must lie in (-1, 0), got {self.alpha1!r}")
        # psi <= phi on the working range, i.e. |psi| >= |phi| for L >= L1
        L = np.geomspace(self.L1, self.L1 * 1e3, 1000)
        gap = _log_phi_mag_neg(self, L) - _log_psi_mag_neg(self, L)
        bad = np.nonzero(gap < 0)[0]
        if bad.size:
            t = -math.exp(-L[bad[0]])
            raise ValueError(f"psi > phi at t = {t!r}; the envelopes are not ordered")

    @property
    def k(self) -> float:
        return 1.0 / self.alpha - 1.0

    @property
    def L1(self) -> float:
        return -math.log(-self.alpha1)

    @classmethod
    def slow_model(cls, beta: float = 150.0, A: float = 1.0, alpha: float = 0.5, C2: float = 1.0,
                   depth: float = 5e-4, start: float = 0.5) -> "ExhaustionParams":
        """Constants for which the recursion passes slowly through a bottleneck.

        With gap(L) = log|psi| - log|phi| as a function of L = log 1/|t|, each step
        multiplies L by exp((gap + log 2)/beta).  C1 is chosen so that the
        minimum of gap, at k L = W(beta/A), equals ``depth * beta``; the seed
        sits at ``start`` times that minimiser.
        """
        k = 1.0 / alpha - 1.0
        Lm = float(lambertw(beta / A).real) / k
        log_c1 = depth * beta - (A * math.exp(k * Lm) - math.log(C2) - beta * math.log(Lm))
        if log_c1 > 700:
            raise ValueError("C1 would overflow; lower beta or raise alpha")
        return cls(C1=math.exp(log_c1), beta=beta, C2=C2, A=A, alpha=alpha,
                   alpha1=-math.exp(-start * Lm))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ExhaustionParams":
        return cls(**{k: float(d[k]) for k in ("C1", "beta", "C2", "A", "alpha", "alpha1") if k in d})


def _log_psi_mag_neg(p: ExhaustionParams, L):
    """-log|psi(t)| at t = -exp(-L)."""
    return p.beta * np.log(L) - math.log(p.C1)


def _log_phi_mag_neg(p: ExhaustionParams, L):
    """-log|phi(t)| at t = -exp(-L)."""
    with np.errstate(over="ignore"):
        return p.A * np.exp(p.k * np.asarray(L, dtype=float)) - math.log(p.C2)


def envelope_eval(p: ExhaustionParams, t):
    """(psi(t), phi(t)) for -1 < t < 0."""
    t = np.asarray(t, dtype=float)
    if np.any(~((t > -1) & (t < 0))):
        raise ValueError("t must lie in (-1, 0)")
    L = -np.log(-t)
    with np.errstate(over="ignore", under="ignore"):
        psi = -p.C1 * L ** (-p.beta)
        phi = -p.C2 * np.exp(-p.A / (-t) ** p.k)
    if psi.ndim == 0:
        return float(psi), float(phi)
    return psi, phi


def psi_inverse(p: ExhaustionParams, y):
    """The exact inverse -exp(-(C1 / -y)^(1/beta)) of psi."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y < 0)):
        raise ValueError("psi_inverse needs y < 0")
    with np.errstate(over="ignore", under="ignore"):
        out = -np.exp(-((p.C1 / -y) ** (1.0 / p.beta)))
    return float(out) if out.ndim == 0 else out


def log_alpha_sequence(p: ExhaustionParams, N: int, limit: float = math.inf) -> np.ndarray:
    """L_nu = log(1 / |alpha_nu|) for nu = 1..N.

    Raises RecursionRangeError naming the first index whose L (or the
    matching a-value exponent) is not finite or exceeds ``limit``.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    out = [p.L1]
    log_c1, log_c2, log2 = math.log(p.C1), math.log(p.C2), math.log(2.0)
    for nu in range(1, N):
        L = out[-1]
        try:
            lphi = p.A * math.exp(p.k * L) - log_c2
            nxt = math.exp((log_c1 + lphi + log2) / p.beta)
        except OverflowError:
            raise RecursionRangeError(nu + 1, "alpha underflows even in log form") from None
        if not math.isfinite(nxt) or nxt > limit:
            raise RecursionRangeError(nu + 1, f"log(1/|alpha|) = {nxt:.6g} exceeds {limit:g}")
        if nxt <= L:
            raise RecursionRangeError(nu + 1, "sequence is not increasing; psi <= phi fails")
        out.append(nxt)
    return np.asarray(out)


def alpha_sequence(p: ExhaustionParams, N: int) -> np.ndarray:
    """alpha_1..alpha_N as doubles; every term and its a-value must be a normal double."""
    L = log_alpha_sequence(p, N, limit=EXP_RANGE)
    lam = _a_exponents(p, L)
    bad = np.nonzero(lam > EXP_RANGE)[0]
    if bad.size:
        raise RecursionRangeError(int(bad[0]) + 1, "a-value underflows double precision")
    return -np.exp(-L)


def _a_exponents(p: ExhaustionParams, L: np.ndarray) -> np.ndarray:
    """-log|a_nu|: phi for odd nu, psi for even nu (1-based)."""
    odd = (np.arange(L.size) % 2) == 0
    return np.where(odd, _log_phi_mag_neg(p, L), _log_psi_mag_neg(p, L))


@dataclass
class ACheck:
    values: np.ndarray
    halving_failures: list[int] = field(default_factory=list)
    odd_bound_failures: list[int] = field(default_factory=list)
    order_failures: list[int] = field(default_factory=list)
    halving_max_error: float = 0.0

    @property
    def ok(self) -> bool:
        return not (self.halving_failures or self.odd_bound_failures or self.order_failures)


def a_sequence(p: ExhaustionParams, alphas) -> ACheck:
    """a_nu = phi(alpha_nu) for odd nu, psi(alpha_nu) for even nu, with the halving checks."""
    alphas = np.asarray(alphas, dtype=float)
    psi, phi = envelope_eval(p, alphas)
    nu = np.arange(1, alphas.size + 1)
    a = np.where(nu % 2 == 1, phi, psi)
    chk = ACheck(a)
    for i in range(1, a.size, 2):  # i is 0-based, nu = i + 1 even
        err = abs(a[i] / (a[i - 1] / 2) - 1.0)
        chk.halving_max_error = max(chk.halving_max_error, err)
        if err > 1e-12:
            chk.halving_failures.append(i + 1)
        if i + 1 < a.size and a[i + 1] < a[i] / 2 - 1e-15:
            chk.odd_bound_failures.append(i + 2)
    for i in range(a.size):
        if not a[i] < 0 or (i and not a[i] > a[i - 1]):
            chk.order_failures.append(i + 1)
    return chk


@dataclass
class SequenceTable:
    alphas: np.ndarray
    a_values: np.ndarray
    tau_breaks: list[tuple[float, float]]
    log_alphas: np.ndarray
    checks: ACheck

    def __post_init__(self):
        a = self.a_values
        self._prefix = np.concatenate([[0.0], np.cumsum(a[1:] / a[:-1])])

    def __len__(self) -> int:
        return self.alphas.size

    @property
    def tau_at_breaks(self) -> np.ndarray:
        return np.array([b[1] for b in self.tau_breaks])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.tau_at_breaks)

    @property
    def c0(self) -> float:
        """Smallest c0 >= 1/2 with tau(a_nu) >= nu/2 - c0 over the table."""
        nu = np.arange(1, len(self) + 1)
        return float(max(0.5, np.max(nu / 2 - self.tau_at_breaks)))

    def rows(self):
        for i in range(len(self)):
            yield (i + 1, self.alphas[i], self.a_values[i], self.tau_breaks[i][1])


def _tau(a: np.ndarray, prefix: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x > a[-1]):
        raise ValueError(f"x = {float(np.max(x))!r} lies beyond the last tabulated a = {a[-1]!r}; "
                         "extend the sequence")
    i = np.clip(np.searchsorted(a, x, side="right") - 1, 0, a.size - 2)
    with np.errstate(over="ignore", invalid="ignore"):
        val = (i + 1) - prefix[i] - x / a[i]
    return np.where(x <= a[0], 0.0, val)


def sequence_table(p: ExhaustionParams, N: int | None = None) -> SequenceTable:
    """Table of alpha_nu, a_nu and tau(a_nu).

    With N = None the table runs until the next term would leave the double
    range and is cut to odd length, so that phi(alpha_nu) <= a_last for every
    tabulated nu.
    """
    if N is None:
        L = [p.L1]
        try:
            while True:
                L = list(log_alpha_sequence(p, len(L) + 1, limit=EXP_RANGE))
                if _a_exponents(p, np.asarray(L))[-1] > EXP_RANGE:
                    L.pop()
                    break
        except RecursionRangeError:
            pass
        if len(L) % 2 == 0:
            L.pop()
        if len(L) < 3:
            raise ValueError("fewer than three representable terms; use ExhaustionParams.slow_model")
        alphas = -np.exp(-np.asarray(L))
    else:
        alphas = alpha_sequence(p, N)
    chk = a_sequence(p, alphas)
    if chk.order_failures:
        raise ValueError(f"a-sequence not increasing and negative at indices {chk.order_failures}")
    a = chk.values
    prefix = np.concatenate([[0.0], np.cumsum(a[1:] / a[:-1])])
    tau_a = _tau(a, prefix, a)
    return SequenceTable(alphas, a, list(zip(a.tolist(), tau_a.tolist())), -np.log(-alphas), chk)


def tau_eval(table: SequenceTable, x):
    """The convex increasing piecewise-linear function tau."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x < 0)):
        raise ValueError("tau is defined for x < 0")
    out = _tau(table.a_values, table._prefix, x)
    return float(out) if out.ndim == 0 else out


def tau_inverse(table: SequenceTable, y: float) -> float:
    """x with tau(x) = y, for 0 < y <= tau(a_last)."""
    ta = table.tau_at_breaks
    if not (0 < y <= ta[-1]):
        raise ValueError(f"tau value {y!r} outside (0, {ta[-1]!r}]")
    a = table.a_values
    hit = np.nonzero(ta == y)[0]
    if hit.size:
        return float(a[hit[0]])
    i = int(np.clip(np.searchsorted(ta, y, side="left") - 1, 0, ta.size - 2))
    # on [a_i, a_{i+1}] tau = (i+1) - prefix_i - x / a_i
    return float(((i + 1) - table._prefix[i] - y) * a[i])


def lambda_of(table: SequenceTable, t):
    """max{nu : alpha_nu <= -t}, by binary search on the increasing alphas."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("t must be positive")
    if np.any(t > -table.alphas[0]):
        raise ValueError(f"t exceeds -alpha_1 = {-table.alphas[0]!r}; lambda is undefined")
    if np.any(t < -table.alphas[-1]):
        raise ValueError("t is below the last tabulated |alpha|; extend the sequence")
    out = np.searchsorted(table.alphas, -t, side="right")
    return int(out) if out.ndim == 0 else out


def relative_extremal_annulus(R1: float, R2: float, z):
    """Relative extremal function of the disk of radius R2 with respect to the closed disk of radius R1."""
    if not (0 < R1 < R2):
        raise ValueError("need 0 < R1 < R2")
    r = np.abs(np.asarray(z, dtype=complex))
    if np.any(r >= R2):
        raise ValueError("|z| must be below R2")
    with np.errstate(divide="ignore"):
        out = np.maximum(-1.0, np.log(r / R2) / math.log(R2 / R1))
    return float(out) if out.ndim == 0 else out


def _neg_rho_from_delta(R1: float, R2: float, delta):
    """-rho at boundary distance delta of the disk, accurate for tiny delta."""
    return np.minimum(1.0, -np.log1p(-np.asarray(delta) / R2) / math.log(R2 / R1))


# ---------------------------------------------------------------- patching model


@dataclass(frozen=True)
class Patch:
    """Half-plane patch {s > s_outer} with s = Re(z exp(-i direction)).

    The cutoff chi equals 1 for s >= s_inner and 0 for s <= s_outer.  It is C^1:
    a quick convex rise over the first ``kink`` fraction, then a long concave
    approach to 1, which keeps the negative part of its Laplacian small.
    """

    direction: float
    s_outer: float = -0.5
    s_inner: float = 0.6
    theta: float = 0.5
    kink: float = 0.1

    def s(self, z):
        return (np.asarray(z, dtype=complex) * np.exp(-1j * self.direction)).real

    def chi(self, z):
        t = np.clip((self.s(z) - self.s_outer) / (self.s_inner - self.s_outer), 0.0, 1.0)
        p = self.kink
        return np.where(t <= p, t * t / p, 1.0 - (1.0 - t) ** 2 / (1.0 - p))


def default_covering() -> list[Patch]:
    thetas = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
    return [Patch(direction=j * math.pi / 2, theta=thetas[j]) for j in range(4)]


@dataclass(frozen=True)
class DiskModel:
    """Omega = disk of radius R2, B = closed disk of radius R1, delta = R2 - |z|.

    Samples are an interior Cartesian grid (delta >= |alpha_1|) and a boundary
    layer of angles times delta levels (every |alpha_nu|, geometric midpoints
    and 0); delta is carried separately from z so tiny distances stay exact.
    """

    R1: float = 0.25
    R2: float = 1.0
    grid_h: float = 0.02
    n_angles: int = 256

    def __post_init__(self):
        if not (0 < self.R1 < self.R2):
            raise ValueError("need 0 < R1 < R2")
        if not (0 < self.grid_h < self.R2 / 10):
            raise ValueError("grid_h must lie in (0, R2/10)")
        if self.n_angles < 16:
            raise ValueError("n_angles must be at least 16")

    def grid(self):
        h = self.grid_h
        n = int(math.ceil(self.R2 / h)) + 1
        ax = h * np.arange(-n, n + 1)
        return ax[None, :] + 1j * ax[:, None]


@dataclass
class PatchReport:
    c0: float
    c1: float
    c2: float
    c3: float
    l: int
    epsilon0: float
    K: float
    N: float
    M: float
    tau_a: float
    a: float
    kappa: list[float]
    kappa_lower: list[float]
    M_series: list[float]
    overlap_max: float
    junction_violations: int
    subharmonic_min: float
    final_bound_max_ratio: float
    samples: int
    checks: dict
    # M_{nu+l} <= (1 - kappa_nu) M_nu needs u_eps subharmonic in the boundary
    # layer, which the synthesized inputs are not; reported, not gated
    kappa_step_holds: bool = False

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def _rho_mix(theta: float, psi, phi):
    # skip zero-weight terms so -inf envelopes do not produce nan
    if theta == 0.0:
        return phi.copy()
    if theta == 1.0:
        return psi.copy()
    return theta * psi + (1.0 - theta) * phi


def _envelopes_at(p: ExhaustionParams, delta: np.ndarray):
    """psi(-delta), phi(-delta) with the limits 0 at delta = 0 and -inf for delta >= 1."""
    psi = np.zeros(delta.shape)
    phi = np.zeros(delta.shape)
    pos = delta > 0
    L = np.full(delta.shape, np.inf)
    with np.errstate(divide="ignore"):
        L[pos] = -np.log(delta[pos])
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        psi[pos] = np.where(L[pos] > 0, -p.C1 * L[pos] ** (-p.beta), -np.inf)
        phi[pos] = -p.C2 * np.exp(-p.A / delta[pos] ** p.k)
    return psi, phi


def patch_decay_sim(p: ExhaustionParams, table: SequenceTable | None = None,
                    model: DiskModel | None = None, covering: list[Patch] | None = None,
                    l: int | None = None, epsilon_schedule=None, u0_radius: float | None = None) -> PatchReport:
    """Patched envelope u_eps on the disk model, its sandwich, kappa_nu and the decay of M_nu."""
    table = table or sequence_table(p)
    model = model or DiskModel()
    covering = covering or default_covering()
    n = len(table)
    a_vals, alphas = table.a_values, table.alphas
    R1, R2 = model.R1, model.R2

    # ---- samples
    G = model.grid()
    delta_g = R2 - np.abs(G)
    d1 = -alphas[0]
    interior = delta_g >= d1
    Zi = G[interior]
    di = delta_g[interior]
    ang = 2 * math.pi * (np.arange(model.n_angles) + 0.5) / model.n_angles
    mids = np.exp(-0.5 * (table.log_alphas[:-1] + table.log_alphas[1:]))
    levels = np.concatenate([-alphas, mids, [0.0]])
    level_index = np.concatenate([np.arange(1, n + 1), np.zeros(n - 1, int), [0]])
    Zl = ((R2 - levels)[:, None] * np.exp(1j * ang)[None, :]).ravel()
    dl = np.repeat(levels, model.n_angles)
    li = np.repeat(level_index, model.n_angles)
    Z = np.concatenate([Zi, Zl])
    delta = np.concatenate([di, dl])
    lev = np.concatenate([np.zeros(Zi.size, int), li])
    if not np.all(delta[lev == 0][: Zi.size] >= d1):
        raise ValueError("interior samples must satisfy delta >= |alpha_1|")

    # ---- inputs rho_j and the sandwich of the inputs
    psi, phi = _envelopes_at(p, delta)
    rho = [_rho_mix(pt.theta, psi, phi) for pt in covering]
    for j, r in enumerate(rho):
        if np.any(r < psi - 1e-300) or np.any(r > phi):
            raise ValueError(f"patch {j}: input rho violates psi(-delta) <= rho <= phi(-delta)")
    chi = np.array([pt.chi(Z) for pt in covering])
    if not np.all(chi.max(axis=0)[delta < R2 - (u0_radius or 0.0)] >= 0):
        raise ValueError("covering does not reach every sample")

    # ---- N from the discrete Laplacian of 3 chi_j on the grid, M from max |z|^2
    h = model.grid_h
    lap_min = 0.0
    for pt in covering:
        c = pt.chi(G)
        lap = (c[1:-1, 2:] + c[1:-1, :-2] + c[2:, 1:-1] + c[:-2, 1:-1] - 4 * c[1:-1, 1:-1]) / (h * h)
        lap_min = min(lap_min, float((3 * lap).min()))
    N = 1.1 * max(0.0, -lap_min) / 4.0
    if N == 0.0:
        N = 1e-3
    r2max = float(np.max(np.abs(Z) ** 2))
    M = r2max + 1.0
    quad = N * (np.abs(Z) ** 2 - M)

    # ---- U_0 and the constant a: tau(a) just below N (M - max|z|^2)
    s_inner = min(pt.s_inner for pt in covering)
    r0 = u0_radius or min(R2 * 0.999, s_inner / math.cos(math.pi / len(covering)) * 1.01)
    covered = np.max([pt.s(Z) >= pt.s_inner for pt in covering], axis=0)
    if not np.all(covered | (np.abs(Z) < r0)):
        raise ValueError("the inner patches do not cover the complement of U_0")
    tau_a = 0.9 * N * (M - r2max)
    a = tau_inverse(table, tau_a)
    sup_rho_u0 = float(envelope_eval(p, -(R2 - r0))[1])
    if not sup_rho_u0 < a:
        raise ValueError(f"sup of rho on U_0 ({sup_rho_u0!r}) is not below a = {a!r}")
    base = tau_a + quad

    def u_eps(eps):
        taus = [tau_eval(table, r - eps) for r in rho]
        branches = [np.where(chi[j] > 0, taus[j] + 3 * chi[j] - 3 + quad, -np.inf) for j in range(len(rho))]
        return np.maximum(base, np.max(branches, axis=0)), taus, branches

    schedule = [-x for x in a_vals] if epsilon_schedule is None else list(epsilon_schedule)
    c1 = c2 = -math.inf
    overlap = 0.0
    junction = 0
    for eps in schedule:
        u, taus, branches = u_eps(eps)
        ref = tau_eval(table, psi - eps)
        c1 = max(c1, float(np.max(ref - u)))
        c2 = max(c2, float(np.max(u - ref)))
        for j in range(len(rho)):
            for k in range(j + 1, len(rho)):
                both = (chi[j] > 0) & (chi[k] > 0)
                if both.any():
                    overlap = max(overlap, float(np.max(np.abs(taus[j][both] - taus[k][both]))))
            # near the edge of supp chi_j some fully-on patch must dominate
            edge = (chi[j] > 0) & (chi[j] < 0.05)
            for k in range(len(rho)):
                if k != j:
                    on = edge & (chi[k] >= 1.0)
                    junction += int(np.count_nonzero(branches[j][on] >= branches[k][on]))
    c1, c2 = max(c1, 0.0), max(c2, 0.0)

    # ---- l, c3 and kappa_nu on the shells Omega_nu = {delta > -alpha_{2 nu}}
    if l is None:
        l = 1
        while (2 * l - 1) / 2 <= c1 + c2:
            l += 1
    if (2 * l - 1) / 2 <= c1 + c2:
        raise ValueError(f"l = {l} does not satisfy (2l-1)/2 > c1 + c2 = {c1 + c2}")
    nus = [nu for nu in range(1, n) if 2 * nu + 2 * l <= n]
    if not nus:
        raise ValueError(f"table of length {n} too short for l = {l}; no nu with 2nu + 2l <= n")
    c3 = ((2 * l - 1) / 2 - c1 - c2) / (2 * l + 1 + c1)

    kappa, kappa_low = [], []
    sandwich_ok = True
    for nu in nus:
        m = 2 * nu + 2 * l
        eps = -a_vals[m - 1]
        u, _, _ = u_eps(eps)
        ref = tau_eval(table, psi - eps)
        sandwich_ok &= bool(np.all((ref - c1 - 1e-12 <= u) & (u <= ref + c2 + 1e-12)))
        w = u / table.tau_breaks[m - 1][1]
        on_shell = lev == 2 * nu
        inner = delta <= -alphas[m - 1]
        sup_b = float(np.max(w[on_shell]))
        inf_o = float(np.min(w[inner]))
        kappa.append((inf_o - sup_b) / (1 - sup_b) if sup_b < 1 else -math.inf)
        t = lambda x: float(tau_eval(table, x))
        kappa_low.append((t(a_vals[m - 2]) - t(a_vals[2 * nu - 1]) - c1 - c2)
                         / (t(a_vals[m - 1]) - t(a_vals[2 * nu - 2]) + c1))

    # ---- decay of M_nu = sup over {delta <= -alpha_{2 nu}} of -rho
    max_nu = n // 2
    M_series = [float(_neg_rho_from_delta(R1, R2, -alphas[2 * nu - 1])) for nu in range(1, max_nu + 1)]
    contraction = all(M_series[nu - 1 + l] <= (1 - c3) * M_series[nu - 1] for nu in nus)
    max_principle = all(M_series[nu - 1 + l] <= (1 - kappa[i]) * M_series[nu - 1] for i, nu in enumerate(nus))

    # ---- final bound -rho <= K exp(-eps0 lambda(delta)) on the boundary layer
    eps0 = math.log(1.0 / (1.0 - c3)) / l
    M0 = float(_neg_rho_from_delta(R1, R2, -alphas[0]))
    K = M0 * (1.0 - c3) ** (-(l + 1) / l)
    layer = (delta > 0) & (delta <= -alphas[0]) & (delta >= -alphas[-1])
    lam = np.asarray(lambda_of(table, delta[layer]))
    neg_rho = _neg_rho_from_delta(R1, R2, delta[layer])
    with np.errstate(under="ignore"):
        ratio = float(np.max(neg_rho / (K * np.exp(-eps0 * lam))))

    # ---- discrete subharmonicity of u_eps on the interior grid, single-branch stencils
    sub_min = _interior_subharmonicity(p, table, model, covering, N, M, tau_a, -a_vals[-1])

    checks = {
        "tau_increments": bool(np.all((table.increments >= 0.5 - 1e-12) & (table.increments <= 1))),
        "overlap_below_3": overlap < 3,
        "sandwich": sandwich_ok,
        "junction_dominance": junction == 0,
        "kappa_above_c3": all(k >= c3 for k in kappa),
        "kappa_above_analytic": all(k >= kl - 1e-12 for k, kl in zip(kappa, kappa_low)),
        "c3_positive": c3 > 0,
        "contraction": contraction,
        "final_bound": ratio <= 1.0,
        "subharmonic_interior": sub_min >= -1e-9,
    }
    return PatchReport(table.c0, c1, c2, c3, l, eps0, K, N, M, tau_a, a, kappa, kappa_low, M_series,
                       overlap, junction, sub_min, ratio, int(Z.size), checks, max_principle)


def _interior_subharmonicity(p, table, model, covering, N, M, tau_a, eps) -> float:
    """Minimum five-point Laplacian of u_eps where one branch wins on the whole stencil."""
    G = model.grid()
    h = model.grid_h
    delta = model.R2 - np.abs(G)
    inside = delta >= -table.alphas[0]
    dd = np.where(inside, delta, 1.0)
    psi, phi = _envelopes_at(p, dd)
    quad = N * (np.abs(G) ** 2 - M)
    branches = [tau_a + quad]
    for pt in covering:
        chi = pt.chi(G)
        t = tau_eval(table, np.minimum(_rho_mix(pt.theta, psi, phi) - eps, table.a_values[-1]))
        branches.append(np.where(chi > 0, t + 3 * chi - 3 + quad, -np.inf))
    B = np.array(branches)
    win = np.argmax(B, axis=0)
    u = np.max(B, axis=0)
    c = (slice(1, -1), slice(1, -1))
    same = np.ones(win[c].shape, dtype=bool)
    ok = inside[c].copy()
    for sl in ((slice(1, -1), slice(2, None)), (slice(1, -1), slice(None, -2)),
               (slice(2, None), slice(1, -1)), (slice(None, -2), slice(1, -1))):
        same &= win[sl] == win[c]
        ok &= inside[sl]
    lap = (u[1:-1, 2:] + u[1:-1, :-2] + u[2:, 1:-1] + u[:-2, 1:-1] - 4 * u[c]) / (h * h)
    sel = ok & same
    return float(lap[sel].min()) if sel.any() else math.inf
