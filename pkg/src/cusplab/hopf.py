"""Hopf-type lower bound for negative subharmonic functions near a cusp.

For a domain with the cusp condition, a negative subharmonic u satisfies
u(z) <= -c exp(-A / delta(z)^k) with k = 1/alpha - 1 and delta the boundary
distance.  Certification works on the planar slice through the cusp axis and
reports the largest c that holds on a sample, computed in log space because
exp(-A / delta^k) underflows long before delta is small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .conformal import hopf_constant
from .geometry import CuspParams, boundary_distance_planar, planar_cusp_contains

__all__ = ["hopf_bound", "log_hopf_bound", "HopfCertificate", "hopf_certify", "certificate_samples"]

_EXP_LIMIT = 700.0


def log_hopf_bound(params: CuspParams, delta):
    """log(-hopf_bound) = -A / delta^k, finite for every delta > 0."""
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("delta must be positive")
    with np.errstate(over="ignore"):
        out = -hopf_constant(params) / d**params.gap
    return float(out) if out.ndim == 0 else out


def hopf_bound(params: CuspParams, delta):
    """-exp(-A / delta^k); underflows to -0.0 once the exponent passes the double range."""
    lg = np.asarray(log_hopf_bound(params, delta))
    with np.errstate(under="ignore"):
        out = np.where(lg < -_EXP_LIMIT - 45, -0.0, -np.exp(np.maximum(lg, -_EXP_LIMIT - 45)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HopfCertificate:
    params: CuspParams
    R: float
    sample_count: int
    best_constant: float
    log_best_constant: float
    witness: complex
    witness_delta: float

    def __post_init__(self):
        if not self.best_constant > 0:
            raise ValueError("best_constant must be positive")

    def to_json(self) -> dict:
        return {
            "C": self.params.C,
            "alpha": self.params.alpha,
            "A": hopf_constant(self.params),
            "best_constant": self.best_constant,
            "log_best_constant": self.log_best_constant,
            "witness": [self.witness.real, self.witness.imag],
            "witness_delta": self.witness_delta,
            "samples": self.sample_count,
        }


def certificate_samples(params: CuspParams, R: float, n: int, seed: int, x_min: float = 0.0) -> np.ndarray:
    """Axis points plus scrambled-Sobol interior points of the truncated cusp.

    The first n points of a larger request are the same points, so doubling
    ``n`` only adds samples.  Points with x < ``x_min`` are skipped.
    """
    if n < 8:
        raise ValueError("need at least 8 samples")
    n_axis = max(4, n // 8)
    lo = max(x_min, 1e-3 * R)
    axis = R * np.exp(np.log(lo / R) * qmc.Sobol(1, scramble=True, seed=seed).random(
        2 ** int(math.ceil(math.log2(n_axis))))[:n_axis, 0]) * 0.999
    need = n - n_axis
    sob = qmc.Sobol(2, scramble=True, seed=seed + 1)
    ymax = R
    pts = []
    # draw in fixed power-of-two batches so the accepted prefix is seed-determined
    while sum(p.size for p in pts) < need:
        u = sob.random(1024)
        z = x_min + u[:, 0] * (R - x_min) + 1j * (2 * u[:, 1] - 1) * ymax
        pts.append(z[planar_cusp_contains(params, R, z)])
    return np.concatenate([axis + 0j, np.concatenate(pts)[:need]])


def hopf_certify(params: CuspParams, R: float, u, samples: int, seed: int = 42,
                 x_min: float = 0.0) -> HopfCertificate:
    """Largest c with u(z) <= c * hopf_bound(delta(z)) over the sample set.

    The minimising log ratio log(-u) + A/delta^k gives c; when both u and the
    bound are representable the ratio is taken directly so that scaling u by
    a power of two scales c exactly.
    """
    z = certificate_samples(params, R, samples, seed, x_min)
    vals = np.asarray(u(z), dtype=float)
    if vals.shape != z.shape:
        raise ValueError("u must return one value per sample")
    if np.any(~np.isfinite(vals)) or np.any(vals >= 0):
        bad = z[~(vals < 0)][0]
        raise ValueError(f"u must be negative on the samples; u({bad:.6g}) = {float(u(np.array([bad]))[0])}")
    delta = boundary_distance_planar(params, R, z)
    log_ratio = np.log(-vals) - np.asarray(log_hopf_bound(params, delta))
    i = int(np.argmin(log_ratio))
    lb = log_hopf_bound(params, delta[i])
    if lb > -_EXP_LIMIT:
        best = float(vals[i] / hopf_bound(params, delta[i]))
    else:
        best = math.exp(log_ratio[i]) if log_ratio[i] < _EXP_LIMIT else math.inf
    return HopfCertificate(params, R, int(z.size), best, float(log_ratio[i]), complex(z[i]), float(delta[i]))
