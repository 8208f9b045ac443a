"""Directional Laplacian densities on the unit hypersphere.

The density family is axial: it depends on a point ``x`` only through
``(m.x)**2``, so ``x`` and ``-x`` are the same observation. The normalizing
constant makes the density integrate to one over a hemisphere (equivalently
to two over the full sphere), which is the natural measure for axial data.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

#: Upper end of the concentration search interval.
K_MAX = 1000.0

#: Above this concentration the integrand of ``bessel_like_integral`` is
#: squeezed against the interval ends and a clustering substitution is used.
_SPLIT_K = 200.0

# (m.x)**2 is kept at or below this inside gradients.
GRAD_CLAMP = 1.0 - 1e-12


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 512
    target_rel_error: float = 1e-10

    def __post_init__(self):
        if self.node_count < 64:
            raise ValueError("node_count must be >= 64")
        if not self.target_rel_error > 0:
            raise ValueError("target_rel_error must be positive")


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True)
class DldParams:
    """Mean axis, concentration and dimension of one DLD."""

    mean: np.ndarray
    concentration: float
    dimension: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1 or mean.size != self.dimension:
            raise ValueError("mean must be a vector of length dimension")
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if abs(np.linalg.norm(mean) - 1.0) > 1e-12:
            raise ValueError("mean must have unit norm")
        if not self.concentration >= 0:
            raise ValueError("concentration must be >= 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "concentration", float(self.concentration))


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    # map [-1, 1] -> [0, 1]
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _half_interval_nodes(k, n):
    """Nodes/weights for the integral over theta in [0, pi/2]."""
    u, w = _gauss_legendre(n)
    if k <= _SPLIT_K:
        return 0.5 * math.pi * u, 0.5 * math.pi * w
    # theta = (pi/2) u^2 clusters nodes near theta = 0, where the mass sits
    return 0.5 * math.pi * u * u, math.pi * u * w


def bessel_like_integral(D, k, quad=DEFAULT_QUADRATURE):
    """Evaluate ``I_D(k) = (1/pi) * int_0^pi exp(-k sin t) sin(t)**D dt``.

    The integrand is symmetric about ``pi/2``; the interval is halved and
    integrated with fixed-node Gauss-Legendre.

    Parameters
    ----------
    D : int
        Power of the sine, ``D >= 0``.
    k : float
        Concentration, ``k >= 0``.
    quad : QuadratureSpec, optional
    """
    return float(_bessel_like_integrals(np.atleast_1d(D), k, quad)[0])


def _bessel_like_integrals(Ds, k, quad=DEFAULT_QUADRATURE):
    if not k >= 0:
        raise ValueError(f"concentration must be >= 0, got {k}")
    Ds = np.asarray(Ds)
    if np.any(Ds < 0):
        raise ValueError("D must be >= 0")
    theta, w = _half_interval_nodes(k, quad.node_count)
    s = np.sin(theta)
    base = w * np.exp(-k * s)
    return (2.0 / math.pi) * (s[None, :] ** Ds[:, None] @ base)


def concentration_ratio(k, D, quad=DEFAULT_QUADRATURE):
    """``I_{D-1}(k) / I_{D-2}(k)``: the expected distance under DLD(k)."""
    num, den = _bessel_like_integrals([D - 1, D - 2], k, quad)
    return float(num / den)


def dld_norm_coeff(D, k, quad=DEFAULT_QUADRATURE):
    """Normalizing coefficient ``c_D(k)`` of the D-dimensional DLD."""
    return math.exp(log_dld_norm_coeff(D, k, quad))


def log_dld_norm_coeff(D, k, quad=DEFAULT_QUADRATURE):
    if D < 2:
        raise ValueError("dimension must be >= 2")
    return (math.lgamma(0.5 * (D - 1)) - 0.5 * (D + 1) * math.log(math.pi)
            - math.log(bessel_like_integral(D - 2, k, quad)))


def directional_distance(x, m):
    """``sqrt(1 - (m.x)^2)``; broadcasts over leading axes of ``x``.

    ``m`` is a unit vector (D,) or a matrix of unit columns (D, R). The value
    is taken as the norm of the part of ``x`` orthogonal to ``m``, which stays
    accurate for ``x`` close to the axis where ``1 - c^2`` would cancel.
    """
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    c = x @ m
    if m.ndim == 1:
        d = np.linalg.norm(x - c[..., None] * m, axis=-1)
    else:
        d = np.stack([np.linalg.norm(x - c[..., j, None] * m[:, j], axis=-1)
                      for j in range(m.shape[1])], axis=-1)
    return np.minimum(d, 1.0)


def importance_weight(x, m):
    return 0.5 * (1.0 - directional_distance(x, m))


def dld_pdf(x, p: DldParams):
    """Density of DLD ``p`` at unit vector(s) ``x`` (last axis = dimension)."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("dld_pdf expects unit vectors")
    c = dld_norm_coeff(p.dimension, p.concentration)
    return c * np.exp(-p.concentration * directional_distance(x, p.mean))


def solve_concentration(rhs, D, quad=DEFAULT_QUADRATURE, full_output=False):
    """Find ``k`` with ``I_{D-1}(k) / I_{D-2}(k) = rhs`` by bisection.

    The ratio decreases strictly from its value at zero towards 0, so
    ``rhs`` at or above ``ratio(0)`` gives ``k = 0`` and ``rhs`` at or below
    ``ratio(K_MAX)`` saturates at ``K_MAX``.

    With ``full_output=True`` returns ``(k, saturated)``.
    """
    if not 0.0 < rhs < 1.0:
        raise ValueError(f"rhs must lie in (0, 1), got {rhs}")

    def out(k, saturated=False):
        return (k, saturated) if full_output else k

    if rhs >= concentration_ratio(0.0, D, quad):
        return out(0.0)
    if rhs <= concentration_ratio(K_MAX, D, quad):
        return out(K_MAX, True)

    lo, hi = 0.0, K_MAX
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if concentration_ratio(mid, D, quad) > rhs:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return out(0.5 * (lo + hi))


def uniform_sphere(n, D, rng):
    g = rng.standard_normal((n, D))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_dld(p: DldParams, n, seed):
    """Draw ``n`` samples from a DLD by rejection from the uniform sphere.

    The envelope is the density at the mean, so a uniform proposal ``x`` is
    kept with probability ``exp(-k * D_l(x, m))``. Deterministic in ``seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, p.dimension))
    filled = 0
    while filled < n:
        # acceptance is roughly c_D(k) / c_D(0); size batches accordingly
        accept_rate = max(dld_norm_coeff(p.dimension, 0.0)
                          / dld_norm_coeff(p.dimension, p.concentration), 1e-6)
        batch = int(min(max(2 * (n - filled) / accept_rate, 1024), 4_000_000))
        x = uniform_sphere(batch, p.dimension, rng)
        u = rng.random(batch)
        keep = x[u < np.exp(-p.concentration * directional_distance(x, p.mean))]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out
