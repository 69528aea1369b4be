"""Gumbel max/min distributions and the maximum likelihood objectives they induce.

For a block maximum ``Y_M`` with Gumbel(location, scale) law, the negative
log likelihood as a function of the location estimate is::

    obj_max(mu) = (Y_M - mu)/s + exp(-(Y_M - mu)/s) + log(s)

It is strictly convex with its minimum ``1 + log(s)`` at ``mu = Y_M`` but it
is not symmetric around that point: underestimating the maximum costs less
than overestimating it by the same amount. ``obj_min`` is the mirror image
for block minima.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import ConfigError, DomainError, SaturationWarning

EXP_CLAMP = 700.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Kind(enum.Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError("normal parameters must be finite")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class GumbelParams:
    location: float
    scale: float
    kind: Kind = Kind.MAX

    def __post_init__(self):
        if not (math.isfinite(self.location) and math.isfinite(self.scale)):
            raise DomainError("Gumbel parameters must be finite")
        if self.scale <= 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "kind", Kind(self.kind))


@dataclass(frozen=True)
class BlockSampleConfig:
    n_blocks: int
    block_size: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n_blocks) < 1 or int(self.block_size) < 1:
            raise ConfigError("n_blocks and block_size must both be >= 1")


def _as_finite(x, name):
    a = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} must be finite")
    return a


def _check_scale(scale):
    s = _as_finite(scale, "scale")
    if np.any(s <= 0):
        raise DomainError("scale must be positive")
    return s


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def _exp(z):
    """``exp`` with the exponent magnitude clamped at ``EXP_CLAMP``."""
    if np.any(np.abs(z) > EXP_CLAMP):
        warnings.warn(
            f"exponent magnitude exceeded {EXP_CLAMP}; result saturated",
            SaturationWarning,
            stacklevel=3,
        )
        z = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
    return np.exp(z)


def normal_nll(y, params):
    """Negative log likelihood of ``y`` under N(mu, sigma^2)."""
    y = _as_finite(y, "y")
    r = (params.mu - y) / params.sigma
    return _scalar(0.5 * r * r + math.log(params.sigma) + _LOG_SQRT_2PI)


def gumbel_pdf(y, params):
    """Density of the Gumbel maximum (``Kind.MAX``) or minimum (``Kind.MIN``) law."""
    y = _as_finite(y, "y")
    z = (y - params.location) / params.scale
    if params.kind is Kind.MIN:
        z = -z
    # exp(-z - exp(-z)) underflows cleanly to 0 for large |z|
    with np.errstate(over="ignore"):
        dens = np.exp(-z - np.exp(-z)) / params.scale
    return _scalar(np.where(np.isfinite(dens), dens, 0.0))


def gumbel_cdf(y, params):
    y = _as_finite(y, "y")
    z = (y - params.location) / params.scale
    with np.errstate(over="ignore"):
        if params.kind is Kind.MAX:
            out = np.exp(-np.exp(-z))
        else:
            out = -np.expm1(-np.exp(z))
    return _scalar(out)


def gumbel_sample(params, size, seed):
    """Draw Gumbel variates by inverting the CDF of uniform draws on (0, 1)."""
    rng = stream(seed)
    u = rng.random(size)
    # Generator.random is on [0, 1); nudge away from 0 so log(-log u) is finite
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    if params.kind is Kind.MAX:
        return params.location - params.scale * np.log(-np.log(u))
    return params.location + params.scale * np.log(-np.log1p(-u))


def obj_max(mu_hat, y_max, scale):
    """Gumbel-max negative log likelihood as a function of the location estimate."""
    s = _check_scale(scale)
    x = (_as_finite(y_max, "y_max") - _as_finite(mu_hat, "mu_hat")) / s
    return _scalar(x + _exp(-x) + np.log(s))


def obj_min(mu_hat, y_min, scale):
    """Gumbel-min counterpart of :func:`obj_max`."""
    s = _check_scale(scale)
    x = (_as_finite(y_min, "y_min") - _as_finite(mu_hat, "mu_hat")) / s
    return _scalar(-x + _exp(x) + np.log(s))


def obj_max_grad(mu_hat, y_max, scale):
    """Derivative of :func:`obj_max` with respect to ``mu_hat``.

    Negative below ``y_max``, zero at it and positive above it.
    """
    s = _check_scale(scale)
    x = (_as_finite(y_max, "y_max") - _as_finite(mu_hat, "mu_hat")) / s
    return _scalar(np.expm1(-np.clip(x, -EXP_CLAMP, EXP_CLAMP)) / s)


def obj_max_hess(mu_hat, y_max, scale):
    s = _check_scale(scale)
    x = (_as_finite(y_max, "y_max") - _as_finite(mu_hat, "mu_hat")) / s
    return _scalar(_exp(-x) / (s * s))


def obj_min_grad(mu_hat, y_min, scale):
    s = _check_scale(scale)
    x = (_as_finite(y_min, "y_min") - _as_finite(mu_hat, "mu_hat")) / s
    return _scalar(-np.expm1(np.clip(x, -EXP_CLAMP, EXP_CLAMP)) / s)


def objective_minimum(scale):
    """Minimum value ``1 + log(scale)`` shared by both objectives."""
    return _scalar(1.0 + np.log(_check_scale(scale)))


def under_over_gap(delta, scale):
    """``obj_max(Y+delta) - obj_max(Y-delta)``, i.e. ``2 sinh(d) - 2 d`` with ``d = delta/scale``.

    Positive for every ``delta > 0``: overestimating the maximum is penalised
    more than underestimating it by the same margin.
    """
    d = np.asarray(delta, dtype=float) / _check_scale(scale)
    return _scalar(2.0 * np.sinh(d) - 2.0 * d)


def golden_section_minimize(f, a, b, tol=1e-10, max_iter=500):
    """Minimise a unimodal scalar function on ``[a, b]`` by golden-section search.

    Returns
    -------
    x : float
        Abscissa of the minimum.
    fx : float
        ``f(x)``.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc <= fd else d
    return x, f(x)


def sample_block_maxima(cfg):
    """Block maxima of standard normal draws.

    Block ``i`` draws ``cfg.block_size`` standard normal values from its own
    sub-stream keyed by ``(cfg.seed, i)`` and keeps the largest one, so the
    result does not depend on how blocks are scheduled.

    Returns
    -------
    numpy.ndarray
        Shape ``(cfg.n_blocks,)``.
    """
    n, size = int(cfg.n_blocks), int(cfg.block_size)
    out = np.empty(n)
    for i in range(n):
        out[i] = stream(cfg.seed, i).standard_normal(size).max()
    return out


def last_block_draws(cfg):
    """The raw normal draws of the final block (the ones a histogram of N shows)."""
    return stream(cfg.seed, int(cfg.n_blocks) - 1).standard_normal(int(cfg.block_size))
