"""Training-free booster that widens the value range of a forecast while keeping pixel ranks.

Each ``H x W`` slice of a forecast is perturbed ``m`` times with Gaussian
noise. The ``m * H * W`` pooled values are sorted and cut into ``H * W``
consecutive groups of ``m``; the lower median of group ``r`` replaces the
pixel whose rank in the original slice is ``r``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class BoosterConfig:
    """Ensemble size, noise amplitude and seed.

    ``noise_scale`` is either a scalar or an array broadcastable to the
    forecast being boosted (one amplitude per element).
    """

    sampling_nums: int = 50
    noise_scale: object = 0.1
    seed: int = 0

    def __post_init__(self):
        if int(self.sampling_nums) != self.sampling_nums or self.sampling_nums < 2:
            raise ConfigError(f"sampling_nums must be an integer >= 2, got {self.sampling_nums}")
        ns = np.asarray(self.noise_scale, dtype=float)
        if not np.all(np.isfinite(ns)) or np.any(ns < 0):
            raise ConfigError("noise_scale must be finite and >= 0")

    @property
    def k(self):
        """1-based order statistic taken from each group."""
        return int(0.5 * self.sampling_nums)


def sort_index(values):
    """Rank of every element in ascending order, ties broken by position.

    >>> sort_index([1.2, 1.5, 0.8, 0.9]).tolist()
    [2, 3, 0, 1]
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("sort_index expects a non-empty 1-D sequence")
    if not np.all(np.isfinite(v)):
        raise DomainError("sort_index requires finite values")
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(v.size)
    return ranks


def boost_slice(values, noise, k=None):
    """Boost one flattened slice given pre-scaled noise.

    Parameters
    ----------
    values : array_like, shape (L,)
        The flattened forecast slice.
    noise : array_like, shape (m, L)
        Additive perturbations, already multiplied by the noise scale.
    k : int, optional
        1-based order statistic within each group; defaults to ``floor(m/2)``.

    Returns
    -------
    numpy.ndarray, shape (L,)
    """
    values = np.asarray(values, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != values.size:
        raise ValueError(f"noise must have shape (m, {values.size}), got {noise.shape}")
    m = noise.shape[0]
    k = int(0.5 * m) if k is None else int(k)
    if not 1 <= k <= m:
        raise ConfigError(f"k must lie in [1, {m}], got {k}")
    ranks = sort_index(values)
    pool = np.sort((values[None, :] + noise).ravel())
    groups = pool.reshape(values.size, m)
    # groups come out of a global sort, so each row is already ordered
    mids = groups[:, k - 1]
    return mids[ranks]


def ex_booster(pred, cfg=None):
    """Boost every ``H x W`` slice of ``pred``.

    ``pred`` may have any number of leading dimensions (e.g. ``[B, C, H, W]``
    or ``[C, H, W]``); each trailing ``H x W`` slice is handled independently
    with noise drawn from its own sub-stream ``(cfg.seed, slice_index)``.
    """
    cfg = BoosterConfig() if cfg is None else cfg
    pred = np.asarray(pred, dtype=float)
    if pred.ndim < 2:
        raise ValueError("pred must have at least two dimensions (H, W)")
    if not np.all(np.isfinite(pred)):
        raise DomainError("pred must be finite")
    try:
        scale = np.broadcast_to(np.asarray(cfg.noise_scale, dtype=float), pred.shape)
    except ValueError:
        raise ValueError(
            f"noise_scale shape {np.shape(cfg.noise_scale)} does not match pred shape {pred.shape}"
        ) from None
    lead, (h, w) = pred.shape[:-2], pred.shape[-2:]
    n_slices = math.prod(lead)
    flat = pred.reshape(n_slices, h * w)
    flat_scale = scale.reshape(n_slices, h * w)
    m = int(cfg.sampling_nums)
    out = np.empty_like(flat)
    for i in range(n_slices):
        noise = stream(cfg.seed, i).standard_normal((m, h * w)) * flat_scale[i]
        out[i] = boost_slice(flat[i], noise, cfg.k)
    return out.reshape(pred.shape)
