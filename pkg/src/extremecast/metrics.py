"""Verification scores for extremes: relative quantile error, SEDI, latitude-weighted RMSE.

All quantiles use linear interpolation between order statistics (index
``h = (L - 1) p``), the same convention used for loss thresholds.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRateError, DomainError

DEFAULT_QUANTILES = (0.90, 0.95, 0.98, 0.99, 0.995, 0.999, 0.9999)
CLIMATOLOGY_LEVELS = (0.90, 0.95, 0.98, 0.995)


@dataclass(frozen=True)
class QuantileSet:
    probs: tuple = DEFAULT_QUANTILES

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty 1-D sequence")
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("quantile probabilities must lie in (0, 1)")
        if np.any(np.diff(p) <= 0):
            raise ValueError("quantile probabilities must be strictly increasing")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))


@dataclass(frozen=True)
class ContingencyCounts:
    hits: int
    misses: int
    false_alarms: int
    correct_negatives: int

    def __post_init__(self):
        if min(self.hits, self.misses, self.false_alarms, self.correct_negatives) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def total(self):
        return self.hits + self.misses + self.false_alarms + self.correct_negatives

    @property
    def hit_rate(self):
        n = self.hits + self.misses
        return self.hits / n if n else float("nan")

    @property
    def false_alarm_rate(self):
        n = self.false_alarms + self.correct_negatives
        return self.false_alarms / n if n else float("nan")


def quantile(values, p):
    """Linearly interpolated quantile of the flattened ``values``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("quantile of an empty sequence")
    if not np.all(np.isfinite(v)):
        raise DomainError("quantile requires finite values")
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError(f"p must lie in (0, 1), got {p}")
    q = np.quantile(v, p, method="linear")
    return float(q) if q.ndim == 0 else q


def _pair(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    return pred, target


def rqe_per_quantile(pred, target, q=None):
    """Signed relative error ``(Q_p(pred) - Q_p(target)) / |Q_p(target)|`` for each level.

    Negative values mean the forecast's upper tail is too weak.
    """
    q = QuantileSet() if q is None else q
    pred, target = _pair(pred, target)
    probs = np.asarray(q.probs)
    qp = quantile(pred, probs)
    qt = quantile(target, probs)
    tiny = np.abs(qt) < 1e-12
    if np.any(tiny):
        bad = ", ".join(f"{p:g}" for p in probs[tiny])
        raise DomainError(f"target quantile magnitude below 1e-12 at p = {bad}")
    return (qp - qt) / np.abs(qt)


def rqe(pred, target, q=None):
    """Relative quantile error averaged over the levels of ``q`` (flattened fields)."""
    return float(np.mean(rqe_per_quantile(pred, target, q)))


def contingency(pred, target, threshold):
    """2x2 counts for the event ``value > threshold``.

    ``threshold`` is a scalar or an array broadcastable to the fields.
    """
    pred, target = _pair(pred, target)
    thr = np.asarray(threshold, dtype=float)
    try:
        f = pred > thr
        o = target > thr
    except ValueError:
        raise ValueError(f"threshold shape {thr.shape} incompatible with fields {pred.shape}") from None
    f, o = np.broadcast_arrays(f, o)
    return ContingencyCounts(
        hits=int(np.sum(f & o)),
        misses=int(np.sum(~f & o)),
        false_alarms=int(np.sum(f & ~o)),
        correct_negatives=int(np.sum(~f & ~o)),
    )


def sedi_from_rates(hit_rate, false_alarm_rate):
    """Symmetric extremal dependence index from hit rate ``H`` and false alarm rate ``F``."""
    h, f = float(hit_rate), float(false_alarm_rate)
    if not (0 < h < 1 and 0 < f < 1):
        raise DegenerateRateError(
            f"SEDI undefined for hit_rate={h:g}, false_alarm_rate={f:g}; both must lie in (0, 1)",
            h,
            f,
        )
    lf, lh, l1f, l1h = math.log(f), math.log(h), math.log1p(-f), math.log1p(-h)
    return (lf - lh - l1f + l1h) / (lf + lh + l1f + l1h)


def sedi(counts, clamp=False):
    """SEDI of a contingency table.

    With ``clamp=True`` each rate is moved into ``[1/(2N), 1 - 1/(2N)]``,
    ``N`` being its own denominator, instead of raising on 0 or 1.
    """
    h, f = counts.hit_rate, counts.false_alarm_rate
    if clamp:
        n_obs = counts.hits + counts.misses
        n_non = counts.false_alarms + counts.correct_negatives
        if n_obs == 0 or n_non == 0:
            raise DegenerateRateError("SEDI undefined: no observed events or no non-events", h, f)
        h = min(max(h, 0.5 / n_obs), 1 - 0.5 / n_obs)
        f = min(max(f, 0.5 / n_non), 1 - 0.5 / n_non)
    return sedi_from_rates(h, f)


def latitude_weights(latitudes):
    """Cosine-latitude weights normalised to unit mean."""
    lat = np.asarray(latitudes, dtype=float)
    w = np.cos(np.deg2rad(lat))
    w = np.clip(w, 0.0, None)
    return w / w.mean()


def weighted_rmse(pred, target, latitudes):
    """Latitude-weighted RMSE over the last two axes ``(H, W)``.

    Returns one value per leading index (per channel for ``C x H x W``),
    or a float for a single ``H x W`` field.
    """
    pred, target = _pair(pred, target)
    if pred.ndim < 2:
        raise ValueError("fields must have at least two dimensions (H, W)")
    lat = np.asarray(latitudes, dtype=float)
    if lat.shape != (pred.shape[-2],):
        raise ValueError(f"expected {pred.shape[-2]} latitudes, got shape {lat.shape}")
    w = latitude_weights(lat)[:, None]
    out = np.sqrt(np.mean(w * (pred - target) ** 2, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


@dataclass
class ClimatologyThresholds:
    """Per-month quantile thresholds.

    ``values[month]`` has shape ``(len(levels),) + pixel_shape``.
    """

    levels: tuple
    values: dict = field(default_factory=dict)

    def get(self, month, level):
        idx = [i for i, lv in enumerate(self.levels) if math.isclose(lv, level, abs_tol=1e-12)]
        if not idx:
            raise KeyError(f"level {level} not among {self.levels}")
        return self.values[month][idx[0]]


def build_thresholds(series, months, levels=CLIMATOLOGY_LEVELS, min_samples=8):
    """Quantiles over time, separately for every calendar month present.

    Parameters
    ----------
    series : array_like, shape (T, ...)
        Time-indexed fields.
    months : array_like of int, shape (T,)
        Calendar month (1-12) of each time step.
    levels : sequence of float
        Quantile levels in (0, 1).
    """
    series = np.asarray(series, dtype=float)
    months = np.asarray(months)
    lv = np.asarray(levels, dtype=float)
    if lv.ndim != 1 or lv.size == 0 or np.any((lv <= 0) | (lv >= 1)):
        raise ValueError("levels must be a non-empty list of values in (0, 1)")
    if months.shape != (series.shape[0],):
        raise ValueError("months must have one entry per time step")
    uniq, counts = np.unique(months, return_counts=True)
    short = [int(m) for m, c in zip(uniq, counts) if c < min_samples]
    if short:
        raise ValueError(f"fewer than {min_samples} time steps for months {short}")
    out = ClimatologyThresholds(levels=tuple(float(x) for x in lv))
    for m in uniq:
        out.values[int(m)] = np.quantile(series[months == m], lv, axis=0, method="linear")
    return out
