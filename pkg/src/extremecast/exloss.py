"""Equal-area rescaling of the Gumbel objective and the extreme-aware squared loss.

The objective ``obj_max`` is rescaled separately on each side of its minimum,
by factors ``s1`` (underestimation side) and ``s2`` (overestimation side),
until the areas under ``obj_max - min`` over a window of half-width
``epsilon`` agree. The resulting weight ``(s2/s1)^2`` is applied to the
squared error wherever the target is extreme and the prediction falls short
of it.

The published weight is the constant 100/81, which is what
:class:`ScalingConfig` defaults to. :func:`solve_scaling` reproduces the
derivation so other ``(epsilon, s2)`` choices can be explored; note that
with ``epsilon = 0.1`` and ``s2 = 1`` the equal-area root is
``s1 ~ 0.9833``, not ``0.9``. ``s1 = 0.9`` corresponds to ``epsilon ~ 0.601``
(see :func:`epsilon_for_ratio`).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, SolverError

DEFAULT_UNDER_WEIGHT = 100.0 / 81.0
S1_BRACKET = (0.05, 20.0)


def _exp_tail3(x):
    """``exp(x) - 1 - x - x**2/2`` without cancellation for small ``|x|``."""
    x = float(x)
    if abs(x) < 0.5:
        term = x * x * x / 6.0
        total = term
        k = 3
        while abs(term) > 1e-17 * abs(total):
            k += 1
            term *= x / k
            total += term
        return total
    return math.expm1(x) - x - 0.5 * x * x


def _positive(**kwargs):
    for name, v in kwargs.items():
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be positive and finite, got {v}")


def area_r1(epsilon, s1, scale=1.0):
    """Area under the shifted objective on the underestimation side.

    ``scale * (t**2/2 - t - exp(-t) + 1)`` with ``t = epsilon/s1``.
    """
    _positive(epsilon=epsilon, s1=s1, scale=scale)
    return scale * -_exp_tail3(-epsilon / s1)


def area_r2(epsilon, s2, scale=1.0):
    """Area under the shifted objective on the overestimation side.

    ``scale * (-t**2/2 - t + exp(t) - 1)`` with ``t = epsilon/s2``.
    """
    _positive(epsilon=epsilon, s2=s2, scale=scale)
    return scale * _exp_tail3(epsilon / s2)


def equal_area_residual(epsilon, s1, s2):
    """Left side of the equal-area equation (scale divided out); zero at the root."""
    return area_r1(epsilon, s1) - area_r2(epsilon, s2)


@dataclass(frozen=True)
class ScalingSolution:
    epsilon: float
    s1: float
    s2: float
    residual: float
    area_r1: float
    area_r2: float
    scale: float = 1.0

    @property
    def under_weight(self):
        """Squared-error weight implied by the solution, ``(s2/s1)**2``."""
        return (self.s2 / self.s1) ** 2

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "s1": self.s1,
            "s2": self.s2,
            "scale": self.scale,
            "residual": self.residual,
            "area_r1": self.area_r1,
            "area_r2": self.area_r2,
            "under_weight": self.under_weight,
        }


def solve_scaling(epsilon, s2, scale=1.0, rtol=4 * np.finfo(float).eps):
    """Find ``s1`` so that both rescaled sides enclose equal area.

    ``epsilon``, ``s2`` and the returned ``s1`` are in the same units as
    ``scale`` (pass ``scale=1`` to work in multiples of it). The root is
    bracketed in ``[0.05*s2, 20*s2]`` and located with Brent's method.

    Raises
    ------
    SolverError
        If the residual has no sign change over the bracket.
    """
    _positive(epsilon=epsilon, s2=s2, scale=scale)
    # areas depend on epsilon/s only, so solve in units of scale
    e, b = epsilon / scale, s2 / scale
    lo, hi = S1_BRACKET[0] * b, S1_BRACKET[1] * b
    flo, fhi = equal_area_residual(e, lo, b), equal_area_residual(e, hi, b)
    if not flo * fhi < 0:
        raise SolverError(
            f"no sign change of equal-area residual on s1 in [{lo:g}, {hi:g}]: "
            f"f(lo)={flo:.3e}, f(hi)={fhi:.3e}",
            bracket=(lo * scale, hi * scale),
            values=(flo, fhi),
        )
    s1 = optimize.brentq(
        lambda x: equal_area_residual(e, x, b), lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps)
    )
    a1, a2 = area_r1(e, s1), area_r2(e, b)
    return ScalingSolution(
        epsilon=epsilon,
        s1=s1 * scale,
        s2=s2,
        residual=a1 - a2,
        area_r1=a1 * scale,
        area_r2=a2 * scale,
        scale=scale,
    )


def epsilon_for_ratio(s1, s2=1.0, bracket=(1e-3, 50.0)):
    """Window half-width at which ``s1`` solves the equal-area equation for the given ``s2``.

    Only defined for ``s1 < s2``: for small windows both areas behave like
    ``t**3/6`` and the underestimation side must be stretched to catch up.
    """
    _positive(s1=s1, s2=s2)
    f = lambda e: equal_area_residual(e, s1, s2)
    grid = np.geomspace(bracket[0], bracket[1], 400)
    vals = [f(e) for e in grid]
    for k in range(len(grid) - 1):
        if vals[k] * vals[k + 1] < 0:
            return optimize.brentq(f, grid[k], grid[k + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps)
    raise SolverError(
        f"no epsilon in [{bracket[0]:g}, {bracket[1]:g}] makes s1={s1:g} an equal-area root for s2={s2:g}",
        bracket=bracket,
        values=(vals[0], vals[-1]),
    )


def scaling_sweep(epsilons, s2=1.0, scale=1.0):
    """``[(epsilon, s1), ...]`` over a grid of window half-widths."""
    return [(float(e), solve_scaling(float(e), s2, scale).s1) for e in epsilons]


def _broadcast_threshold(q, shape, name):
    q = np.asarray(q, dtype=float)
    if q.ndim == 1 and len(shape) == 3 and q.shape[0] == shape[0]:
        # one scalar per channel of a C x H x W field
        q = q[:, None, None]
    try:
        return np.broadcast_to(q, shape)
    except ValueError:
        raise ValueError(f"{name} with shape {q.shape} does not broadcast to field shape {shape}") from None


@dataclass(frozen=True)
class ExtremeThresholds:
    """Lower and upper extreme thresholds (e.g. 10th and 90th percentiles).

    Each may be a scalar, a per-channel vector, or a full per-pixel field.
    """

    q_low: object
    q_high: object

    def __post_init__(self):
        lo, hi = np.asarray(self.q_low, dtype=float), np.asarray(self.q_high, dtype=float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("thresholds must be finite")
        try:
            ok = np.all(lo <= hi)
        except ValueError:
            raise ValueError("q_low and q_high shapes are incompatible") from None
        if not ok:
            raise DomainError("q_low must not exceed q_high")

    @classmethod
    def from_sample(cls, target, low=0.1, high=0.9, axis=None):
        """Thresholds at the ``low`` and ``high`` quantiles of ``target`` (linear interpolation)."""
        target = np.asarray(target, dtype=float)
        return cls(np.quantile(target, low, axis=axis), np.quantile(target, high, axis=axis))

    def broadcast(self, shape):
        return (
            _broadcast_threshold(self.q_low, shape, "q_low"),
            _broadcast_threshold(self.q_high, shape, "q_high"),
        )


@dataclass(frozen=True)
class ScalingConfig:
    thresholds: ExtremeThresholds
    under_weight: float = DEFAULT_UNDER_WEIGHT

    def __post_init__(self):
        if not (math.isfinite(self.under_weight) and self.under_weight >= 1):
            raise DomainError(f"under_weight must be >= 1, got {self.under_weight}")

    @classmethod
    def from_solution(cls, solution, thresholds):
        return cls(thresholds=thresholds, under_weight=solution.under_weight)


def _pair(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(target))):
        raise DomainError("pred and target must be finite")
    return pred, target


def underestimation_mask(pred, target, thresholds):
    """True where the target is extreme and the prediction does not reach it.

    Comparisons are non-strict on the prediction side, so ``pred == target``
    counts as underestimation whenever the target is beyond a threshold.
    """
    pred, target = _pair(pred, target)
    lo, hi = thresholds.broadcast(target.shape)
    return ((pred >= target) & (target < lo)) | ((pred <= target) & (target > hi))


def scaling_field(pred, target, cfg):
    """Per-element weight: ``cfg.under_weight`` on underestimated extremes, 1 elsewhere."""
    mask = underestimation_mask(pred, target, cfg.thresholds)
    return np.where(mask, cfg.under_weight, 1.0)


def mse(pred, target):
    pred, target = _pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def exloss(pred, target, cfg):
    """Mean of ``(S * (pred - target))**2`` with ``S`` from :func:`scaling_field`."""
    pred, target = _pair(pred, target)
    s = scaling_field(pred, target, cfg)
    return float(np.mean((s * (pred - target)) ** 2))


def exloss_grad(pred, target, cfg):
    """Gradient of :func:`exloss` w.r.t. ``pred``, treating ``S`` as locally constant."""
    pred, target = _pair(pred, target)
    s = scaling_field(pred, target, cfg)
    return 2.0 * s * s * (pred - target) / pred.size


def combined_noise_loss(eps_pred, eps_true, cfg):
    """Plain MSE plus :func:`exloss`, as used on predicted diffusion noise."""
    return mse(eps_pred, eps_true) + exloss(eps_pred, eps_true, cfg)
