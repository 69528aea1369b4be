"""Scoring extremes: relative quantile error, SEDI and latitude-weighted RMSE."""

import numpy as np

from extremecast import metrics
from extremecast.errors import DegenerateRateError

rng = np.random.default_rng(0)
lat = np.linspace(90, -90, 32)
target = rng.gamma(2.0, 2.0, size=(32, 64))
damped = 0.8 * target + 0.2 * target.mean() + rng.normal(scale=0.5, size=target.shape)

print(f"RQE(target, target) = {metrics.rqe(target, target):+.4f}")
print(f"RQE(damped, target) = {metrics.rqe(damped, target):+.4f}  (negative: tails underestimated)")
for p, e in zip(metrics.DEFAULT_QUANTILES, metrics.rqe_per_quantile(damped, target)):
    print(f"   p = {p:<7} {e:+.4f}")

thr = metrics.quantile(target, 0.9)
counts = metrics.contingency(damped, target, thr)
print(f"\n90th percentile events: {counts}")
print(f"SEDI = {metrics.sedi(counts):.4f}")
print(f"SEDI(H=0.8, F=0.1) = {metrics.sedi_from_rates(0.8, 0.1):.4f}")
try:
    metrics.sedi(metrics.contingency(target, target, thr))
except DegenerateRateError as exc:
    print(f"perfect forecast: {exc}")
    print(f"    clamped: {metrics.sedi(metrics.contingency(target, target, thr), clamp=True):.4f}")

print(f"\nlatitude-weighted RMSE = {metrics.weighted_rmse(damped, target, lat):.4f}")

months = np.repeat(np.arange(1, 13), 10)
series = rng.normal(size=(120, 4, 4)) + months[:, None, None]
th = metrics.build_thresholds(series, months)
print(f"95th percentile threshold at pixel (0, 0): Jan {th.get(1, 0.95)[0, 0]:.3f}, Jul {th.get(7, 0.95)[0, 0]:.3f}")
