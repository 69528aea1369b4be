"""Deriving an underestimation weight from the equal-area condition.

Stretch the Gumbel objective by s1 on the undershoot side and by s2 on the
overshoot side, and ask for equal area under the (shifted) objective over a
window of half-width epsilon on each side. The ratio (s2/s1)^2 then weights
squared errors on underestimated extremes.

The library default is the constant 100/81, i.e. s1/s2 = 0.9. Solving the
condition at epsilon = 0.1 gives s1 ~ 0.983 instead; s1 = 0.9 needs a much
wider window, epsilon ~ 0.60. Both numbers are printed below.
"""

from extremecast import exloss

sol = exloss.solve_scaling(epsilon=0.1, s2=1.0)
print(f"epsilon = 0.1, s2 = 1: s1 = {sol.s1:.10f}, residual {sol.residual:.1e}")
print(f"    implied weight (s2/s1)^2 = {sol.under_weight:.5f}; default weight 100/81 = {100 / 81:.5f}")

eps = exloss.epsilon_for_ratio(0.9, 1.0)
print(f"s1 = 0.9 solves the condition at epsilon = {eps:.6f}")

print("\n epsilon      s1     weight")
for e, s1 in exloss.scaling_sweep([0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0]):
    print(f"{e:8.2f}  {s1:.6f}  {(1 / s1) ** 2:.5f}")

# the weight in action: a single underestimated extreme
cfg = exloss.ScalingConfig(exloss.ExtremeThresholds(q_low=0.0, q_high=4.0))
print(f"\nExloss(pred 4.5, target 5.0) = {exloss.exloss([4.5], [5.0], cfg):.4f} "
      f"vs MSE {exloss.mse([4.5], [5.0]):.4f}")
print(f"Exloss(pred 5.5, target 5.0) = {exloss.exloss([5.5], [5.0], cfg):.4f} (overshoot is not reweighted)")
