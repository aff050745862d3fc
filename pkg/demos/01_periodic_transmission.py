"""The periodic transmission rate: shape, periodicity, and its gradient.

The transmission rate is a truncated Fourier series with an unknown period.
This script evaluates it at the reference parameter point used throughout the
demos, confirms exact periodicity, and checks the analytic gradient against
central finite differences.
"""

import numpy as np

from sirlevy import REFERENCE_THETA, ThetaParams, beta_eval, beta_grad

theta = REFERENCE_THETA
print("reference parameters (period, base, cos, sin):", theta.to_vector())

t = np.linspace(0.0, 1.0, 11)
print("\nbeta on [0, 1]:")
for ti, bi in zip(t, beta_eval(t, theta)):
    print(f"  t={ti:4.1f}  beta={bi:.6f}")

shift = beta_eval(t + theta.period, theta) - beta_eval(t, theta)
print(f"\nmax |beta(t + period) - beta(t)| = {np.abs(shift).max():.2e}  (exact periodicity)")

# analytic gradient vs central finite differences at a generic time
t0 = 0.37
g = beta_grad(t0, theta)
vec = theta.to_vector()
fd = np.zeros(4)
for j in range(4):
    h = 1e-7
    vp, vm = vec.copy(), vec.copy()
    vp[j] += h
    vm[j] -= h
    fd[j] = (beta_eval(t0, ThetaParams.from_vector(vp)) - beta_eval(t0, ThetaParams.from_vector(vm))) / (2 * h)
print(f"\ngradient at t={t0}:")
print("  analytic:", np.round(g, 8))
print("  finite differences:", np.round(fd, 8))
print(f"  max abs difference: {np.abs(g - fd).max():.2e}")

# a nonnegativity rule of thumb: oscillation amplitude below the base rate
amp = np.hypot(theta.cos_coeffs[0], theta.sin_coeffs[0])
dense = beta_eval(np.linspace(0, 3, 30_001), theta)
print(f"\noscillation amplitude {amp:.4f} <= base {theta.base:.4f}; min beta on [0,3] = {dense.min():.4f}")
