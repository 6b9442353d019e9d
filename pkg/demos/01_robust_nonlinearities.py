"""
Moment-matched nonlinearities
=============================

A noisy preactivation ``x ~ N(mu, 1/lambda_s)`` pushed through a sigmoid
or tanh has a mean that the cell approximates in closed form. Here we
compare that approximation with Gauss-Hermite quadrature.
"""

import math

import numpy as np

from crae.rrn import kappa, robust_sigmoid_mean, robust_tanh_mean, tanh_scale

x, w = np.polynomial.hermite.hermgauss(64)


def expect(f, mu, lam):
    z = mu + math.sqrt(2.0 / lam) * x
    return float(w @ f(z)) / math.sqrt(math.pi)


###############################################################################
# Lower precision flattens the curve: the slope shrink factors fall with
# ``lambda_s`` and reach 1 (sigmoid) and 2 (tanh) as the noise vanishes.
for lam in (0.5, 1.0, 10.0, 100.0, math.inf):
    print(f"lambda_s={lam:>6}: kappa={kappa(lam):.4f}  tanh scale={tanh_scale(lam):.4f}")

###############################################################################
# Worst-case error of the closed forms on a grid of means.
mus = np.linspace(-3, 3, 25)
for lam in (0.5, 1.0, 10.0, 100.0):
    e_sig = max(abs(robust_sigmoid_mean(m, lam) - expect(lambda z: 1 / (1 + np.exp(-z)), m, lam)) for m in mus)
    e_tanh = max(abs(robust_tanh_mean(m, lam) - expect(np.tanh, m, lam)) for m in mus)
    print(f"lambda_s={lam:>5}: max |sigmoid err|={e_sig:.4f}  max |tanh err|={e_tanh:.4f}")
