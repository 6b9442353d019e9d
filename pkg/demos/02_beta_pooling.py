"""
Beta-pooling weights
====================

Encoder and decoder states form a sequence of length ``2T``. Pooling
weights are the masses of a Beta(a, b) distribution on ``2T`` equal bins.
"""

import numpy as np

from crae.betapool import beta_pool, pool_weights, reg_inc_beta

np.set_printoptions(precision=4, suppress=True)

###############################################################################
# ``a = b = 1`` averages uniformly; skewed shapes emphasise one end.
T = 4
for a, b in [(1, 1), (2, 5), (5, 2), (0.5, 0.5)]:
    print(f"a={a}, b={b}:", pool_weights(T, a, b))

###############################################################################
# The default shapes are huge and nearly equal, so essentially all mass
# lands on the last encoder state and pooling reduces to that state.
for T in (3, 10, 90):
    w = pool_weights(T, 9.8e7, 1e8)
    print(f"T={T}: weight on the last encoder state = {w[T - 1]:.6f}")

###############################################################################
# The incomplete beta function stays accurate at these shapes.
print("I_0.4999(1e8, 1e8) =", reg_inc_beta(0.4999, 1e8, 1e8, max_iter=10**5))
print("I_0.5(1e8, 1e8)    =", reg_inc_beta(0.5, 1e8, 1e8, max_iter=10**5))

###############################################################################
# Pooling rows of a random state sequence.
states = np.random.default_rng(0).normal(size=(2 * T, 3))
print("uniform pool equals the mean:", np.allclose(beta_pool(states, 1, 1), states.mean(0)))
