"""Beta-pooling of variable-length state sequences.

A sequence of ``2T`` vectors is pooled with weights equal to the mass a
Beta(a, b) distribution puts on each of ``2T`` equal sub-intervals of
[0, 1]. The regularized incomplete beta function needed for those masses
is evaluated here by continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_FPMIN = 1e-300
_LOG_TINY = -745.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class ConvergenceError(ArithmeticError):
    """The continued fraction did not converge within the iteration budget."""


@dataclass
class BetaPoolConfig:
    a: float = 9.8e7
    b: float = 1e8
    learn_a: bool = False

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("beta-pooling shapes must be positive")
        if self.learn_a and self.b != 1:
            raise ValueError("learn_a requires b == 1")


def _stirling_tail(z: float) -> float:
    """lgamma(z) minus its leading Stirling terms."""
    if z < 10.0:
        return math.lgamma(z) - ((z - 0.5) * math.log(z) - z + _HALF_LOG_2PI)
    zi = 1.0 / z
    zi2 = zi * zi
    return zi * (1 / 12 - zi2 * (1 / 360 - zi2 * (1 / 1260 - zi2 / 1680)))


def _log_ratio(num: float, den: float) -> float:
    """log(num/den), accurate when num and den are close."""
    r = (num - den) / den
    return math.log1p(r) if abs(r) < 0.5 else math.log(num) - math.log(den)


def _log_prefactor(x: float, a: float, b: float) -> float:
    """log(x^a (1-x)^b / B(a, b)) without forming lgamma of huge arguments.

    Centering on the mean ``mu = a/(a+b)`` cancels the O(a log a) terms
    analytically, so shapes around 1e8 keep full relative precision.
    """
    mu = a / (a + b)
    core = a * _log_ratio(x, mu) + b * _log_ratio(1.0 - x, 1.0 - mu)
    norm = 0.5 * math.log(a * b / (a + b)) - _HALF_LOG_2PI
    return core + norm + _stirling_tail(a + b) - _stirling_tail(a) - _stirling_tail(b)


def _betacf(x: float, a: float, b: float, tol: float, max_iter: int) -> float:
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ConvergenceError(f"I_x(a, b) failed to converge: x={x}, a={a}, b={b}, max_iter={max_iter}")


def reg_inc_beta(x: float, a: float, b: float, tol: float = 1e-12, max_iter: int = 300) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``.

    Uses the continued fraction directly for ``x < (a+1)/(a+b+2)`` and the
    reflection ``1 - I_{1-x}(b, a)`` otherwise. Values whose prefactor
    underflows double precision are returned as exactly 0 or 1.
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return float(x)
    if b == 1.0:
        return x**a
    if a == 1.0:
        return -math.expm1(b * math.log1p(-x))
    flip = x > (a + 1.0) / (a + b + 2.0)
    if flip:
        x, a, b = 1.0 - x, b, a
    logf = _log_prefactor(x, a, b)
    if logf < _LOG_TINY:
        val = 0.0
    else:
        val = math.exp(logf) * _betacf(x, a, b, tol, max_iter) / a
    return 1.0 - val if flip else val


def _default_budget(a: float, b: float) -> int:
    # the fraction needs O(sqrt(a + b)) terms right at the mode of huge shapes
    return max(300, int(4 * math.sqrt(a + b)))


@lru_cache(maxsize=4096)
def _pool_weights_cached(T: int, a: float, b: float) -> np.ndarray:
    n = 2 * T
    budget = _default_budget(a, b)
    cdf = np.array([reg_inc_beta(t / n, a, b, max_iter=budget) for t in range(n + 1)])
    w = np.diff(cdf)
    w.setflags(write=False)
    return w


def pool_weights(T: int, a: float, b: float) -> np.ndarray:
    """Beta-CDF increments over ``2T`` equal bins of [0, 1]."""
    if T < 1:
        raise ValueError("sequence length must be >= 1")
    return _pool_weights_cached(int(T), float(a), float(b))


def pooled_states(enc_h, enc_s, dec_h, dec_s) -> np.ndarray:
    """Stack encoder then decoder ``(h; s)`` as the ``2T`` rows to pool.

    The decompressed initial decoder state is not part of the sequence.
    """
    enc = np.concatenate([np.asarray(enc_h), np.asarray(enc_s)], axis=1)
    dec = np.concatenate([np.asarray(dec_h), np.asarray(dec_s)], axis=1)
    return np.concatenate([enc, dec], axis=0)


def beta_pool(states: np.ndarray, a: float, b: float) -> np.ndarray:
    """Weighted sum of the rows of ``states`` (2T, 2K_W)."""
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    if n == 0 or n % 2:
        raise ValueError(f"expected an even, positive number of states, got {n}")
    return pool_weights(n // 2, a, b) @ states


def power_weight_grad(T: int, a: float) -> np.ndarray:
    """d w_t / d a for b = 1, where w_t = (t/2T)^a - ((t-1)/2T)^a."""
    x = np.arange(2 * T + 1) / (2 * T)
    with np.errstate(divide="ignore"):
        g = np.where(x > 0, x**a * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return np.diff(g)


def grad_loglik_wrt_a(states_list, v_list, W_1, b_1, lambda_v: float, a: float, b: float = 1.0) -> float:
    """Gradient of ``-(lambda_v/2) sum_j ||v_j - tanh(W_1 pool_j + b_1)||^2`` in ``a``.

    Only the ``b = 1`` case is supported, where the pooling weights are
    differences of powers ``x^a``.
    """
    if b != 1:
        raise ValueError("gradient in a is only available for b == 1")
    total = 0.0
    for states, v in zip(states_list, v_list):
        states = np.asarray(states, dtype=float)
        T = states.shape[0] // 2
        gamma = np.tanh(W_1 @ beta_pool(states, a, 1.0) + b_1)
        dpool = W_1.T @ ((gamma - v) * (1.0 - gamma**2))
        total += -lambda_v * float(power_weight_grad(T, a) @ (states @ dpool))
    return total
