"""Robust recurrent network (noise-aware LSTM) cell.

Hidden quantities are Gaussian with precision ``lambda_s``; learning
propagates only their means, pushing each mean through a moment-matched
sigmoid or tanh. ``lambda_s = inf`` recovers an ordinary LSTM.

Gate arrays are stacked along a leading axis in the order
``(candidate, input, forget, output)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

XI_SQ = math.pi / 8.0
RHO_1 = 4.0 - 2.0 * math.sqrt(2.0)
RHO_0 = -math.log(math.sqrt(2.0) + 1.0)

GATES = ("a", "i", "f", "o")
CAND, INPUT, FORGET, OUTPUT = range(4)


def _check_precision(lambda_s):
    if not lambda_s > 0:
        raise ValueError(f"noise precision must be positive, got {lambda_s}")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def kappa(lambda_s: float) -> float:
    """Slope shrinkage of a sigmoid convolved with N(0, 1/lambda_s)."""
    _check_precision(lambda_s)
    if math.isinf(lambda_s):
        return 1.0
    return (1.0 + XI_SQ / lambda_s) ** -0.5


def tanh_scale(lambda_s: float) -> float:
    """Scale ``c`` such that ``E[tanh(x)] ~= 2 sigmoid(c mu) - 1``."""
    _check_precision(lambda_s)
    if math.isinf(lambda_s):
        return 2.0
    return (0.25 + XI_SQ / lambda_s) ** -0.5


def robust_sigmoid_mean(mu, lambda_s: float):
    return _sigmoid(kappa(lambda_s) * np.asarray(mu, dtype=float))


def robust_sigmoid_var(mu, lambda_s: float, exact: bool = False):
    """Variance of sigmoid(x), x ~ N(mu, 1/lambda_s).

    By default this is the cheap ``1/lambda_s`` stand-in used during
    learning. ``exact=True`` returns the moment-matched expression
    built from the ``sigmoid(x)^2 ~= sigmoid(rho_1 (x + rho_0))`` fit.
    """
    _check_precision(lambda_s)
    mu = np.asarray(mu, dtype=float)
    if not exact:
        return np.zeros_like(mu) if math.isinf(lambda_s) else np.full_like(mu, 1.0 / lambda_s)
    inv = 0.0 if math.isinf(lambda_s) else 1.0 / lambda_s
    second = _sigmoid(RHO_1 * (mu + RHO_0) / math.sqrt(1.0 + XI_SQ * RHO_1**2 * inv))
    return second - robust_sigmoid_mean(mu, lambda_s) ** 2


def robust_tanh_mean(mu, lambda_s: float):
    return 2.0 * _sigmoid(tanh_scale(lambda_s) * np.asarray(mu, dtype=float)) - 1.0


def _sigmoid_grad(mu, lambda_s):
    k = kappa(lambda_s)
    g = _sigmoid(k * mu)
    return g, k * g * (1.0 - g)


def _tanh_grad(mu, lambda_s):
    c = tanh_scale(lambda_s)
    g = _sigmoid(c * mu)
    return 2.0 * g - 1.0, 2.0 * c * g * (1.0 - g)


@dataclass
class RrnParams:
    """Weights of one RRN.

    W_w : (K_W, S) embedding matrix, one column per word.
    Y   : (4, K_W, K_W) input weights.
    W   : (4, K_W, K_W) recurrent weights.
    b   : (4, K_W) biases.
    """

    W_w: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    b: np.ndarray
    lambda_s: float = 1e2
    sigma_candidate: bool = False

    def __post_init__(self):
        _check_precision(self.lambda_s)
        k = self.W_w.shape[0]
        if self.Y.shape != (4, k, k) or self.W.shape != (4, k, k) or self.b.shape != (4, k):
            raise ValueError("RRN parameter shapes inconsistent with embedding width")

    @property
    def dim(self) -> int:
        return self.W_w.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.W_w.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W_w": self.W_w, "Y": self.Y, "W": self.W, "b": self.b}

    @classmethod
    def init(cls, dim: int, vocab_size: int, rng: np.random.Generator, lambda_s: float = 1e2,
             sigma_candidate: bool = False, forget_bias: float = 1.0) -> "RrnParams":
        std = 1.0 / math.sqrt(dim)
        b = np.zeros((4, dim))
        b[FORGET] = forget_bias
        return cls(
            W_w=rng.normal(0.0, std, (dim, vocab_size)),
            Y=rng.normal(0.0, std, (4, dim, dim)),
            W=rng.normal(0.0, std, (4, dim, dim)),
            b=b,
            lambda_s=lambda_s,
            sigma_candidate=sigma_candidate,
        )

    @classmethod
    def zeros(cls, dim: int, vocab_size: int, lambda_s: float = 1e2, sigma_candidate: bool = False):
        return cls(np.zeros((dim, vocab_size)), np.zeros((4, dim, dim)), np.zeros((4, dim, dim)),
                   np.zeros((4, dim)), lambda_s, sigma_candidate)


@dataclass
class RrnState:
    """Means of one time step plus what backprop needs.

    ``pre`` holds the four preactivation means (candidate, input, forget,
    output), ``gates`` their squashed values; ``x``, ``h_prev`` and
    ``s_prev`` are the step's inputs.
    """

    x: np.ndarray
    h_prev: np.ndarray
    s_prev: np.ndarray
    pre: np.ndarray
    gates: np.ndarray
    dgates: np.ndarray
    s: np.ndarray
    tanh_s: np.ndarray
    dtanh_s: np.ndarray
    h: np.ndarray

    @property
    def a_bar(self):
        return self.pre[CAND]

    @property
    def h_i(self):
        return self.pre[INPUT]

    @property
    def h_f(self):
        return self.pre[FORGET]

    @property
    def h_o(self):
        return self.pre[OUTPUT]


@dataclass
class RrnGrads:
    Y: np.ndarray
    W: np.ndarray
    b: np.ndarray
    dx: np.ndarray  # (T, K_W) gradient w.r.t. each step's input embedding
    dh0: np.ndarray
    ds0: np.ndarray


def zero_state(dim: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(dim), np.zeros(dim)


def rrn_step(x: np.ndarray, h_prev: np.ndarray, s_prev: np.ndarray, params: RrnParams) -> RrnState:
    """Advance the cell one step on input embedding ``x``."""
    k = params.dim
    if x.shape != (k,) or h_prev.shape != (k,) or s_prev.shape != (k,):
        raise ValueError(f"expected vectors of length {k}")
    lam = params.lambda_s
    pre = params.Y @ x + params.W @ h_prev + params.b
    gates = np.empty_like(pre)
    dgates = np.empty_like(pre)
    gates[1:], dgates[1:] = _sigmoid_grad(pre[1:], lam)
    if params.sigma_candidate:
        gates[CAND], dgates[CAND] = _sigmoid_grad(pre[CAND], lam)
    else:
        gates[CAND], dgates[CAND] = _tanh_grad(pre[CAND], lam)
    s = gates[FORGET] * s_prev + gates[INPUT] * gates[CAND]
    tanh_s, dtanh_s = _tanh_grad(s, lam)
    h = tanh_s * gates[OUTPUT]
    return RrnState(x, h_prev, s_prev, pre, gates, dgates, s, tanh_s, dtanh_s, h)


def rrn_forward(xs: np.ndarray, params: RrnParams, h0=None, s0=None) -> list[RrnState]:
    """Run the cell over the rows of ``xs`` (T, K_W), from zeros by default."""
    h, s = zero_state(params.dim)
    if h0 is not None:
        h = h0
    if s0 is not None:
        s = s0
    states = []
    for x in xs:
        st = rrn_step(x, h, s, params)
        states.append(st)
        h, s = st.h, st.s
    return states


def rrn_backprop(states: list[RrnState], params: RrnParams, dh: np.ndarray, ds: np.ndarray | None = None) -> RrnGrads:
    """Backpropagation through time.

    ``dh`` and ``ds`` (T, K_W) are the gradients of the downstream loss
    with respect to each step's output and cell mean (excluding the
    recurrent paths, which are handled here).
    """
    T, k = len(states), params.dim
    if dh.shape != (T, k) or (ds is not None and ds.shape != (T, k)):
        raise ValueError("upstream gradient shape does not match the cached sequence")
    gY = np.zeros_like(params.Y)
    gW = np.zeros_like(params.W)
    gb = np.zeros_like(params.b)
    dx = np.zeros((T, k))
    h_next = np.zeros(k)
    s_next = np.zeros(k)
    for t in range(T - 1, -1, -1):
        st = states[t]
        g = st.gates
        dh_t = dh[t] + h_next
        ds_t = s_next + dh_t * g[OUTPUT] * st.dtanh_s
        if ds is not None:
            ds_t = ds_t + ds[t]
        dg = np.empty((4, k))
        dg[OUTPUT] = dh_t * st.tanh_s
        dg[FORGET] = ds_t * st.s_prev
        dg[INPUT] = ds_t * g[CAND]
        dg[CAND] = ds_t * g[INPUT]
        dz = dg * st.dgates
        gY += dz[:, :, None] * st.x[None, None, :]
        gW += dz[:, :, None] * st.h_prev[None, None, :]
        gb += dz
        dx[t] = np.einsum("gij,gi->j", params.Y, dz)
        h_next = np.einsum("gij,gi->j", params.W, dz)
        s_next = ds_t * g[FORGET]
    return RrnGrads(gY, gW, gb, dx, h_next, s_next)
