"""Denoising recurrent autoencoder.

An encoder RRN reads the wildcard-corrupted sequence, its final
``(h; s)`` is compressed to ``theta`` and decompressed into the initial
state of a decoder RRN, which runs without input words and emits one
softmax over the vocabulary per clean word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .betapool import pool_weights
from .rrn import RrnGrads, RrnParams, RrnState, rrn_backprop, rrn_forward, rrn_step


@dataclass
class BottleneckParams:
    W_1: np.ndarray  # (K, 2 K_W)
    b_1: np.ndarray  # (K,)
    W_2: np.ndarray  # (2 K_W, K)
    b_2: np.ndarray  # (2 K_W,)

    def arrays(self):
        return {"W_1": self.W_1, "b_1": self.b_1, "W_2": self.W_2, "b_2": self.b_2}


@dataclass
class OutputParams:
    W_g: np.ndarray  # (S, K_W)
    b_g: np.ndarray  # (S,)

    def arrays(self):
        return {"W_g": self.W_g, "b_g": self.b_g}


@dataclass
class DraeParams:
    """All network weights and biases."""

    encoder: RrnParams
    decoder: RrnParams
    bottleneck: BottleneckParams
    output: OutputParams
    feed_previous: bool = False

    @property
    def K_W(self) -> int:
        return self.encoder.dim

    @property
    def K(self) -> int:
        return self.bottleneck.W_1.shape[0]

    @property
    def S(self) -> int:
        return self.encoder.vocab_size

    def arrays(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of every trainable tensor (deterministic order)."""
        out = {}
        for prefix, group in (("enc", self.encoder), ("dec", self.decoder)):
            for k, v in group.arrays().items():
                out[f"{prefix}.{k}"] = v
        out.update(self.bottleneck.arrays())
        out.update(self.output.arrays())
        return out

    def sq_norm(self) -> float:
        return float(sum(np.vdot(v, v) for v in self.arrays().values()))

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays().items()}

    @classmethod
    def init(cls, S: int, K_W: int, K: int, rng: np.random.Generator, lambda_s: float = 1e2,
             sigma_candidate: bool = False, feed_previous: bool = False) -> "DraeParams":
        enc = RrnParams.init(K_W, S, rng, lambda_s, sigma_candidate)
        dec = RrnParams.init(K_W, S, rng, lambda_s, sigma_candidate)
        bott = BottleneckParams(
            W_1=rng.normal(0.0, 1.0 / math.sqrt(2 * K_W), (K, 2 * K_W)),
            b_1=np.zeros(K),
            W_2=rng.normal(0.0, 1.0 / math.sqrt(K), (2 * K_W, K)),
            b_2=np.zeros(2 * K_W),
        )
        out = OutputParams(rng.normal(0.0, 1.0 / math.sqrt(K_W), (S, K_W)), np.zeros(S))
        return cls(enc, dec, bott, out, feed_previous)

    @classmethod
    def zeros(cls, S: int, K_W: int, K: int, lambda_s: float = 1e2) -> "DraeParams":
        return cls(
            RrnParams.zeros(K_W, S, lambda_s),
            RrnParams.zeros(K_W, S, lambda_s),
            BottleneckParams(np.zeros((K, 2 * K_W)), np.zeros(K), np.zeros((2 * K_W, K)), np.zeros(2 * K_W)),
            OutputParams(np.zeros((S, K_W)), np.zeros(S)),
        )


@dataclass
class DraeTrace:
    encoder_states: list[RrnState]
    theta: np.ndarray
    decoder_init: tuple[np.ndarray, np.ndarray]
    decoder_states: list[RrnState]
    logits: np.ndarray  # (T, S)
    decoder_inputs: np.ndarray = field(repr=False, default=None)

    @property
    def T(self) -> int:
        return len(self.encoder_states)

    def pooled_rows(self) -> np.ndarray:
        """The ``2T`` rows ``(h_t; s_t)`` that beta-pooling averages."""
        rows = [np.concatenate([st.h, st.s]) for st in self.encoder_states + self.decoder_states]
        return np.array(rows)


def encode(corrupted: Sequence[int], params: DraeParams) -> list[RrnState]:
    if len(corrupted) == 0:
        raise ValueError("cannot encode an empty sequence")
    xs = params.encoder.W_w[:, np.asarray(corrupted)].T
    return rrn_forward(xs, params.encoder)


def compress(h_T: np.ndarray, s_T: np.ndarray, params: BottleneckParams) -> np.ndarray:
    hs = np.concatenate([h_T, s_T])
    if hs.shape[0] != params.W_1.shape[1]:
        raise ValueError("state width does not match W_1")
    return params.W_1 @ hs + params.b_1


def decompress(theta: np.ndarray, params: BottleneckParams) -> tuple[np.ndarray, np.ndarray]:
    if theta.shape != params.b_1.shape:
        raise ValueError("theta width does not match the bottleneck")
    v = params.W_2 @ np.tanh(theta) + params.b_2
    k = v.shape[0] // 2
    return v[:k], v[k:]


def _decoder_inputs(T: int, params: DraeParams, clean: Sequence[int] | None) -> np.ndarray:
    xs = np.zeros((T, params.K_W))
    if params.feed_previous and clean is not None and T > 1:
        xs[1:] = params.decoder.W_w[:, np.asarray(clean[:-1])].T
    return xs


def decode_teacher_forced(decoder_init, T: int, params: DraeParams, clean: Sequence[int] | None = None):
    """Run ``T`` decoder steps; returns (states, logits of shape (T, S)).

    With ``feed_previous`` the decoder step ``k`` reads clean word ``k-1``
    (step 1 reads a zero vector); otherwise every input is zero.
    """
    if T < 1:
        raise ValueError("decoder length must be >= 1")
    xs = _decoder_inputs(T, params, clean)
    states = rrn_forward(xs, params.decoder, *decoder_init)
    H = np.array([st.h for st in states])
    logits = H @ params.output.W_g.T + params.output.b_g
    return states, logits


def forward(corrupted: Sequence[int], params: DraeParams, clean: Sequence[int] | None = None) -> DraeTrace:
    enc = encode(corrupted, params)
    theta = compress(enc[-1].h, enc[-1].s, params.bottleneck)
    init = decompress(theta, params.bottleneck)
    dec, logits = decode_teacher_forced(init, len(corrupted), params, clean)
    return DraeTrace(enc, theta, init, dec, logits, _decoder_inputs(len(corrupted), params, clean))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def reconstruction_loss(trace: DraeTrace, clean: Sequence[int]) -> float:
    """Summed cross-entropy of the decoder's softmaxes against ``clean``."""
    if len(clean) != trace.logits.shape[0]:
        raise ValueError(f"target length {len(clean)} != decoder length {trace.logits.shape[0]}")
    lp = log_softmax(trace.logits)
    return float(-lp[np.arange(len(clean)), np.asarray(clean)].sum())


def item_gamma(trace: DraeTrace, params: DraeParams, a: float, b: float) -> np.ndarray:
    """Item content representation ``tanh(W_1 pool + b_1)``."""
    pooled = pool_weights(trace.T, a, b) @ trace.pooled_rows()
    return np.tanh(params.bottleneck.W_1 @ pooled + params.bottleneck.b_1)


def dedupe_consecutive(ids: Sequence) -> list:
    out = []
    for tok in ids:
        if not out or out[-1] != tok:
            out.append(tok)
    return out


def generate(theta: np.ndarray, params: DraeParams, max_len: int, eos_id: int, postprocess: bool = True) -> list[int]:
    """Greedy decoding from ``theta``; eos is not included in the output."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    h, s = decompress(theta, params.bottleneck)
    x = np.zeros(params.K_W)
    out = []
    for _ in range(max_len):
        st = rrn_step(x, h, s, params.decoder)
        h, s = st.h, st.s
        tok = int(np.argmax(params.output.W_g @ h + params.output.b_g))
        if tok == eos_id:
            break
        out.append(tok)
        if params.feed_previous:
            x = params.decoder.W_w[:, tok]
    return dedupe_consecutive(out) if postprocess else out


def theta_from_item_factor(v: np.ndarray, limit: float = 0.999) -> np.ndarray:
    """Bottleneck code whose squashed value ``tanh(theta)`` equals the item
    factor, for items whose content was never seen."""
    return np.arctanh(np.clip(v, -limit, limit))


def reconstruct(tokens_ids: Sequence[int], params: DraeParams, max_len: int, eos_id: int) -> list[int]:
    """Encode a (clean) id sequence and greedily decode it back."""
    enc = encode(tokens_ids, params)
    return generate(compress(enc[-1].h, enc[-1].s, params.bottleneck), params, max_len, eos_id)


@dataclass
class LossParts:
    recon: float
    coupling: float
    penalty: float

    @property
    def total(self) -> float:
        return self.recon + self.coupling + self.penalty


def _add_rrn_grads(grads, prefix, g: RrnGrads, xs_ids):
    grads[f"{prefix}.Y"] += g.Y
    grads[f"{prefix}.W"] += g.W
    grads[f"{prefix}.b"] += g.b
    if xs_ids is not None:
        np.add.at(grads[f"{prefix}.W_w"].T, np.asarray(xs_ids), g.dx)


def drae_loss_and_grads(pair, params: DraeParams, lambda_w: float = 0.0, target_v: np.ndarray | None = None,
                        lambda_v: float = 0.0, a: float = 9.8e7, b: float = 1e8, penalty_scale: float = 1.0,
                        grads: dict | None = None):
    """Loss and exact gradients for one sequence pair.

    loss = cross-entropy reconstruction
         + (lambda_v/2) ||v - gamma||^2        (only when ``target_v`` is given)
         + penalty_scale * (lambda_w/2) ||W+||^2

    Gradients are accumulated into ``grads`` when supplied (a dict as
    returned by ``DraeParams.zeros_like``) and returned.
    Returns ``(LossParts, grads, trace)``.
    """
    if grads is None:
        grads = params.zeros_like()
    clean = list(pair.clean)
    trace = forward(pair.corrupted, params, clean)
    T, K_W = trace.T, params.K_W
    bott, out = params.bottleneck, params.output

    lp = log_softmax(trace.logits)
    recon = float(-lp[np.arange(T), clean].sum())
    dlogits = np.exp(lp)
    dlogits[np.arange(T), clean] -= 1.0

    H_dec = np.array([st.h for st in trace.decoder_states])
    grads["W_g"] += dlogits.T @ H_dec
    grads["b_g"] += dlogits.sum(axis=0)
    dh_dec = dlogits @ out.W_g
    ds_dec = np.zeros((T, K_W))
    dh_enc = np.zeros((T, K_W))
    ds_enc = np.zeros((T, K_W))

    coupling = 0.0
    if target_v is not None and lambda_v > 0:
        w = pool_weights(T, a, b)
        rows = trace.pooled_rows()
        pooled = w @ rows
        gamma = np.tanh(bott.W_1 @ pooled + bott.b_1)
        diff = gamma - target_v
        coupling = 0.5 * lambda_v * float(diff @ diff)
        dz = lambda_v * diff * (1.0 - gamma**2)
        grads["W_1"] += np.outer(dz, pooled)
        grads["b_1"] += dz
        drows = np.outer(w, bott.W_1.T @ dz)
        dh_enc += drows[:T, :K_W]
        ds_enc += drows[:T, K_W:]
        dh_dec += drows[T:, :K_W]
        ds_dec += drows[T:, K_W:]

    g_dec = rrn_backprop(trace.decoder_states, params.decoder, dh_dec, ds_dec)
    _add_rrn_grads(grads, "dec", g_dec, None)
    if params.feed_previous and T > 1:
        # step 0 reads zeros, so only steps 1.. touch the embedding
        np.add.at(grads["dec.W_w"].T, np.asarray(clean[:-1]), g_dec.dx[1:])

    dinit = np.concatenate([g_dec.dh0, g_dec.ds0])
    tanh_theta = np.tanh(trace.theta)
    grads["W_2"] += np.outer(dinit, tanh_theta)
    grads["b_2"] += dinit
    dtheta = (bott.W_2.T @ dinit) * (1.0 - tanh_theta**2)
    hs_T = np.concatenate([trace.encoder_states[-1].h, trace.encoder_states[-1].s])
    grads["W_1"] += np.outer(dtheta, hs_T)
    grads["b_1"] += dtheta
    dhs_T = bott.W_1.T @ dtheta
    dh_enc[-1] += dhs_T[:K_W]
    ds_enc[-1] += dhs_T[K_W:]

    g_enc = rrn_backprop(trace.encoder_states, params.encoder, dh_enc, ds_enc)
    _add_rrn_grads(grads, "enc", g_enc, pair.corrupted)

    penalty = 0.0
    if lambda_w:
        scale = penalty_scale * lambda_w
        penalty = 0.5 * scale * params.sq_norm()
        for k, v in params.arrays().items():
            grads[k] += scale * v
    return LossParts(recon, coupling, penalty), grads, trace
