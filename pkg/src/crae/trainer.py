"""Joint MAP training: gradient steps on the network weights alternating
with exact user/item factor updates."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import cf
from .betapool import grad_loglik_wrt_a
from .checkpoint import CheckpointError, read_tensors, write_tensors
from .corpus import RatingMatrix, SequencePair, Vocabulary, wildcard_corrupt
from .drae import (BottleneckParams, DraeParams, OutputParams, drae_loss_and_grads, forward, item_gamma,
                   reconstruction_loss)
from .rrn import RrnParams

_log = logging.getLogger(__name__)

MODES = ("full", "lambda_s_inf", "two_step")
OPTIMIZERS = ("sgd", "adam")
LOG_COLUMNS = ("epoch", "recon_loss", "coupling_loss", "rating_term", "joint_objective", "wall_seconds")


class NumericalError(ArithmeticError):
    """A loss or gradient became non-finite during training."""


@dataclass
class TrainConfig:
    K: int = 50
    K_W: int = 100
    lambda_u: float = 0.1
    lambda_v: float = 10.0
    lambda_w: float = 1e-4
    lambda_s: float = 1e2
    alpha: float = 1.0
    beta: float = 0.01
    denoise_rate: float = 0.4
    resample_per_epoch: bool = True
    optimizer: str = "adam"
    learning_rate: float = 0.01
    clip_norm: float = 5.0
    epochs: int = 80
    minibatch_size: int = 1
    seed: int = 0
    beta_a: float = 9.8e7
    beta_b: float = 1e8
    learn_a: bool = False
    mode: str = "full"
    sigma_candidate: bool = False
    feed_previous: bool = False
    two_step_sweeps: int = 20
    record_wall_time: bool = True

    def __post_init__(self):
        for name in ("lambda_u", "lambda_v", "lambda_s", "learning_rate", "beta_a", "beta_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lambda_w < 0:
            raise ValueError("lambda_w must be non-negative")
        if not 0 <= self.denoise_rate <= 1:
            raise ValueError("denoise_rate must lie in [0, 1]")
        if self.epochs < 1 or self.minibatch_size < 1 or self.K < 1 or self.K_W < 1:
            raise ValueError("epochs, minibatch_size, K and K_W must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.learn_a and self.beta_b != 1:
            raise ValueError("learn_a requires beta_b == 1")
        cf.ConfidenceRule(self.alpha, self.beta)

    @property
    def effective_lambda_s(self) -> float:
        return math.inf if self.mode == "lambda_s_inf" else self.lambda_s

    @property
    def rule(self) -> cf.ConfidenceRule:
        return cf.ConfidenceRule(self.alpha, self.beta)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    recon_loss: float
    coupling_loss: float
    rating_term: float
    joint_objective: float
    wall_seconds: float
    wplus_loss: float = float("nan")
    cf_objective: tuple[float, float, float] = (float("nan"),) * 3
    beta_a: float = float("nan")

    def line(self, with_time: bool = True) -> str:
        wall = f"{self.wall_seconds:.3f}" if with_time else "0"
        return (f"{self.epoch}\t{self.recon_loss:.10g}\t{self.coupling_loss:.10g}\t"
                f"{self.rating_term:.10g}\t{self.joint_objective:.10g}\t{wall}")


@dataclass
class ModelCheckpoint:
    vocab: Vocabulary
    params: DraeParams
    factors: cf.LatentFactors
    config: TrainConfig
    epoch: int
    rng_state: dict
    beta_a: float
    corruptions: dict[int, list[int]] = field(default_factory=dict)
    adam: "Adam | None" = None
    version: int = 1

    def gammas(self, sequences: Mapping[int, Sequence[int]]) -> np.ndarray:
        return compute_gammas(self.params, sequences, self.factors.V.shape[1], self.beta_a, self.config.beta_b)


def compute_gammas(params: DraeParams, sequences: Mapping[int, Sequence[int]], n_items: int, a: float, b: float,
                   with_recon: bool = False):
    """Content representation for each item (zeros where content is missing),
    using the clean sequence as encoder input."""
    G = np.zeros((params.K, n_items))
    recon = 0.0
    for j, seq in sequences.items():
        tr = forward(seq, params, seq)
        G[:, j] = item_gamma(tr, params, a, b)
        if with_recon:
            recon += reconstruction_loss(tr, seq)
    return (G, recon) if with_recon else G


class Adam:
    """Adam moments for a dict of arrays, updated in place."""

    def __init__(self, arrays: Mapping[str, np.ndarray], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.step = 0

    def apply(self, arrays: dict, grads: dict, lr: float) -> None:
        self.step += 1
        c1 = 1.0 - self.beta1**self.step
        c2 = 1.0 - self.beta2**self.step
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            arrays[k] -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _clip(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if not math.isfinite(norm):
        raise NumericalError("non-finite gradient norm")
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class Trainer:
    """Stateful driver; ``run_epoch`` performs one full alternation.

    ``sequences`` maps item id -> clean word ids (eos-terminated). Items
    absent from it have no content and get a zero prior mean.
    """

    def __init__(self, vocab: Vocabulary, sequences: Mapping[int, Sequence[int]], train: RatingMatrix,
                 config: TrainConfig, checkpoint: ModelCheckpoint | None = None):
        self.vocab = vocab
        self.config = config
        self.sequences = {int(j): list(s) for j, s in sorted(sequences.items())}
        for j in self.sequences:
            if not 0 <= j < train.n_items:
                raise ValueError(f"content item {j} outside rating matrix")
        self.train_r = train
        self.rule = config.rule
        self.log: list[EpochRecord] = []
        if checkpoint is None:
            self.rng = np.random.default_rng(config.seed)
            self.params = DraeParams.init(vocab.size, config.K_W, config.K, self.rng, config.effective_lambda_s,
                                          config.sigma_candidate, config.feed_previous)
            self.factors = cf.LatentFactors.init(config.K, train.n_users, train.n_items, self.rng)
            self.epoch = 0
            self.beta_a = config.beta_a
            self.corruptions: dict[int, list[int]] = {}
            if not config.resample_per_epoch:
                self._corrupt_all()
            self.adam = Adam(self.params.arrays()) if config.optimizer == "adam" else None
        else:
            self.rng = np.random.default_rng()
            self.rng.bit_generator.state = checkpoint.rng_state
            self.params = checkpoint.params
            self.factors = checkpoint.factors
            self.epoch = checkpoint.epoch
            self.beta_a = checkpoint.beta_a
            self.corruptions = {int(k): list(v) for k, v in checkpoint.corruptions.items()}
            self.adam = checkpoint.adam

    # -- phases ---------------------------------------------------------------

    def _corrupt_all(self) -> None:
        v = self.vocab
        self.corruptions = {j: wildcard_corrupt(s, self.config.denoise_rate, self.rng, v.wildcard_id, v.eos_id)
                            for j, s in self.sequences.items()}

    def pairs(self) -> list[SequencePair]:
        return [SequencePair(j, self.sequences[j], self.corruptions[j]) for j in self.sequences]

    def coupled(self) -> bool:
        return self.config.mode != "two_step"

    def wplus_loss(self, pairs: Sequence[SequencePair] | None = None) -> float:
        """Full-batch value of the objective the SGD phase descends, per item."""
        cfg = self.config
        pairs = self.pairs() if pairs is None else pairs
        total = 0.0
        for p in pairs:
            tr = forward(p.corrupted, self.params, p.clean)
            total += reconstruction_loss(tr, p.clean)
            if self.coupled():
                d = item_gamma(tr, self.params, self.beta_a, cfg.beta_b) - self.factors.V[:, p.item_id]
                total += 0.5 * cfg.lambda_v * float(d @ d)
        n = max(len(pairs), 1)
        return total / n + 0.5 * cfg.lambda_w / n * self.params.sq_norm()

    def wplus_phase(self) -> None:
        cfg = self.config
        pairs = self.pairs()
        if not pairs:
            return
        n = len(pairs)
        order = self.rng.permutation(n)
        arrays = self.params.arrays()
        V = self.factors.V
        lam_v = cfg.lambda_v if self.coupled() else 0.0
        for start in range(0, n, cfg.minibatch_size):
            batch = order[start:start + cfg.minibatch_size]
            grads = self.params.zeros_like()
            for idx in batch:
                p = pairs[idx]
                parts, _, _ = drae_loss_and_grads(p, self.params, 0.0, V[:, p.item_id], lam_v,
                                                  self.beta_a, cfg.beta_b, grads=grads)
                if not math.isfinite(parts.total):
                    raise NumericalError(f"non-finite loss on item {p.item_id} at epoch {self.epoch + 1}")
            inv = 1.0 / len(batch)
            for k, g in grads.items():
                g *= inv
                if cfg.lambda_w:
                    g += (cfg.lambda_w / n) * arrays[k]
            _clip(grads, cfg.clip_norm)
            if self.adam is not None:
                self.adam.apply(arrays, grads, cfg.learning_rate)
            else:
                for k, g in grads.items():
                    arrays[k] -= cfg.learning_rate * g

    def a_phase(self) -> None:
        """One gradient-ascent step on the beta-pooling shape ``a`` (b = 1)."""
        cfg = self.config
        rows, targets = [], []
        for p in self.pairs():
            rows.append(forward(p.corrupted, self.params, p.clean).pooled_rows())
            targets.append(self.factors.V[:, p.item_id])
        g = grad_loglik_wrt_a(rows, targets, self.params.bottleneck.W_1, self.params.bottleneck.b_1,
                              cfg.lambda_v, self.beta_a, 1.0)
        self.beta_a = float(np.clip(self.beta_a + cfg.learning_rate * g, 1e-3, 1e9))

    def cf_phase(self, gammas: np.ndarray) -> tuple[float, float, float]:
        cfg = self.config
        f = self.factors

        def obj():
            return cf.joint_objective(f.U, f.V, gammas, self.train_r, self.rule, cfg.lambda_u, cfg.lambda_v)

        before = obj()
        f.U = cf.update_users(f.V, self.train_r, self.rule, cfg.lambda_u)
        mid = obj()
        f.V = cf.update_items(f.U, self.train_r, self.rule, cfg.lambda_v, gammas)
        after = obj()
        if mid < before - 1e-9 * max(1.0, abs(before)) or after < mid - 1e-9 * max(1.0, abs(mid)):
            _log.warning("coordinate ascent decreased the objective: %g -> %g -> %g", before, mid, after)
        return before, mid, after

    def run_epoch(self) -> EpochRecord:
        cfg = self.config
        t0 = time.perf_counter()
        if cfg.resample_per_epoch:
            self._corrupt_all()
        self.wplus_phase()
        if cfg.learn_a and self.coupled():
            self.a_phase()
        gammas, recon = compute_gammas(self.params, self.sequences, self.train_r.n_items, self.beta_a,
                                       cfg.beta_b, with_recon=True)
        cf_obj = (float("nan"),) * 3
        last = self.epoch + 1 == cfg.epochs
        if self.coupled():
            cf_obj = self.cf_phase(gammas)
        elif last:
            for _ in range(cfg.two_step_sweeps):
                cf_obj = self.cf_phase(gammas)
        self.epoch += 1
        rec = self._record(gammas, recon, time.perf_counter() - t0)
        rec.cf_objective = cf_obj
        self.log.append(rec)
        return rec

    def _record(self, gammas, recon, wall) -> EpochRecord:
        cfg = self.config
        f = self.factors
        rating = cf.rating_term(f.U, f.V, self.train_r, self.rule)
        coupling = 0.5 * cfg.lambda_v * float(np.sum((f.V - gammas) ** 2))
        joint = (rating - 0.5 * cfg.lambda_u * float(np.sum(f.U**2)) - coupling - recon
                 - 0.5 * cfg.lambda_w * self.params.sq_norm())
        if not math.isfinite(joint):
            raise NumericalError(f"non-finite objective at epoch {self.epoch}")
        return EpochRecord(self.epoch, recon, coupling, rating, joint, wall, beta_a=self.beta_a)

    def fit(self, epochs: int | None = None, callback=None) -> "Trainer":
        target = self.config.epochs if epochs is None else min(self.config.epochs, self.epoch + epochs)
        while self.epoch < target:
            rec = self.run_epoch()
            _log.info("epoch %d recon=%.4f joint=%.4f", rec.epoch, rec.recon_loss, rec.joint_objective)
            if callback is not None:
                callback(rec)
        return self

    def checkpoint(self) -> ModelCheckpoint:
        return ModelCheckpoint(
            vocab=self.vocab, params=self.params, factors=self.factors, config=self.config, epoch=self.epoch,
            rng_state=self.rng.bit_generator.state, beta_a=self.beta_a,
            corruptions={} if self.config.resample_per_epoch else dict(self.corruptions),
            adam=self.adam,
        )

    def log_text(self) -> str:
        return format_log(self.log, self.config)


def format_log(records: Sequence[EpochRecord], config: TrainConfig) -> str:
    header = f"# mode={config.mode} lambda_s={config.effective_lambda_s:g} seed={config.seed}\n"
    header += "\t".join(LOG_COLUMNS) + "\n"
    return header + "".join(r.line(config.record_wall_time) + "\n" for r in records)


def train(vocab: Vocabulary, sequences: Mapping[int, Sequence[int]], train_ratings: RatingMatrix,
          config: TrainConfig) -> tuple[ModelCheckpoint, list[EpochRecord]]:
    t = Trainer(vocab, sequences, train_ratings, config).fit()
    return t.checkpoint(), t.log


# -- persistence ---------------------------------------------------------------


def save_checkpoint(model: ModelCheckpoint, path: str | Path) -> None:
    tensors = {f"net.{k}": v for k, v in model.params.arrays().items()}
    tensors["cf.U"] = model.factors.U
    tensors["cf.V"] = model.factors.V
    if model.adam is not None:
        tensors.update({f"adam.m.{k}": v for k, v in model.adam.m.items()})
        tensors.update({f"adam.v.{k}": v for k, v in model.adam.v.items()})
    meta = {
        "version": model.version,
        "vocab": list(model.vocab.id_to_token),
        "config": model.config.to_dict(),
        "epoch": model.epoch,
        "rng_state": model.rng_state,
        "beta_a": model.beta_a,
        "feed_previous": model.params.feed_previous,
        "corruptions": {str(k): v for k, v in sorted(model.corruptions.items())},
        "adam_step": None if model.adam is None else model.adam.step,
    }
    write_tensors(path, tensors, meta)


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    tensors, meta = read_tensors(path)
    try:
        config = TrainConfig.from_dict(meta["config"])
        vocab = Vocabulary(tuple(meta["vocab"]))
        lam = config.effective_lambda_s

        def rrn(prefix):
            return RrnParams(tensors[f"net.{prefix}.W_w"], tensors[f"net.{prefix}.Y"], tensors[f"net.{prefix}.W"],
                             tensors[f"net.{prefix}.b"], lam, config.sigma_candidate)

        params = DraeParams(
            rrn("enc"), rrn("dec"),
            BottleneckParams(tensors["net.W_1"], tensors["net.b_1"], tensors["net.W_2"], tensors["net.b_2"]),
            OutputParams(tensors["net.W_g"], tensors["net.b_g"]),
            bool(meta["feed_previous"]),
        )
        adam = None
        if meta["adam_step"] is not None:
            adam = Adam(params.arrays())
            adam.step = int(meta["adam_step"])
            adam.m = {k: tensors[f"adam.m.{k}"] for k in adam.m}
            adam.v = {k: tensors[f"adam.v.{k}"] for k in adam.v}
        return ModelCheckpoint(vocab, params, cf.LatentFactors(tensors["cf.U"], tensors["cf.V"]), config,
                               int(meta["epoch"]), meta["rng_state"], float(meta["beta_a"]),
                               {int(k): v for k, v in meta["corruptions"].items()}, adam, int(meta["version"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint contents: {exc}") from None
