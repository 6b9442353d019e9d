"""Collaborative recurrent autoencoder: joint recommendation and sequence generation."""

from .betapool import BetaPoolConfig, beta_pool, pool_weights, reg_inc_beta
from .cf import ConfidenceRule, LatentFactors, predict, recommend
from .corpus import RatingMatrix, SequencePair, Vocabulary, build_vocabulary, encode_document, wildcard_corrupt
from .drae import DraeParams, forward, generate
from .rrn import RrnParams, rrn_forward, rrn_step
from .trainer import TrainConfig, Trainer, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
