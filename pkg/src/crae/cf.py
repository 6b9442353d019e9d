"""Confidence-weighted matrix factorization with content-anchored items.

Factors are stored column-wise: ``U`` is (K, I) and ``V`` is (K, J).
Confidence is ``alpha`` on observed positives and ``beta`` elsewhere; the
per-row systems use the usual implicit-feedback decomposition
``beta * V V^T + (alpha - beta) * sum_pos v v^T`` so no dense J x J
confidence matrix is ever built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .corpus import RatingMatrix


@dataclass(frozen=True)
class ConfidenceRule:
    alpha: float = 1.0
    beta: float = 0.01

    def __post_init__(self):
        if not self.alpha > self.beta > 0:
            raise ValueError("confidence rule requires alpha > beta > 0")


@dataclass
class LatentFactors:
    U: np.ndarray
    V: np.ndarray

    @property
    def K(self) -> int:
        return self.U.shape[0]

    @classmethod
    def init(cls, K: int, n_users: int, n_items: int, rng: np.random.Generator, scale: float = 0.01):
        return cls(rng.normal(0.0, scale, (K, n_users)), rng.normal(0.0, scale, (K, n_items)))


def _solve_rows(other: np.ndarray, rows: list[np.ndarray], rule: ConfidenceRule, reg: float,
                prior: np.ndarray | None) -> np.ndarray:
    K = other.shape[0]
    base = rule.beta * (other @ other.T) + reg * np.eye(K)
    out = np.empty((K, len(rows)))
    extra = rule.alpha - rule.beta
    for n, idx in enumerate(rows):
        Vp = other[:, idx]
        A = base + extra * (Vp @ Vp.T)
        rhs = rule.alpha * Vp.sum(axis=1)
        if prior is not None:
            rhs = rhs + reg * prior[:, n]
        out[:, n] = cho_solve(cho_factor(A), rhs)
    return out


def update_users(V: np.ndarray, train: RatingMatrix, rule: ConfidenceRule, lambda_u: float) -> np.ndarray:
    """``u_i = (V C_i V^T + lambda_u I)^-1 V C_i R_i`` for every user."""
    if not lambda_u > 0:
        raise ValueError("lambda_u must be positive")
    return _solve_rows(V, train.user_items(), rule, lambda_u, None)


def update_items(U: np.ndarray, train: RatingMatrix, rule: ConfidenceRule, lambda_v: float,
                 gammas: np.ndarray) -> np.ndarray:
    """``v_j = (U C_j U^T + lambda_v I)^-1 (U C_j R_j + lambda_v gamma_j)``.

    ``gammas`` is (K, J); items without content should carry zeros.
    """
    if not lambda_v > 0:
        raise ValueError("lambda_v must be positive")
    if gammas.shape != (U.shape[0], train.n_items):
        raise ValueError(f"gammas must have shape {(U.shape[0], train.n_items)}")
    return _solve_rows(U, train.item_users(), rule, lambda_v, gammas)


def predict(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Dense score matrix (I, J) with entries ``u_i . v_j``."""
    return U.T @ V


def rank_items(scores: np.ndarray, exclude: np.ndarray | None = None, top: int | None = None) -> np.ndarray:
    """Item ids by descending score, ties by ascending id, excluded ids dropped."""
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    if exclude is not None and len(exclude):
        order = order[~np.isin(order, exclude)]
    return order if top is None else order[:top]


def recommend(U: np.ndarray, V: np.ndarray, train: RatingMatrix, M: int) -> list[np.ndarray]:
    """Top-``M`` unseen items per user."""
    scores = predict(U, V)
    seen = train.user_items()
    return [rank_items(scores[i], seen[i], M) for i in range(U.shape[1])]


def rating_term(U: np.ndarray, V: np.ndarray, train: RatingMatrix, rule: ConfidenceRule) -> float:
    """``-sum_ij C_ij/2 (R_ij - u_i.v_j)^2`` over the full matrix."""
    # beta-weighted squared predictions over every cell, then correct the positives
    total = rule.beta * float(np.sum((U @ U.T) * (V @ V.T)))
    if train.positives:
        ii, jj = np.array(sorted(train.positives)).T
        p = np.einsum("ki,ki->i", U[:, ii], V[:, jj])
        total += float(np.sum(rule.alpha * (1.0 - p) ** 2 - rule.beta * p**2))
    return -0.5 * total


def joint_objective(U, V, gammas, train: RatingMatrix, rule: ConfidenceRule, lambda_u: float, lambda_v: float) -> float:
    """Rating term minus the Gaussian priors on ``u_i`` and ``v_j - gamma_j``."""
    return (rating_term(U, V, train, rule)
            - 0.5 * lambda_u * float(np.sum(U**2))
            - 0.5 * lambda_v * float(np.sum((V - gammas) ** 2)))
