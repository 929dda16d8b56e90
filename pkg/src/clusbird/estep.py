"""Posterior cluster memberships, computed entirely in log space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bindata import Dataset
from .model import ModelParams, _check_dims, log_joint


@dataclass
class Responsibilities:
    """Posterior weights ``u`` (N x K) and cluster masses ``nk = u.sum(0)``.

    ``loglik`` is the mixture log likelihood of the parameters the weights were
    computed from; it falls out of the normalization for free.
    """

    u: np.ndarray
    nk: np.ndarray
    loglik: float = float("nan")

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def k(self) -> int:
        return self.u.shape[1]

    def hard_labels(self) -> np.ndarray:
        """1-based argmax assignment; ties go to the lowest cluster index."""
        return np.argmax(self.u, axis=1) + 1


def normalize_log_weights(log_w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize ``exp(log_w)``; returns ``(weights, row log normalizers)``."""
    lse = logsumexp(log_w, axis=1, keepdims=True)
    u = np.exp(log_w - lse)
    # second pass removes the rounding left by exp(log_w - lse)
    u /= u.sum(axis=1, keepdims=True)
    return u, lse[:, 0]


def responsibilities(data: Dataset, params: ModelParams) -> Responsibilities:
    _check_dims(data, params)
    u, lse = normalize_log_weights(log_joint(data, params))
    return Responsibilities(u=u, nk=u.sum(axis=0), loglik=float(lse.sum()))
