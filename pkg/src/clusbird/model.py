"""Parameter state and likelihood computations for the sparse low-rank Bernoulli mixture.

The canonical (logit) parameter of cluster ``k`` and variable ``d`` is

    theta[k, d] = mu[d] + f[k] @ a[d]

with ``f`` a K x L matrix with orthonormal columns and ``a`` a D x L loading
matrix shrunk by an L1 penalty.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import expit, log_expit, logsumexp

if TYPE_CHECKING:
    from .bindata import Dataset

FORMAT_VERSION = 1

XI_SUM_TOL = 1e-12
ORTHO_TOL = 1e-8


class ParameterError(ValueError):
    """Raised when a parameter set violates the model's invariants."""


@dataclass
class ModelParams:
    """Full parameter state ``(xi, mu, F, A)``.

    Attributes
    ----------
    xi : (K,) ndarray
        Mixing proportions.
    mu : (D,) ndarray
        Per-variable centroid on the logit scale.
    f : (K, L) ndarray
        Cluster component scores; columns are orthonormal.
    a : (D, L) ndarray
        Loadings.
    """

    xi: np.ndarray
    mu: np.ndarray
    f: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.f = np.atleast_2d(np.asarray(self.f, dtype=float))
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))

    @property
    def k(self) -> int:
        return self.f.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.f.shape[1]

    @property
    def d(self) -> int:
        return self.a.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.k, self.l, self.d

    def copy(self) -> "ModelParams":
        return ModelParams(self.xi.copy(), self.mu.copy(), self.f.copy(), self.a.copy())

    def validate(self, ortho_tol: float = ORTHO_TOL) -> "ModelParams":
        k, l, d = self.dims
        if self.xi.shape != (k,):
            raise ParameterError(f"xi has shape {self.xi.shape}, expected ({k},)")
        if self.mu.shape != (d,):
            raise ParameterError(f"mu has shape {self.mu.shape}, expected ({d},)")
        if self.a.shape != (d, l):
            raise ParameterError(f"A has shape {self.a.shape}, expected ({d}, {l})")
        if l > k:
            raise ParameterError(f"L={l} exceeds K={k}")
        if not (np.all(np.isfinite(self.xi)) and np.all(np.isfinite(self.mu))
                and np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.a))):
            raise ParameterError("parameters contain non-finite values")
        if np.any(self.xi < 0) or abs(self.xi.sum() - 1.0) > XI_SUM_TOL:
            raise ParameterError("mixing proportions must be nonnegative and sum to 1")
        gram_err = np.max(np.abs(self.f.T @ self.f - np.eye(l)))
        if gram_err > ortho_tol:
            raise ParameterError(f"F columns are not orthonormal (max deviation {gram_err:.3g})")
        return self


@dataclass(frozen=True)
class PenaltySpec:
    """A single L1 regularization strength shared by every loading column."""

    lam: float = 0.0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite nonnegative number, got {self.lam}")


def inverse_logit(theta):
    """Logistic function ``1 / (1 + exp(-theta))``; saturates without overflow."""
    return expit(theta)


def log_inverse_logit(x):
    """``log(inverse_logit(x))`` evaluated stably for large ``|x|``."""
    return log_expit(x)


def canonical_theta(params: ModelParams) -> np.ndarray:
    """K x D matrix of logits ``mu[d] + f[k] @ a[d]``."""
    return params.mu[None, :] + params.f @ params.a.T


def log_component_prob(data: "Dataset", theta_k: np.ndarray) -> np.ndarray:
    """Log probability of every row of ``data`` under one component's logits."""
    theta_k = np.asarray(theta_k, dtype=float)
    if theta_k.shape != (data.n_cols,):
        raise ValueError(f"theta_k has shape {theta_k.shape}, expected ({data.n_cols},)")
    return log_expit(data.q * theta_k[None, :]).sum(axis=1)


def log_component_probs(data: "Dataset", theta: np.ndarray) -> np.ndarray:
    """N x K matrix of ``sum_d log pi(q[n, d] * theta[k, d])``.

    Since ``q`` is +-1, ``log pi(q theta) = y log pi(theta) + (1 - y) log pi(-theta)``,
    which turns the sum over ``d`` into two matrix products.
    """
    y = data.yf
    return y @ log_expit(theta).T + (1.0 - y) @ log_expit(-theta).T


def log_joint(data: "Dataset", params: ModelParams) -> np.ndarray:
    """N x K matrix ``log xi[k] + log p_k(y_n)``."""
    with np.errstate(divide="ignore"):
        log_xi = np.log(params.xi)
    return log_component_probs(data, canonical_theta(params)) + log_xi[None, :]


def log_likelihood(data: "Dataset", params: ModelParams) -> float:
    """Mixture log likelihood, summed over rows with a per-row logsumexp."""
    _check_dims(data, params)
    return float(logsumexp(log_joint(data, params), axis=1).sum())


def penalty_value(a: np.ndarray, pen: PenaltySpec) -> float:
    return float(pen.lam * np.abs(a).sum())


def penalized_objective(data: "Dataset", params: ModelParams, pen: PenaltySpec) -> float:
    """``log_likelihood - N * penalty``; the quantity the EM driver maximizes."""
    return log_likelihood(data, params) - data.n_rows * penalty_value(params.a, pen)


def n_nonzero(a: np.ndarray) -> int:
    # soft-thresholding produces exact zeros, so no tolerance
    return int(np.count_nonzero(a))


def degrees_of_freedom(params: ModelParams) -> int:
    """``K + D + K*L + #nonzero(A)``. All K proportions are counted."""
    k, l, d = params.dims
    return k + d + k * l + n_nonzero(params.a)


def bic_value(loglik: float, n: int, df: int) -> float:
    return -2.0 * loglik + math.log(n) * df


def bic(data: "Dataset", params: ModelParams) -> float:
    """Bayesian information criterion ``-2 loglik + log(N) df``; lower is better."""
    if data.n_rows < 2:
        warnings.warn("BIC with N < 2 has a zero complexity penalty", RuntimeWarning, stacklevel=2)
    return bic_value(log_likelihood(data, params), data.n_rows, degrees_of_freedom(params))


def _check_dims(data: "Dataset", params: ModelParams) -> None:
    if params.d != data.n_cols:
        raise ValueError(f"model has D={params.d} but data has {data.n_cols} columns")


# -- serialization -------------------------------------------------------------------------


def params_to_dict(params: ModelParams, lam: float | None = None,
                   loglik: float | None = None, bic: float | None = None) -> dict:
    k, l, d = params.dims
    return {
        "format_version": FORMAT_VERSION,
        "K": k,
        "L": l,
        "D": d,
        "xi": params.xi.tolist(),
        "mu": params.mu.tolist(),
        "F": params.f.tolist(),
        "A": params.a.tolist(),
        "lambda": lam,
        "loglik": loglik,
        "bic": bic,
    }


def params_from_dict(doc: dict) -> tuple[ModelParams, dict]:
    """Rebuild and validate parameters; returns ``(params, metadata)``."""
    try:
        k, l, d = int(doc["K"]), int(doc["L"]), int(doc["D"])
        params = ModelParams(
            xi=np.asarray(doc["xi"], dtype=float),
            mu=np.asarray(doc["mu"], dtype=float),
            f=np.asarray(doc["F"], dtype=float).reshape(k, l),
            a=np.asarray(doc["A"], dtype=float).reshape(d, l),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed model document: {exc}") from exc
    params.validate()
    if params.dims != (k, l, d):
        raise ParameterError("declared K/L/D do not match the stored matrices")
    meta = {key: doc.get(key) for key in ("lambda", "loglik", "bic", "format_version")}
    return params, meta


def save_params(path, params: ModelParams, **meta) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, **meta), indent=2) + "\n")


def load_params(path) -> tuple[ModelParams, dict]:
    return params_from_dict(json.loads(Path(path).read_text()))
