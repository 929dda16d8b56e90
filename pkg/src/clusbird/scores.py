"""Individual component scores on the fitted subspace.

With ``mu`` and ``A`` fixed at their fitted values, each object gets its own score
row ``g_n`` and logits ``mu + G A'``; ``G`` (N x L, orthonormal columns) maximizes the
Bernoulli log likelihood

    S(G) = sum_{n,d} log pi(q[n, d] (mu[d] + g_n @ a[d])).
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import expit, log_expit

from .bindata import Dataset
from .estep import responsibilities
from .model import ModelParams, _check_dims
from .stiefel import GpConfig, ProjectionError, gp_minimize, orthonormality_error, project


def score_logits(g: np.ndarray, params: ModelParams) -> np.ndarray:
    return params.mu[None, :] + g @ params.a.T


def score_objective(data: Dataset, params: ModelParams, g: np.ndarray) -> float:
    """``S(G)``, the quantity :func:`estimate_scores` maximizes."""
    return float(log_expit(data.q * score_logits(g, params)).sum())


def score_gradient(data: Dataset, params: ModelParams, g: np.ndarray) -> np.ndarray:
    """Gradient of ``-S(G)``.

    Written in the working-response form ``(1/4)(Theta - Z) A`` with
    ``Z = Theta + 4 (Y - pi(Theta))``; at the anchor point the quadratic bound and
    ``-S`` share this gradient.
    """
    theta = score_logits(g, params)
    z = theta + 4.0 * (data.yf - expit(theta))
    return 0.25 * (theta - z) @ params.a


def initial_scores(data: Dataset, params: ModelParams) -> np.ndarray:
    """Each object's responsibility-weighted cluster score, projected to orthonormal columns."""
    resp = responsibilities(data, params)
    start = resp.u @ params.f
    try:
        return project(start)
    except ProjectionError:
        # objects concentrated in fewer than L clusters; break the tie deterministically
        rng = np.random.default_rng(0)
        return project(start + 1e-3 * rng.standard_normal(start.shape))


def estimate_scores(data: Dataset, fitted: ModelParams, cfg: GpConfig = GpConfig(),
                    init: np.ndarray | None = None) -> np.ndarray:
    """Maximize ``S(G)`` over N x L matrices with orthonormal columns.

    Parameters
    ----------
    data : Dataset
    fitted : ModelParams
        A fitted model; only ``mu`` and ``A`` enter the objective, ``xi`` and ``F``
        are used for the default initializer.
    cfg : GpConfig
        Step control for the gradient projection run.
    init : ndarray, optional
        Starting scores; defaults to :func:`initial_scores`.

    Returns
    -------
    ndarray of shape (N, L)
    """
    _check_dims(data, fitted)
    if data.n_rows < fitted.l:
        raise ValueError(f"need at least L={fitted.l} objects, got {data.n_rows}")
    if init is None:
        g0 = initial_scores(data, fitted)
    else:
        g0 = np.array(init, dtype=float)
        if g0.shape != (data.n_rows, fitted.l):
            raise ValueError(f"init has shape {g0.shape}, expected {(data.n_rows, fitted.l)}")
        if orthonormality_error(g0) > 1e-12:
            g0 = project(g0)
    if not np.any(fitted.a):
        warnings.warn("all loadings are zero; scores do not affect the likelihood",
                      RuntimeWarning, stacklevel=2)
        return g0
    return gp_minimize(
        lambda g: -score_objective(data, fitted, g),
        lambda g: score_gradient(data, fitted, g),
        g0,
        cfg,
    )
