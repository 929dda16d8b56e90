"""M-step updates driven by the quadratic bound on ``-log pi``.

For ``q = +-1`` the bound ``-log pi(x) <= -log pi(y) - (1 - pi(y))(x - y) + (x - y)^2 / 8``
turns the weighted Bernoulli log likelihood into a weighted least-squares problem in
the working responses

    z[n, k, d] = theta[k, d] + 4 q[n, d] (1 - pi(q[n, d] theta[k, d]))
               = theta[k, d] + 4 (y[n, d] - pi(theta[k, d])).

Only the responsibility-weighted means of ``z`` enter the updates, so the N x K x D
tensor is never formed on the fitting path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bindata import Dataset
from .estep import Responsibilities
from .model import ModelParams, PenaltySpec, canonical_theta, inverse_logit

EMPTY_CLUSTER_FRAC = 1e-8


class DegenerateUpdateError(ValueError):
    """Raised when a loading column has no positive curvature (empty clusters or a null F column)."""


@dataclass
class MajorizationState:
    """Quantities the bound is anchored on for one outer iteration.

    ``zbar[k]`` is the responsibility-weighted mean of ``z[:, k, :]``. ``weights``
    equals ``nk`` except that clusters with negligible mass are zeroed out.
    ``z`` is only populated when explicitly requested.
    """

    zbar: np.ndarray
    weights: np.ndarray
    z: np.ndarray | None = None

    @property
    def empty(self) -> np.ndarray:
        return np.flatnonzero(self.weights == 0)

    def zbar_star(self, mu: np.ndarray) -> np.ndarray:
        """Weighted working-response means centred at ``mu``."""
        return self.zbar - mu[None, :]


def update_mixing(resp: Responsibilities) -> np.ndarray:
    """Mixing proportions ``nk / N``, with the last one set so the total is exactly 1."""
    xi = resp.nk / resp.n
    xi[-1] = 1.0 - xi[:-1].sum()
    if xi[-1] < 0:
        # only reachable through rounding when the last cluster is empty
        xi[-1] = 0.0
        xi /= xi.sum()
    return xi


def working_responses(data: Dataset, params: ModelParams) -> np.ndarray:
    """The full N x K x D tensor of working responses (diagnostics and tests)."""
    theta = canonical_theta(params)
    q = data.q[:, None, :]
    return theta[None, :, :] + 4.0 * q * (1.0 - inverse_logit(q * theta[None, :, :]))


def majorization_state(data: Dataset, params: ModelParams, resp: Responsibilities,
                       keep_z: bool = False) -> MajorizationState:
    theta = canonical_theta(params)
    nk = resp.nk
    weights = np.where(nk >= EMPTY_CLUSTER_FRAC * resp.n, nk, 0.0)
    safe = np.where(weights > 0, weights, 1.0)
    ybar = (resp.u.T @ data.yf) / safe[:, None]
    zbar = theta + 4.0 * (ybar - inverse_logit(theta))
    z = working_responses(data, params) if keep_z else None
    return MajorizationState(zbar=zbar, weights=weights, z=z)


def update_mu(state: MajorizationState, resp: Responsibilities, params: ModelParams) -> np.ndarray:
    """Closed-form minimizer ``N^-1 sum_k N_k (zbar_k - A f_k)`` of the bound in ``mu``."""
    w = state.weights
    return w @ (state.zbar - params.f @ params.a.T) / w.sum()


def quad_coefficients(state: MajorizationState, resp: Responsibilities,
                      params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Linear (D x L) and quadratic (L x L) coefficients of the bound in ``A``.

    ``v[d, l] = sum_k N_k (zbar_kd - mu_d) f_kl`` and ``w = F' diag(N_k) F``;
    ``params.mu`` must already hold this iteration's update.
    """
    wf = state.weights[:, None] * params.f
    v = state.zbar_star(params.mu).T @ wf
    w = params.f.T @ wf
    return v, 0.5 * (w + w.T)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def coordinate_update(v: np.ndarray, w: np.ndarray, a: np.ndarray, l: int, thr: float) -> np.ndarray:  # noqa: E741
    """Minimizer over column ``l`` of ``A`` with the other columns held fixed.

    Returns ``soft_threshold(c, thr) / w[l, l]`` with
    ``c[d] = v[d, l] - sum_{l' != l} w[l, l'] a[d, l']`` and ``thr = 4 N lam``.
    """
    c = v[:, l] - a @ w[:, l] + a[:, l] * w[l, l]
    return soft_threshold(c, thr) / w[l, l]


def update_loadings(v: np.ndarray, w: np.ndarray, a: np.ndarray, pen: PenaltySpec, n: int,
                    max_sweeps: int = 100, tol: float = 1e-8) -> np.ndarray:
    """Cyclic coordinate descent on ``1/8 sum_d a_d' W a_d - 1/4 sum v_dl a_dl + N lam |A|_1``.

    The coordinate minimizer is ``soft_threshold(c_dl, 4 N lam) / w_ll`` with
    ``c_dl = v_dl - sum_{l' != l} w_ll' a_dl'``. Rows of ``A`` do not interact, so each
    column update is applied to all rows at once; the result is identical to the
    row-major sweep.
    """
    diag = np.diag(w)
    if np.any(diag <= 0):
        raise DegenerateUpdateError(
            f"nonpositive curvature on loading column(s) {np.flatnonzero(diag <= 0).tolist()}")
    a = np.array(a, dtype=float)
    thr = 4.0 * n * pen.lam
    for _ in range(max_sweeps):
        change = 0.0
        for l in range(a.shape[1]):  # noqa: E741
            new = coordinate_update(v, w, a, l, thr)
            change = max(change, float(np.max(np.abs(new - a[:, l]), initial=0.0)))
            a[:, l] = new
        if change <= tol:
            break
    return a


def loading_objective(v: np.ndarray, w: np.ndarray, a: np.ndarray, pen: PenaltySpec, n: int) -> float:
    quad = np.einsum("dl,lm,dm->", a, w, a)
    return 0.125 * quad - 0.25 * float(np.sum(v * a)) + n * pen.lam * float(np.abs(a).sum())


def majorizer(state: MajorizationState, params: ModelParams, pen: PenaltySpec, n: int) -> float:
    """The bound on the M-step criterion, up to an additive constant.

    ``1/8 sum_k N_k ||zbar_k - mu - A f_k||^2 + N lam |A|_1``; it differs from the
    full ``1/8 sum_{n,k} u_nk ||z_nk - mu - A f_k||^2`` form only by the
    within-cluster scatter of ``z``, which does not depend on the parameters.
    """
    resid = state.zbar - params.mu[None, :] - params.f @ params.a.T
    fit = 0.125 * float(state.weights @ np.einsum("kd,kd->k", resid, resid))
    return fit + n * pen.lam * float(np.abs(params.a).sum())


def mstep_sweep(data: Dataset, params: ModelParams, resp: Responsibilities,
                pen: PenaltySpec) -> ModelParams:
    """Update ``mu`` then ``A`` against the bound anchored at ``params``; ``xi`` and ``F`` are kept."""
    state = majorization_state(data, params, resp)
    new = params.copy()
    new.mu = update_mu(state, resp, new)
    v, w = quad_coefficients(state, resp, new)
    new.a = update_loadings(v, w, new.a, pen, data.n_rows)
    return new
