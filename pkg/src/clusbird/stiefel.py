"""Gradient projection over matrices with orthonormal columns."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

RANK_TOL = 1e-12


class ProjectionError(ValueError):
    """Raised when a matrix is too close to rank deficient to be projected."""


@dataclass(frozen=True)
class GpConfig:
    """Step control for :func:`gp_minimize`.

    ``initial_step`` is the first trial step length and each rejected trial multiplies
    the step by ``shrink``; accepted steps carry over to the next iteration.
    Iteration stops once the relative decrease of the objective drops to ``grad_tol``
    or after ``max_iters`` accepted steps.
    """

    initial_step: float = 1.0
    shrink: float = 0.5
    max_iters: int = 200
    grad_tol: float = 1e-9
    max_halvings: int = 60

    def __post_init__(self):
        if not (self.initial_step > 0 and 0 < self.shrink < 1):
            raise ValueError("initial_step must be positive and shrink in (0, 1)")
        if self.max_iters < 1 or self.max_halvings < 1 or self.grad_tol < 0:
            raise ValueError("max_iters and max_halvings must be positive, grad_tol nonnegative")


def project(m: np.ndarray) -> np.ndarray:
    """Nearest matrix with orthonormal columns in Frobenius norm (polar factor ``U V'``)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ProjectionError(f"cannot orthonormalize a matrix of shape {m.shape}")
    return _polar(m)


def _polar(m: np.ndarray) -> np.ndarray:
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ProjectionError(str(exc)) from None
    if not s[-1] >= RANK_TOL * s[0] or s[0] == 0:
        raise ProjectionError("matrix is rank deficient")
    return u @ vt


def orthonormality_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m.T @ m - np.eye(m.shape[1]))))


def f_gradient(zbar_star: np.ndarray, nk: np.ndarray, f: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Gradient of the majorizer with respect to the cluster scores.

    ``(1/4) diag(nk) (F A' - Zbar*) A`` where ``Zbar*`` holds the K x D weighted
    working-response means centred at ``mu``.
    """
    return 0.25 * nk[:, None] * ((f @ a.T - zbar_star) @ a)


def f_objective(zbar_star: np.ndarray, nk: np.ndarray, f: np.ndarray, a: np.ndarray) -> float:
    """The F-dependent part of the majorizer: ``1/8 sum_k nk ||zbar*_k - A f_k||^2``."""
    resid = zbar_star - f @ a.T
    return 0.125 * float(nk @ np.einsum("kd,kd->k", resid, resid))


@dataclass
class GpResult:
    x: np.ndarray
    step: float
    n_iter: int
    history: list[float]


def gp_run(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    cfg: GpConfig = GpConfig(),
    step: float | None = None,
) -> GpResult:
    """Projected descent with step control; see :func:`gp_minimize`.

    ``step`` overrides ``cfg.initial_step`` so a caller solving a sequence of similar
    problems can resume from the last accepted step length; it is enlarged by
    ``1 / shrink`` once before use so the step can also grow between calls.
    """
    x = np.array(start, dtype=float)
    fx = float(objective(x))
    if not np.isfinite(fx):
        raise FloatingPointError("objective is not finite at the starting point")
    history = [fx]
    step = cfg.initial_step if step is None else step / cfg.shrink
    n_iter = 0
    for n_iter in range(1, cfg.max_iters + 1):
        g = gradient(x)
        sym = x.T @ g
        tangent = g - x @ (0.5 * (sym + sym.T))
        tnorm2 = float(np.vdot(tangent, tangent))
        # first-order decrease at the current step already below the stopping tolerance
        if tnorm2 == 0.0 or step * tnorm2 <= cfg.grad_tol * max(abs(fx), np.finfo(float).tiny):
            break
        accepted = False
        for _ in range(cfg.max_halvings):
            try:
                cand = _polar(x - step * g)
            except ProjectionError:
                step *= cfg.shrink
                continue
            fc = float(objective(cand))
            if fc < fx:
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            break
        decrease = fx - fc
        x, fx = cand, fc
        history.append(fx)
        if decrease <= cfg.grad_tol * max(abs(fx) + decrease, np.finfo(float).tiny):
            break
    return GpResult(x=x, step=step, n_iter=n_iter, history=history)


def gp_minimize(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    cfg: GpConfig = GpConfig(),
    history: list | None = None,
) -> np.ndarray:
    """Minimize ``objective`` over orthonormal-column matrices by projected descent.

    Each iteration tries ``project(X - step * gradient(X))`` and shrinks the step
    until the objective strictly decreases, so the accepted objective values are
    monotone. If no trial step decreases the objective the current point is returned.
    When ``history`` is given, the objective of every accepted iterate (starting with
    ``start``) is appended to it.
    """
    res = gp_run(objective, gradient, start, cfg)
    if history is not None:
        history.extend(res.history)
    return res.x
