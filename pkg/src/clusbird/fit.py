"""EM driver, multi-start orchestration and BIC-based choice of the L1 strength."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .bindata import Dataset
from .estep import Responsibilities, responsibilities
from .model import (
    ModelParams,
    PenaltySpec,
    bic_value,
    degrees_of_freedom,
    n_nonzero,
    penalty_value,
)
from .mstep import (
    DegenerateUpdateError,
    majorization_state,
    quad_coefficients,
    update_loadings,
    update_mixing,
    update_mu,
)
from .stiefel import GpConfig, ProjectionError, gp_run, project

log = logging.getLogger(__name__)

DIRICHLET_CONCENTRATION = 5.0
INIT_LOADING_SD = 0.1


class FitError(RuntimeError):
    """Raised when a fit cannot proceed (non-finite objective, every start failed)."""


@dataclass(frozen=True)
class FitConfig:
    """Settings for one penalized fit.

    ``k`` and ``l`` are the number of clusters and the subspace dimension; ``lam`` is
    the L1 strength shared by all loading columns.
    """

    k: int
    l: int  # noqa: E741
    lam: float = 0.0
    max_outer_iters: int = 500
    outer_tol: float = 1e-7
    n_starts: int = 50
    seed: int = 0
    gp: GpConfig = field(default_factory=GpConfig)
    threads: int = 1

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be positive")
        if self.l > self.k:
            raise ValueError(f"l={self.l} exceeds k={self.k}")
        if self.max_outer_iters < 1 or self.n_starts < 1 or self.threads < 1:
            raise ValueError("iteration, start and thread counts must be positive")
        if self.outer_tol < 0:
            raise ValueError("outer_tol must be nonnegative")
        PenaltySpec(self.lam)

    @property
    def penalty(self) -> PenaltySpec:
        return PenaltySpec(self.lam)

    def with_lambda(self, lam: float) -> "FitConfig":
        return replace(self, lam=float(lam))


@dataclass
class FitReport:
    params: ModelParams
    lam: float
    loglik: float
    penalized: float
    df: int
    bic: float
    trace: list[float]
    responsibilities: np.ndarray
    hard_labels: np.ndarray  # 1-based
    n_iter: int
    converged: bool
    empty_clusters: tuple[int, ...] = ()
    start: int | None = None

    @property
    def nonzeros(self) -> int:
        return n_nonzero(self.params.a)


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("lambda grid is empty")
        if any(not (v >= 0 and math.isfinite(v)) for v in vals):
            raise ValueError("lambda values must be finite and nonnegative")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("lambda grid must be strictly ascending")
        object.__setattr__(self, "values", vals)


@dataclass
class LambdaRow:
    lam: float
    loglik: float
    df: int
    bic: float
    nonzeros: int


@dataclass
class Selection:
    best_lambda: float
    report: FitReport
    table: list[LambdaRow]


def random_init(d: int, k: int, l: int, rng: np.random.Generator) -> ModelParams:  # noqa: E741
    """Random starting point: Dirichlet proportions, projected Gaussian F, small Gaussian A, zero mu."""
    xi = rng.dirichlet(np.full(k, DIRICHLET_CONCENTRATION))
    f = project(rng.standard_normal((k, l)))
    a = rng.normal(0.0, INIT_LOADING_SD, size=(d, l))
    return ModelParams(xi=xi, mu=np.zeros(d), f=f, a=a)


def start_init(data: Dataset, cfg: FitConfig, start: int) -> ModelParams:
    """The initialization used for start number ``start``; independent of ``n_starts``."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(start,)))
    return random_init(data.n_cols, cfg.k, cfg.l, rng)


def canonicalize_signs(params: ModelParams) -> ModelParams:
    """Flip columns of F and A together so each F column's largest-magnitude entry is positive."""
    out = params.copy()
    idx = np.argmax(np.abs(out.f), axis=0)
    signs = np.where(out.f[idx, np.arange(out.l)] < 0, -1.0, 1.0)
    out.f *= signs
    out.a *= signs
    return out


def _penalized(resp: Responsibilities, params: ModelParams, pen: PenaltySpec) -> float:
    return resp.loglik - resp.n * penalty_value(params.a, pen)


def em_step(data: Dataset, params: ModelParams, resp: Responsibilities, pen: PenaltySpec,
            gp: GpConfig, step: float | None = None) -> tuple[ModelParams, np.ndarray, float]:
    """One pass of the mixing, mu, F and A updates against the bound anchored at ``params``.

    Returns the new parameters, the indices of clusters skipped as empty, and the last
    accepted gradient-projection step (to seed the next iteration's F update).
    """
    n = data.n_rows
    state = majorization_state(data, params, resp)
    new = ModelParams(update_mixing(resp), params.mu, params.f, params.a)
    new.mu = update_mu(state, resp, new)

    # the F subproblem only sees A through A'A and Zbar* A
    zstar = state.zbar_star(new.mu)
    wts = state.weights
    ata = new.a.T @ new.a
    target = zstar @ new.a
    const = float(wts @ np.einsum("kd,kd->k", zstar, zstar))

    def objective(f):
        quad = np.einsum("kl,lm,km->k", f, ata, f) - 2.0 * np.einsum("kl,kl->k", f, target)
        return 0.125 * (float(wts @ quad) + const)

    def gradient(f):
        return 0.25 * wts[:, None] * (f @ ata - target)

    gp_res = gp_run(objective, gradient, new.f, gp, step=step)
    new.f = gp_res.x

    v, w = quad_coefficients(state, resp, new)
    new.a = update_loadings(v, w, new.a, pen, n)
    return new, state.empty, gp_res.step


def fit_once(data: Dataset, cfg: FitConfig, init: ModelParams,
             callback: Callable[[int, ModelParams], None] | None = None) -> FitReport:
    """Run EM from ``init`` until the penalized log likelihood stops changing.

    ``callback(iteration, params)`` is invoked after every outer update.
    """
    params = init.copy().validate()
    if params.dims != (cfg.k, cfg.l, data.n_cols):
        raise ValueError(f"initial parameters have dims {params.dims}, "
                         f"expected {(cfg.k, cfg.l, data.n_cols)}")
    pen = cfg.penalty
    resp = responsibilities(data, params)
    s = _penalized(resp, params, pen)
    if not math.isfinite(s):
        raise FitError("penalized log likelihood is not finite at the initial values")
    trace = [s]
    empty: set[int] = set()
    converged = False
    it = 0
    step = None
    for it in range(1, cfg.max_outer_iters + 1):
        params, skipped, step = em_step(data, params, resp, pen, cfg.gp, step)
        empty.update(int(k) for k in skipped)
        if callback is not None:
            callback(it, params)
        resp = responsibilities(data, params)
        s_new = _penalized(resp, params, pen)
        if not math.isfinite(s_new):
            raise FitError(f"penalized log likelihood became non-finite at iteration {it}")
        trace.append(s_new)
        if abs(s_new - s) <= cfg.outer_tol * (1.0 + abs(s)):
            converged = True
            break
        s = s_new

    params = canonicalize_signs(params)
    df = degrees_of_freedom(params)
    if empty:
        log.debug("clusters %s had negligible mass during the fit", sorted(empty))
    return FitReport(
        params=params,
        lam=pen.lam,
        loglik=resp.loglik,
        penalized=trace[-1],
        df=df,
        bic=bic_value(resp.loglik, data.n_rows, df),
        trace=trace,
        responsibilities=resp.u,
        hard_labels=resp.hard_labels(),
        n_iter=it,
        converged=converged,
        empty_clusters=tuple(sorted(empty)),
    )


def _run_start(data: Dataset, cfg: FitConfig, start: int,
               init: ModelParams | None = None) -> FitReport | Exception:
    try:
        report = fit_once(data, cfg, start_init(data, cfg, start) if init is None else init)
    except (FitError, DegenerateUpdateError, ProjectionError, FloatingPointError) as exc:
        log.debug("start %d failed: %s", start, exc)
        return exc
    report.start = start
    return report


def fit_multistart(data: Dataset, cfg: FitConfig,
                   extra_inits: Sequence[ModelParams] = ()) -> FitReport:
    """Fit from ``cfg.n_starts`` random initializations and keep the highest penalized objective.

    ``extra_inits`` are run after the random starts (numbered ``n_starts``,
    ``n_starts + 1``, ...). Ties go to the lowest start number, so the result does not
    depend on ``cfg.threads``.
    """
    jobs = [(i, None) for i in range(cfg.n_starts)]
    jobs += [(cfg.n_starts + j, init) for j, init in enumerate(extra_inits)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda job: _run_start(data, cfg, *job), jobs))
    else:
        results = [_run_start(data, cfg, *job) for job in jobs]

    best = None
    last_error = None
    for res in results:
        if isinstance(res, Exception):
            last_error = res
        elif best is None or res.penalized > best.penalized:
            best = res
    if best is None:
        raise FitError(f"all {len(jobs)} starts failed") from last_error
    return best


def lambda_max(data: Dataset, params: ModelParams) -> float:
    """Smallest L1 strength for which ``A = 0`` is a fixed point of the loading update.

    Evaluated at the E-step state of ``params``, with ``mu`` re-estimated under ``A = 0``.
    """
    resp = responsibilities(data, params)
    state = majorization_state(data, params, resp)
    zeroed = ModelParams(params.xi, params.mu, params.f, np.zeros_like(params.a))
    zeroed.mu = update_mu(state, resp, zeroed)
    v, _ = quad_coefficients(state, resp, zeroed)
    return float(np.max(np.abs(v))) / (4.0 * data.n_rows)


def default_lambda_grid(data: Dataset, cfg: FitConfig, size: int = 20, low: float = 1e-4) -> LambdaGrid:
    """``size`` log-spaced values from ``low`` up to :func:`lambda_max` of an unpenalized pilot fit."""
    pilot = fit_once(data, cfg.with_lambda(0.0), start_init(data, cfg, 0))
    high = max(lambda_max(data, pilot.params), 10.0 * low)
    return LambdaGrid(tuple(np.geomspace(low, high, size)))


def select_lambda(data: Dataset, cfg: FitConfig, grid: LambdaGrid | Sequence[float] | None = None,
                  warm_start: bool = True) -> Selection:
    """Fit every grid value and return the one with the smallest BIC.

    Ties go to the larger (sparser) value. With ``warm_start`` each value after the
    first also starts from the best fit at the previous (smaller) value, on top of the
    random starts; small random loadings are otherwise zeroed by the first threshold
    step once ``lam`` is moderate, and the sparse solutions are never reached.
    """
    if grid is None:
        grid = default_lambda_grid(data, cfg)
    elif not isinstance(grid, LambdaGrid):
        grid = LambdaGrid(tuple(grid))
    table: list[LambdaRow] = []
    best: FitReport | None = None
    previous: FitReport | None = None
    for lam in grid.values:
        extra = [previous.params] if (warm_start and previous is not None) else []
        report = fit_multistart(data, cfg.with_lambda(lam), extra_inits=extra)
        table.append(LambdaRow(lam, report.loglik, report.df, report.bic, report.nonzeros))
        log.info("lambda=%.4g bic=%.4f nonzeros=%d", lam, report.bic, report.nonzeros)
        if best is None or report.bic <= best.bic:
            best = report
        previous = report
    return Selection(best_lambda=best.lam, report=best, table=table)
