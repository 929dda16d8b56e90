"""Binary datasets: CSV input/output and synthetic generation from the mixture model."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import ModelParams, canonical_theta, inverse_logit


class DataFormatError(ValueError):
    """Raised when a data or labels file cannot be parsed."""


@dataclass(frozen=True)
class Dataset:
    """An N x D matrix of 0/1 responses together with its +-1 coding ``q = 2y - 1``."""

    y: np.ndarray
    yf: np.ndarray = field(init=False, repr=False, compare=False)
    q: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {y.shape}")
        if y.shape[0] < 1 or y.shape[1] < 1:
            raise ValueError("a dataset needs at least one row and one column")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("entries must be 0 or 1")
        y = y.astype(np.int8)
        y.setflags(write=False)
        yf = y.astype(float)
        q = 2.0 * yf - 1.0
        yf.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "yf", yf)
        object.__setattr__(self, "q", q)

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]

    @property
    def n_cols(self) -> int:
        return self.y.shape[1]

    def __eq__(self, other):
        return isinstance(other, Dataset) and np.array_equal(self.y, other.y)

    __hash__ = None


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read a comma-separated 0/1 matrix.

    Raises
    ------
    DataFormatError
        On an empty file, ragged rows, or any cell other than ``0``/``1``;
        the message carries 1-based line and column numbers.
    """
    rows: list[list[int]] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DataFormatError(
                    f"{path}: line {lineno} has {len(record)} columns, expected {width}")
            row = []
            for col, cell in enumerate(record, start=1):
                cell = cell.strip()
                if cell not in ("0", "1"):
                    raise DataFormatError(
                        f"{path}: line {lineno}, column {col}: {cell!r} is not 0 or 1")
                row.append(int(cell))
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.int8))


def write_csv(data: Dataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in data.y:
            fh.write(",".join("1" if v else "0" for v in row) + "\n")


def load_labels(path) -> np.ndarray:
    """Read a labels file: one integer per line."""
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: {line!r} is not an integer") from None
    if not labels:
        raise DataFormatError(f"{path}: no labels")
    return np.array(labels, dtype=int)


def write_labels(labels: Sequence[int], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")


# -- simulation ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationDesign:
    """Monte Carlo design: K clusters in an L-dimensional subspace, block-sparse loadings.

    ``m`` is the proportion of informative variables; the first ``D1 = floor(m D / 2)``
    variables load on component 1 with value ``c``, the next ``D1`` on component 2,
    and the remaining ``D - 2 D1`` are pure noise.
    """

    n: int
    d: int
    k: int = 3
    l: int = 2  # noqa: E741
    m: float = 1.0
    c: float = 2.5
    seed: int = 0
    xi: tuple[float, ...] | None = None
    rotate: bool = False

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.k < 1 or self.l < 1:
            raise ValueError("n, d, k and l must be positive")
        if self.l > self.k:
            raise ValueError(f"l={self.l} exceeds k={self.k}")
        if not (0 < self.m <= 1):
            raise ValueError(f"m must lie in (0, 1], got {self.m}")
        if not math.isfinite(self.c):
            raise ValueError("c must be finite")
        if self.d1 < 1:
            raise ValueError(f"m={self.m} with d={self.d} leaves no informative variables")
        if self.xi is not None:
            xi = np.asarray(self.xi, dtype=float)
            if xi.shape != (self.k,) or np.any(xi <= 0) or abs(xi.sum() - 1) > 1e-12:
                raise ValueError("xi must be k positive proportions summing to 1")

    @property
    def d1(self) -> int:
        return int(math.floor(self.m * self.d / 2))

    @property
    def d2(self) -> int:
        return self.d - 2 * self.d1


@dataclass
class SimulatedSample:
    data: Dataset
    true_labels: np.ndarray  # 1-based
    true_params: ModelParams


def orthonormalize(m: np.ndarray) -> np.ndarray:
    """Thin QR with each column's first nonzero entry made positive."""
    qmat, _ = np.linalg.qr(m)
    for j in range(qmat.shape[1]):
        nz = np.flatnonzero(np.abs(qmat[:, j]) > 1e-12)
        if nz.size and qmat[nz[0], j] < 0:
            qmat[:, j] = -qmat[:, j]
    return qmat


def equidistant_centroids(k: int, l: int) -> np.ndarray:  # noqa: E741
    """K x L centroid configuration built from the real Fourier basis on K points.

    The columns are cos/sin harmonics (orthogonal to the constant vector) with the
    constant column appended when ``l == k``. For ``l >= k - 1`` the rows are exactly
    equidistant (a rotated regular simplex, or the identity when ``l == k``); for
    smaller ``l`` the points form a regular polygon (``l = 2``) or its truncation.
    """
    idx = np.arange(k)
    cols = []
    for j in range(1, k // 2 + 1):
        cols.append(np.cos(2 * np.pi * j * idx / k))
        if 2 * j != k:
            cols.append(np.sin(2 * np.pi * j * idx / k))
    cols.append(np.ones(k))
    basis = np.column_stack(cols)
    return basis[:, :l]


def block_loadings(d: int, d1: int, c: float, l: int) -> np.ndarray:  # noqa: E741
    a = np.zeros((d, l))
    a[:d1, 0] = c
    if l > 1:
        a[d1:2 * d1, 1] = c
    return a


def simulate(design: SimulationDesign) -> SimulatedSample:
    """Draw a sample from the mixture with zero ``mu``, block loadings and equidistant centroids."""
    rng = np.random.default_rng(design.seed)
    f = equidistant_centroids(design.k, design.l)
    f = orthonormalize(f)
    if design.rotate:
        rot = orthonormalize(rng.standard_normal((design.l, design.l)))
        f = f @ rot
    xi = np.full(design.k, 1.0 / design.k) if design.xi is None else np.asarray(design.xi, float)
    params = ModelParams(xi=xi, mu=np.zeros(design.d), f=f,
                         a=block_loadings(design.d, design.d1, design.c, design.l))
    params.validate(ortho_tol=1e-10)
    labels = rng.choice(design.k, size=design.n, p=xi)
    prob = inverse_logit(canonical_theta(params))[labels]
    y = (rng.random((design.n, design.d)) < prob).astype(np.int8)
    return SimulatedSample(Dataset(y), labels + 1, params)
