"""Exact Gaussian path synthesis: Brownian motion, fractional Brownian motion
with Hurst index in (1/2, 1), and their independent sum (the mixed process).

fBm on an equidistant grid is drawn by circulant embedding of the stationary
increment covariance (Davies-Harte), which is exact in distribution.  Grids
that are not equidistant fall back to a Cholesky factorization of the dense
path covariance.

Randomness is derived from a ``Seed`` (base, replicate index) through
``numpy.random.SeedSequence`` spawn keys, so replicate ``r`` draws the same
numbers no matter how many other replicates run or in which order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

__all__ = [
    "Hurst",
    "TimeGrid",
    "SamplePath",
    "Seed",
    "FactorizationError",
    "make_equidistant_grid",
    "fbm_covariance",
    "fgn_autocovariance",
    "sample_fbm",
    "sample_brownian",
    "sample_mixed",
    "write_path_csv",
    "read_path_csv",
]

# Relative size of a negative circulant eigenvalue that is treated as rounding.
EIGEN_CLAMP_TOL = 1e-10

_STREAM_BROWNIAN = 0
_STREAM_FBM = 1


class FactorizationError(ArithmeticError):
    """Raised when no valid square root of a covariance matrix is found."""


def Hurst(value: float) -> float:
    """Validate a Hurst index, which must lie strictly inside (1/2, 1)."""
    value = float(value)
    if not 0.5 < value < 1.0:
        raise ValueError(f"Hurst index must lie in (1/2, 1), got {value}")
    return value


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Sample times ``0 = t_0 < t_1 < ... < t_n = T``.

    ``equidistant`` is set only by :func:`make_equidistant_grid` (and by
    dyadic coarsening of such a grid); it unlocks the FFT code paths.
    """

    times: np.ndarray
    equidistant: bool = False

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a grid needs at least two points")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.times.size - 1

    @property
    def step(self) -> float:
        if not self.equidistant:
            raise ValueError("grid is not equidistant")
        return self.T / self.n

    def increments(self) -> np.ndarray:
        return np.diff(self.times)

    def coarsen(self, factor: int) -> "TimeGrid":
        """Every ``factor``-th point; ``factor`` must divide ``n``."""
        if factor < 1 or self.n % factor:
            raise ValueError(f"factor {factor} does not divide n={self.n}")
        return TimeGrid(self.times[::factor], equidistant=self.equidistant)

    def refine(self) -> "TimeGrid":
        """Dyadic refinement of an equidistant grid (contains every old point)."""
        if not self.equidistant:
            raise ValueError("dyadic refinement needs an equidistant grid")
        return make_equidistant_grid(self.T, 2 * self.n)

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.times.shape == other.times.shape
            and bool(np.array_equal(self.times, other.times))
        )

    def __len__(self):
        return self.times.size


def make_equidistant_grid(T: float, n: int) -> TimeGrid:
    """Grid ``{kT/n : k = 0..n}`` with each point rounded once from ``k*T/n``."""
    if not T > 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    t = np.arange(n + 1, dtype=float) * float(T) / n
    t[-1] = float(T)
    return TimeGrid(t, equidistant=True)


@dataclass(frozen=True)
class Seed:
    """Base seed plus replicate index; ``rng(stream)`` gives an independent
    substream for each constituent process."""

    base: int
    index: int = 0

    def __post_init__(self):
        if self.base < 0 or self.index < 0:
            raise ValueError("seed components must be nonnegative")

    def rng(self, stream: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.base, spawn_key=(self.index, stream))
        return np.random.Generator(np.random.PCG64(ss))

    def replicate(self, index: int) -> "Seed":
        return Seed(self.base, index)


SeedLike = Union[Seed, int]


def _as_seed(seed: SeedLike) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Process values on a grid; ``kind`` is ``brownian``, ``fbm`` or ``mixed``."""

    grid: TimeGrid
    values: np.ndarray
    kind: str = "mixed"
    H: Optional[float] = None
    seed: Optional[Seed] = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.times.shape:
            raise ValueError(
                f"{v.size} values for a grid of {self.grid.times.size} points"
            )
        if self.kind not in ("brownian", "fbm", "mixed"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def restrict(self, sub: TimeGrid) -> "SamplePath":
        """The same path observed only at the points of ``sub``."""
        idx = subgrid_indices(self.grid, sub)
        return SamplePath(sub, self.values[idx], self.kind, self.H, self.seed)


def subgrid_indices(grid: TimeGrid, sub: TimeGrid) -> np.ndarray:
    """Indices of ``sub``'s points inside ``grid``.

    Points match up to a relative 1e-12 of the horizon, which absorbs the
    different roundings of ``k*T/n`` and ``(k*m)*T/(n*m)``.
    """
    t = grid.times
    s = sub.times
    tol = 1e-12 * max(grid.T, 1.0)
    idx = np.clip(np.searchsorted(t, s), 0, t.size - 1)
    left = np.clip(idx - 1, 0, t.size - 1)
    pick = np.where(np.abs(t[left] - s) < np.abs(t[idx] - s), left, idx)
    if np.any(np.abs(t[pick] - s) > tol):
        raise ValueError("sub-grid is not contained in the path's grid")
    return pick


def fbm_covariance(s, t, H: float):
    """``Cov(B^H_s, B^H_t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be nonnegative")
    h2 = 2.0 * H
    out = 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
    return out if out.ndim else float(out)


def fgn_autocovariance(k, H: float) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at integer lags."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def _circulant_sqrt_eigs(n: int, H: float) -> Optional[np.ndarray]:
    """Scaled square roots of the circulant eigenvalues, or None when the
    embedding is not nonnegative definite."""
    gamma = fgn_autocovariance(np.arange(n + 1), H)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.rfft(row).real
    top = eig.max()
    if eig.min() < -EIGEN_CLAMP_TOL * top:
        return None
    eig = np.clip(eig, 0.0, None)
    return np.sqrt(eig / row.size)


def _fgn_circulant(n: int, H: float, rng: np.random.Generator,
                   sqrt_eig: np.ndarray) -> np.ndarray:
    m = 2 * n
    z = rng.standard_normal(m)
    # Hermitian-symmetric complex Gaussian spectrum from m real normals.
    w = np.empty(n + 1, dtype=complex)
    w[0] = z[0]
    w[n] = z[1]
    w[1:n] = (z[2:n + 1] + 1j * z[n + 1:]) / np.sqrt(2.0)
    x = np.fft.irfft(sqrt_eig * w, n=m) * m
    return x[:n]


def _fbm_dense(grid: TimeGrid, H: float, rng: np.random.Generator) -> np.ndarray:
    t = grid.times[1:]
    cov = fbm_covariance(t[:, None], t[None, :], H)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        lo = float(np.linalg.eigvalsh(cov).min())
        raise FactorizationError(
            f"fBm covariance on {t.size} points is not positive definite "
            f"(smallest eigenvalue {lo:.3e}, H={H}, mesh "
            f"{grid.increments().min():.3e})"
        ) from exc
    return np.concatenate([[0.0], chol @ rng.standard_normal(t.size)])


def sample_fbm(grid: TimeGrid, H: float, seed: SeedLike, *,
               method: str = "auto", _stream: int = _STREAM_FBM) -> SamplePath:
    """Draw fractional Brownian motion on ``grid``.

    Parameters
    ----------
    grid : TimeGrid
    H : float
        Hurst index in (1/2, 1).
    seed : Seed or int
    method : {"auto", "circulant", "dense"}
        ``auto`` uses circulant embedding on equidistant grids and falls back
        to the dense Cholesky factorization otherwise, or when the embedding
        has eigenvalues below ``-1e-10 * max``.
    """
    H = Hurst(H)
    seed = _as_seed(seed)
    rng = seed.rng(_stream)
    if method not in ("auto", "circulant", "dense"):
        raise ValueError(f"unknown method {method!r}")
    values = None
    if method != "dense" and grid.equidistant:
        sqrt_eig = _circulant_sqrt_eigs(grid.n, H)
        if sqrt_eig is not None:
            fgn = _fgn_circulant(grid.n, H, rng, sqrt_eig)
            values = np.concatenate([[0.0], np.cumsum(fgn * grid.step**H)])
        elif method == "circulant":
            raise FactorizationError("circulant embedding is not nonnegative")
    elif method == "circulant":
        raise ValueError("circulant embedding needs an equidistant grid")
    if values is None:
        values = _fbm_dense(grid, H, rng)
    return SamplePath(grid, values, "fbm", H, seed)


def sample_brownian(grid: TimeGrid, seed: SeedLike, *,
                    _stream: int = _STREAM_BROWNIAN) -> SamplePath:
    seed = _as_seed(seed)
    rng = seed.rng(_stream)
    dw = rng.standard_normal(grid.n) * np.sqrt(grid.increments())
    values = np.concatenate([[0.0], np.cumsum(dw)])
    return SamplePath(grid, values, "brownian", None, seed)


def sample_mixed(grid: TimeGrid, H: float, seed: SeedLike):
    """Return ``(mixed, w, fbm)`` with ``mixed = w + fbm`` pointwise.

    The two constituents come from independent substreams of ``seed``.
    """
    seed = _as_seed(seed)
    w = sample_brownian(grid, seed)
    b = sample_fbm(grid, H, seed)
    mixed = SamplePath(grid, w.values + b.values, "mixed", b.H, seed)
    return mixed, w, b


def write_path_csv(path: SamplePath, fh, comments=()) -> None:
    """Write ``t,value`` rows with 17 significant digits.

    Column names go into the comment block so the first data row is the
    first uncommented line (``0,0`` for a path started at the origin).
    """
    for line in comments:
        fh.write(f"# {line}\n")
    fh.write("# columns: t,value\n")
    for t, x in zip(path.times, path.values):
        fh.write(f"{t:.17g},{x:.17g}\n")


def read_path_csv(fh, kind: str = "mixed", H: Optional[float] = None) -> SamplePath:
    """Inverse of :func:`write_path_csv`; a plain ``t,value`` header line is
    also accepted."""
    rows = [r for r in csv.reader(line for line in fh
                                  if line.strip() and not line.startswith("#"))]
    if rows and [c.strip() for c in rows[0]] == ["t", "value"]:
        rows = rows[1:]
    try:
        data = np.array([[float(a), float(b)] for a, b in rows])
    except ValueError as exc:
        raise ValueError(f"expected numeric 't,value' rows ({exc})") from None
    if data.shape[0] < 2:
        raise ValueError("a path needs at least two rows")
    grid = TimeGrid(data[:, 0])
    n = grid.n
    # Recognise equidistant dumps so the FFT paths apply after a round trip.
    if np.array_equal(grid.times, make_equidistant_grid(grid.T, n).times):
        grid = make_equidistant_grid(grid.T, n)
    return SamplePath(grid, data[:, 1], kind, H)
