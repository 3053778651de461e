"""Reproducible Monte Carlo studies and their CSV outputs.

Every replicate ``r`` draws its paths from ``Seed(config.seed, r)``, runs as
an independent task and is gathered back in replicate order, so outputs are
byte-identical for any ``threads`` value.

Config files are flat ``key = value`` text, one key per line, ``#`` starts a
comment.  Keys are exactly the :class:`ExperimentConfig` field names; list
values (``L_grid``, ``n_ladder``) are comma separated.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .integrals import realized_qv
from .moments import (MomentReport, randomized_bias, rqv_bias_equidistant,
                      rqv_variance_equidistant)
from .paths import Hurst, Seed, make_equidistant_grid, sample_mixed
from .periodogram import (QuadratureSpec, fubini_pair, parse_xi,
                          randomized_periodogram)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "EstimateRecord",
    "load_config",
    "run_convergence",
    "run_rqv_bias",
    "run_rqv_variance",
    "run_randomized_bias",
    "run_fubini_check",
    "run_refinement",
    "write_records_csv",
    "write_summary_csv",
]

KINDS = ("convergence", "rqv_bias", "rqv_variance", "randomized_bias",
         "fubini", "refinement")
METHODS = ("kernel", "quadrature", "mc")
COMPONENTS = ("mixed", "brownian", "fbm")
EPSILONS = (0.1, 0.3)


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _float_list(text) -> Tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _int_list(text) -> Tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one experiment.  ``out``, ``records`` and ``threads``
    never change the numbers and are left out of :meth:`header_lines`."""

    kind: str = "convergence"
    T: float = 1.0
    n: int = 4096
    H: float = 0.75
    xi: str = "gaussian:1"
    L_grid: Tuple[float, ...] = (1.0, 10.0, 100.0, 1000.0)
    replicates: int = 200
    seed: Optional[int] = None
    out: Optional[str] = None
    records: Optional[str] = None
    quad_nodes: Optional[int] = None
    threads: int = 1
    n_ladder: Tuple[int, ...] = ()
    method: str = "kernel"
    component: str = "mixed"
    mc_draws: int = 256

    _PARSERS = {
        "kind": str, "T": float, "n": int, "H": float, "xi": str,
        "L_grid": _float_list, "replicates": int, "seed": int, "out": str, "records": str,
        "quad_nodes": int, "threads": int, "n_ladder": _int_list,
        "method": str, "component": str, "mc_draws": int,
    }

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, raw: dict, base: "ExperimentConfig" = None) -> "ExperimentConfig":
        values = {}
        for key, text in raw.items():
            if key not in cls._PARSERS:
                raise ConfigError(key, "unknown key")
            try:
                values[key] = cls._PARSERS[key](text)
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, f"cannot parse {text!r} ({exc})") from None
        return replace(base or cls(), **values)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        if not self.T > 0:
            raise ConfigError("T", "must be positive")
        if self.n < 1:
            raise ConfigError("n", "must be at least 1")
        try:
            Hurst(self.H)
        except ValueError as exc:
            raise ConfigError("H", str(exc)) from None
        try:
            parse_xi(self.xi)
        except ValueError as exc:
            raise ConfigError("xi", str(exc)) from None
        L = self.L_grid
        if not L or any(v < 0 for v in L) or any(b <= a for a, b in zip(L, L[1:])):
            raise ConfigError("L_grid", "must be nonempty, nonnegative and strictly increasing")
        if self.replicates < 1:
            raise ConfigError("replicates", "must be at least 1")
        if self.seed is None or self.seed < 0:
            raise ConfigError("seed", "a nonnegative seed is required")
        if self.quad_nodes is not None and self.quad_nodes < 1:
            raise ConfigError("quad_nodes", "must be positive")
        if self.threads < 1:
            raise ConfigError("threads", "must be at least 1")
        if any(m < 1 for m in self.n_ladder):
            raise ConfigError("n_ladder", "entries must be positive")
        if self.kind == "refinement":
            if not _is_pow2(self.n):
                raise ConfigError("n", "dyadic refinement needs a power of two")
            if any(not _is_pow2(m) or m > self.n for m in self.n_ladder):
                raise ConfigError("n_ladder", "levels must be powers of two not above n")
        if self.method not in METHODS:
            raise ConfigError("method", f"must be one of {', '.join(METHODS)}")
        if self.component not in COMPONENTS:
            raise ConfigError("component", f"must be one of {', '.join(COMPONENTS)}")
        if self.mc_draws < 2:
            raise ConfigError("mc_draws", "must be at least 2")
        if self.method == "quadrature" and self.kind in ("convergence", "randomized_bias"):
            try:
                self.quadrature.rule_for(self.randomizer)
            except ValueError as exc:
                raise ConfigError("quad_nodes", str(exc)) from None
        return self

    def header_lines(self):
        lines = []
        for key in self.keys():
            if key in ("out", "records", "threads"):
                continue
            v = getattr(self, key)
            if isinstance(v, tuple):
                v = ",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = f"{v:.17g}"
            lines.append(f"{key} = {'' if v is None else v}")
        return lines

    @property
    def randomizer(self):
        return parse_xi(self.xi)

    @property
    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec.default_for(self.randomizer, self.quad_nodes)


def load_config(path: str) -> dict:
    """Read a flat ``key = value`` file into a dict of strings."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(key or f"line {lineno}", "expected 'key = value'")
            if key not in ExperimentConfig._PARSERS:
                raise ConfigError(key, "unknown key")
            raw[key] = value.strip()
    return raw


class EstimateRecord(NamedTuple):
    replicate: int
    seed: int
    estimator: str
    param: float       # L, or grid size for refinement
    value: float
    quality: float = 0.0

    def row(self):
        return [str(self.replicate), str(self.seed), self.estimator,
                f"{self.param:.17g}", f"{self.value:.17g}", f"{self.quality:.17g}"]


RECORD_HEADER = ["replicate", "seed", "estimator", "param", "value", "quality"]


def _map_replicates(cfg: ExperimentConfig, fn) -> list:
    idx = range(cfg.replicates)
    if cfg.threads == 1:
        return [fn(r) for r in idx]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, idx))


def _component(paths, name):
    mixed, w, b = paths
    return {"mixed": mixed, "brownian": w, "fbm": b}[name]


def _summary_stats(values: np.ndarray, target: float) -> dict:
    dev = np.abs(values - target)
    out = {
        "mean": float(np.mean(values)),
        "median": float(np.median(values)),
        "mad": float(np.median(dev)),
        "mean_abs_dev": float(np.mean(dev)),
    }
    for eps in EPSILONS:
        out[f"frac_gt_{eps:g}"] = float(np.mean(dev > eps))
    return out


# -- convergence of the randomized periodogram ------------------------------

def run_convergence(cfg: ExperimentConfig):
    """Randomized periodogram on each replicate for every ``L`` in the grid.

    Returns ``(records, summary)``; ``summary`` has one dict per ``L`` with
    mean, median, ``mad`` (median of ``|est - T|``), ``mean_abs_dev`` and the
    fractions of replicates with ``|est - T|`` above 0.1 and 0.3.  Realized
    quadratic variation of each path is recorded alongside (estimator
    ``rqv``) but not summarized.
    """
    cfg.validate()
    grid = make_equidistant_grid(cfg.T, cfg.n)
    xi = cfg.randomizer
    quad = cfg.quadrature

    def one(r):
        seed = Seed(cfg.seed, r)
        path = sample_mixed(grid, cfg.H, seed)[0]
        rng = seed.rng(2)
        recs = [EstimateRecord(r, cfg.seed, "rqv", math.nan, realized_qv(path))]
        for L in cfg.L_grid:
            est = randomized_periodogram(path, L, xi, quad, method=cfg.method,
                                         rng=rng, draws=cfg.mc_draws)
            recs.append(EstimateRecord(r, cfg.seed, f"rp_{est.method}", L,
                                       est.value, est.rel_change))
        return recs

    records = [rec for recs in _map_replicates(cfg, one) for rec in recs]
    return records, summarize_convergence(records, cfg.L_grid, cfg.T)


def summarize_convergence(records, L_grid, T):
    summary = []
    for L in L_grid:
        vals = np.array([r.value for r in records
                         if r.estimator.startswith("rp_") and r.param == L])
        row = {"L": L}
        row.update(_summary_stats(vals, T))
        summary.append(row)
    return summary


# -- realized quadratic variation: bias and variance ------------------------

def _ladder(cfg: ExperimentConfig, default=(8, 16, 32)):
    return cfg.n_ladder or default


def _rqv_errors(cfg: ExperimentConfig, n: int) -> np.ndarray:
    grid = make_equidistant_grid(cfg.T, n)
    target = 0.0 if cfg.component == "fbm" else cfg.T

    def one(r):
        paths = sample_mixed(grid, cfg.H, Seed(cfg.seed, r))
        return realized_qv(_component(paths, cfg.component)) - target

    return np.array(_map_replicates(cfg, one))


def _rqv_bias_closed(cfg, n):
    if cfg.component == "brownian":
        return 0.0
    return rqv_bias_equidistant(cfg.T, n, cfg.H)


def run_rqv_bias(cfg: ExperimentConfig) -> List[MomentReport]:
    """Monte Carlo mean of ``RQV - T`` against ``T^{2H} n^{1-2H}`` per ``n``."""
    cfg.validate()
    reports = []
    for n in _ladder(cfg):
        e = _rqv_errors(cfg, n)
        se = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else math.nan
        reports.append(MomentReport(f"rqv_bias_{cfg.component}", cfg.T, n, cfg.H, "",
                                    _rqv_bias_closed(cfg, n), float(e.mean()), se))
    return reports


def variance_with_se(x: np.ndarray):
    """Unbiased sample variance and its delta-method standard error
    ``sqrt((m4 - s^4) / M)``."""
    x = np.asarray(x, dtype=float)
    m = x.size
    c = x - x.mean()
    s2 = float(np.dot(c, c) / (m - 1))
    m4 = float(np.mean(c**4))
    return s2, math.sqrt(max(m4 - s2 * s2, 0.0) / m)


def run_rqv_variance(cfg: ExperimentConfig) -> List[MomentReport]:
    """Sample variance of ``RQV - T`` per ``n`` against both the verbatim
    closed form and the variant with a doubled cross sum."""
    cfg.validate()
    if cfg.component != "mixed":
        raise ConfigError("component", "the variance formula is for the mixed process")
    reports = []
    for n in _ladder(cfg):
        var, se = variance_with_se(_rqv_errors(cfg, n))
        for name, adjusted in (("rqv_variance", False), ("rqv_variance_adjusted", True)):
            closed = rqv_variance_equidistant(cfg.T, n, cfg.H, adjusted=adjusted)
            reports.append(MomentReport(name, cfg.T, n, cfg.H, "", closed, var, se))
    return reports


# -- randomized periodogram bias --------------------------------------------

def run_randomized_bias(cfg: ExperimentConfig):
    """Monte Carlo mean of ``E_xi I_T(X; L xi) - T`` against the closed form.

    Returns ``(reports, records)``.
    """
    records, _ = run_convergence(replace(cfg, kind="convergence"))
    xi = cfg.randomizer
    reports = []
    for L in cfg.L_grid:
        e = np.array([r.value for r in records
                      if r.estimator.startswith("rp_") and r.param == L]) - cfg.T
        se = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else math.nan
        closed = randomized_bias(cfg.T, cfg.H, L, xi)
        reports.append(MomentReport("randomized_bias", cfg.T, L, cfg.H, str(xi),
                                    closed, float(e.mean()), se))
    return reports, records


# -- discrete Fubini exactness ----------------------------------------------

class FubiniResult(NamedTuple):
    passed: bool
    max_deviation: float
    worst_seed: Tuple[int, int]
    records: list


def fubini_nodes(cfg: ExperimentConfig):
    """Gauss-Legendre nodes on ``[-N, N]`` with density-scaled weights;
    ``N = 8 * scale`` (the support edge for the uniform law)."""
    xi = cfg.randomizer
    N = xi.scale if xi.family == "uniform" else 8.0 * xi.scale
    m = cfg.quad_nodes or 64
    z, w = np.polynomial.legendre.leggauss(m)
    x = N * z
    return x, N * w * xi.density(x)


def run_fubini_check(cfg: ExperimentConfig, tol: float = 1e-10) -> FubiniResult:
    """Exchange the x-quadrature and the t-sum; both orders must agree to
    ``|I1 - I2| / (1 + |I1|) < tol`` on every replicate."""
    cfg.validate()
    grid = make_equidistant_grid(cfg.T, cfg.n)
    x, w = fubini_nodes(cfg)

    def one(r):
        _, wp, bp = sample_mixed(grid, cfg.H, Seed(cfg.seed, r))
        i1, i2 = fubini_pair(wp, bp, x, w)
        dev = abs(i1 - i2) / (1.0 + abs(i1))
        return EstimateRecord(r, cfg.seed, "fubini", cfg.n, i1.real, dev), i1, i2

    out = _map_replicates(cfg, one)
    records = [rec for rec, _, _ in out]
    devs = [rec.quality for rec in records]
    worst = int(np.argmax(devs))
    return FubiniResult(max(devs) < tol, float(max(devs)), (cfg.seed, worst), records)


# -- dyadic refinement of realized quadratic variation ----------------------

def run_refinement(cfg: ExperimentConfig):
    """Realized quadratic variation of one finest path per replicate,
    restricted to each coarser dyadic level.

    Returns ``(records, summary)``; the target is ``T`` for the mixed and
    Brownian components and 0 for the fBm component.
    """
    cfg.validate()
    grid = make_equidistant_grid(cfg.T, cfg.n)
    levels = cfg.n_ladder or tuple(2**k for k in range(4, int(math.log2(cfg.n)) + 1))
    target = 0.0 if cfg.component == "fbm" else cfg.T

    def one(r):
        path = _component(sample_mixed(grid, cfg.H, Seed(cfg.seed, r)), cfg.component)
        return [EstimateRecord(r, cfg.seed, f"rqv_{cfg.component}", m,
                               realized_qv(path, grid.coarsen(cfg.n // m)))
                for m in levels]

    records = [rec for recs in _map_replicates(cfg, one) for rec in recs]
    summary = []
    for m in levels:
        err = np.array([r.value for r in records if r.param == m]) - target
        summary.append({
            "level": m,
            "target": target,
            "mean_error": float(err.mean()),
            "mean_abs_error": float(np.mean(np.abs(err))),
            "mad": float(np.median(np.abs(err))),
        })
    return records, summary


# -- writers ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_records_csv(records, fh, comments=()):
    for line in comments:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        w.writerow(r.row())


def write_summary_csv(summary, fh, comments=()):
    for line in comments:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    if not summary:
        return
    keys = list(summary[0])
    w.writerow(keys)
    for row in summary:
        w.writerow([_fmt(row[k]) for k in keys])
