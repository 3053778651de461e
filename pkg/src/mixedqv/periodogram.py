"""Periodogram of a sample path and its randomized version.

``periodogram`` uses the integration-by-parts form of the oscillatory
integral; ``periodogram_rs`` uses the left-point Riemann-Stieltjes sum.  The
randomized periodogram averages the periodogram at frequency ``L*x`` over the
law of a symmetric randomizer ``xi``.  Three evaluation methods exist:

``quadrature``
    A deterministic rule over the density of ``xi`` (Gauss-Hermite for a
    Gaussian law, truncated composite Simpson otherwise), always run at two
    resolutions so the relative change can be audited.
``kernel``
    The exact expectation of the left-point periodogram,
    ``RQV + 2 Re sum_{j<k} phi(L (t_{k-1} - t_{j-1})) dX_j dX_k``.  This is
    what the quadrature converges to, computed in O(n log n) and usable at
    any ``L``.
``mc``
    Experimental: average over independent draws of ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import ndtri

from .integrals import (iterated_double_integral, oscillatory_integral_ibp,
                        oscillatory_integral_rs, realized_qv)
from .paths import SamplePath

__all__ = [
    "RandomizerSpec",
    "QuadratureSpec",
    "RandomizedPeriodogram",
    "parse_xi",
    "periodogram",
    "periodogram_rs",
    "periodogram_expanded",
    "randomized_periodogram",
    "spectral_error_term",
    "fubini_pair",
]

FAMILIES = ("gaussian", "uniform", "laplace")

# Rows of the frequency-by-time matrix built at once.
_CHUNK = 64


@dataclass(frozen=True)
class RandomizerSpec:
    """Law of the symmetric randomizer ``xi``.

    gaussian:sigma -> N(0, sigma^2), phi(u) = exp(-sigma^2 u^2 / 2)
    uniform:a      -> U[-a, a],      phi(u) = sin(a u) / (a u)
    laplace:beta   -> density exp(-|x|/beta) / (2 beta), phi(u) = 1 / (1 + beta^2 u^2)
    """

    family: str
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown randomizer family {self.family!r}")
        if not self.scale > 0:
            raise ValueError(f"randomizer scale must be positive, got {self.scale}")

    def __str__(self):
        return f"{self.family}:{self.scale:g}"

    def density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.family == "gaussian":
            return np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))
        if self.family == "uniform":
            return np.where(np.abs(x) <= s, 0.5 / s, 0.0)
        return np.exp(-np.abs(x) / s) / (2 * s)

    def char_fn(self, u):
        u = np.asarray(u, dtype=float)
        s = self.scale
        if self.family == "gaussian":
            return np.exp(-0.5 * (s * u) ** 2)
        if self.family == "uniform":
            # np.sinc(z) = sin(pi z)/(pi z) with the removable point filled in.
            return np.sinc(s * u / np.pi)
        return 1.0 / (1.0 + (s * u) ** 2)

    @property
    def second_moment(self) -> float:
        s = self.scale
        return {"gaussian": s * s, "uniform": s * s / 3.0, "laplace": 2.0 * s * s}[self.family]

    def sample(self, rng: np.random.Generator, size):
        s = self.scale
        if self.family == "gaussian":
            return rng.normal(0.0, s, size)
        if self.family == "uniform":
            return rng.uniform(-s, s, size)
        return rng.laplace(0.0, s, size)

    def tail_bound(self, mass: float) -> float:
        """``q`` with ``P(|xi| > q) = mass``."""
        s = self.scale
        if self.family == "gaussian":
            return float(-s * ndtri(0.5 * mass))
        if self.family == "uniform":
            return s
        return float(s * math.log(1.0 / mass))

    def decay_cutoff(self, eps: float = 1e-17) -> Optional[float]:
        """``v`` beyond which ``|phi| <= eps``, or None for slowly decaying laws."""
        if self.family == "gaussian":
            return math.sqrt(2.0 * math.log(1.0 / eps)) / self.scale
        return None


def parse_xi(text: str) -> RandomizerSpec:
    """Parse ``gaussian:1``, ``uniform:2``, ``laplace:0.5`` (scale defaults to 1)."""
    family, _, scale = str(text).strip().partition(":")
    family = family.strip().lower()
    try:
        value = float(scale) if scale else 1.0
    except ValueError:
        raise ValueError(f"bad randomizer scale in {text!r}") from None
    return RandomizerSpec(family, value)


@dataclass(frozen=True)
class QuadratureSpec:
    """``hermite`` (Gaussian laws only) or ``simpson`` on ``[-q, q]`` where
    ``q`` cuts off tail mass ``tail``.  Simpson node counts must be odd."""

    rule: str = "hermite"
    nodes: int = 64
    tail: float = 1e-8

    def __post_init__(self):
        if self.rule not in ("hermite", "simpson"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes < 3:
            raise ValueError("a quadrature needs at least 3 nodes")
        if self.rule == "simpson" and self.nodes % 2 == 0:
            raise ValueError("composite Simpson needs an odd node count")

    @classmethod
    def default_for(cls, xi: RandomizerSpec, nodes: Optional[int] = None) -> "QuadratureSpec":
        if xi.family == "gaussian":
            return cls("hermite", nodes or 64)
        nodes = nodes or 513
        return cls("simpson", nodes + 1 - nodes % 2)

    def doubled(self) -> "QuadratureSpec":
        if self.rule == "hermite":
            return QuadratureSpec(self.rule, 2 * self.nodes, self.tail)
        return QuadratureSpec(self.rule, 2 * self.nodes - 1, self.tail)

    def rule_for(self, xi: RandomizerSpec):
        """Nodes and nonnegative weights (summing to 1) for ``E f(xi)``."""
        if self.rule == "hermite":
            if xi.family != "gaussian":
                raise ValueError("Gauss-Hermite applies to Gaussian randomizers only")
            z, w = np.polynomial.hermite_e.hermegauss(self.nodes)
            return xi.scale * z, w / w.sum()
        q = xi.tail_bound(self.tail)
        x = np.linspace(-q, q, self.nodes)
        h = x[1] - x[0]
        w = np.ones(self.nodes)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0 * xi.density(x)
        # A kink of the density at 0 sits on a panel boundary for odd counts.
        return x, w / w.sum()


class RandomizedPeriodogram(NamedTuple):
    value: float
    rel_change: float
    method: str


def periodogram(path: SamplePath, lam: float) -> float:
    """``|int_0^T e^{i lam t} dX_t|^2`` via integration by parts."""
    return abs(oscillatory_integral_ibp(path, lam)) ** 2


def periodogram_rs(path: SamplePath, lam: float) -> float:
    """``|sum_k e^{i lam t_{k-1}} dX_k|^2``."""
    return abs(oscillatory_integral_rs(path, lam)) ** 2


def periodogram_expanded(path: SamplePath, lam: float) -> float:
    """Three-term expansion

    ``X_T^2 + X_T int i lam (e^{i lam (T-t)} - e^{-i lam (T-t)}) X_t dt
    + lam^2 |int e^{i lam t} X_t dt|^2``

    with trapezoid integrals, evaluated independently of :func:`periodogram`.
    Assumes ``X_0 = 0``.
    """
    t = path.times
    x = path.values
    T = t[-1]
    xT = x[-1]
    dt = np.diff(t)

    def trapz(f):
        return np.dot(0.5 * (f[1:] + f[:-1]), dt)

    cross = trapz(1j * lam * (np.exp(1j * lam * (T - t)) - np.exp(-1j * lam * (T - t))) * x)
    if abs(cross.imag) > 1e-10 * max(1.0, abs(cross.real)):
        raise ArithmeticError(f"middle term has imaginary residue {cross.imag:.3e}")
    fourier = trapz(np.exp(1j * lam * t) * x)
    return float(xT * xT + xT * cross.real + lam * lam * abs(fourier) ** 2)


def _periodogram_many(path: SamplePath, lams: np.ndarray, form: str) -> np.ndarray:
    t = path.times
    x = path.values
    out = np.empty(lams.size)
    if form == "rs":
        dx = path.increments()
        for i in range(0, lams.size, _CHUNK):
            lam = lams[i:i + _CHUNK, None]
            ph = lam * t[None, :-1]
            re = np.cos(ph) @ dx
            im = np.sin(ph) @ dx
            out[i:i + _CHUNK] = re * re + im * im
    elif form == "ibp":
        wts = np.zeros_like(t)
        dt = np.diff(t)
        wts[:-1] += 0.5 * dt
        wts[1:] += 0.5 * dt
        T = t[-1]
        for i in range(0, lams.size, _CHUNK):
            lam = lams[i:i + _CHUNK]
            riemann = np.exp(1j * lam[:, None] * t[None, :]) @ (wts * x)
            y = np.exp(1j * lam * T) * x[-1] - x[0] - 1j * lam * riemann
            out[i:i + _CHUNK] = np.abs(y) ** 2
    else:
        raise ValueError(f"unknown periodogram form {form!r}")
    return out


def randomized_periodogram(path: SamplePath, L: float, xi: RandomizerSpec,
                           quad: Optional[QuadratureSpec] = None, *,
                           method: str = "quadrature", form: str = "rs",
                           rng: Optional[np.random.Generator] = None,
                           draws: int = 256) -> RandomizedPeriodogram:
    """``E_xi I_T(X; L xi) = int I_T(X; L x) g_xi(x) dx``.

    Parameters
    ----------
    path : SamplePath
    L : float
        Frequency scale, ``L >= 0``.
    xi : RandomizerSpec
    quad : QuadratureSpec, optional
        Defaults to :meth:`QuadratureSpec.default_for`.
    method : {"quadrature", "kernel", "mc"}
        See the module docstring.  ``mc`` needs ``rng``.
    form : {"rs", "ibp"}
        Periodogram discretization integrated by the quadrature and mc
        methods.  The kernel method is exact for ``rs`` only.

    Returns
    -------
    RandomizedPeriodogram
        ``value`` plus ``rel_change``, the relative difference between the
        rule and its doubled version (0 for the kernel method, the standard
        error relative to the value for mc).
    """
    if L < 0:
        raise ValueError(f"L must be nonnegative, got {L}")
    if method == "kernel":
        if form != "rs":
            raise ValueError("the kernel method is exact for the left-point form only")
        value = realized_qv(path) + spectral_error_term(path, L, xi)
        return RandomizedPeriodogram(value, 0.0, "kernel")
    if method == "mc":
        if rng is None:
            raise ValueError("method='mc' needs an rng")
        vals = _periodogram_many(path, L * xi.sample(rng, draws), form)
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
        return RandomizedPeriodogram(mean, se / mean if mean else 0.0, "mc")
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    quad = quad or QuadratureSpec.default_for(xi)
    values = []
    for q in (quad, quad.doubled()):
        x, w = q.rule_for(xi)
        if np.any(w < 0):
            raise ArithmeticError("negative quadrature weight")
        values.append(float(np.dot(w, _periodogram_many(path, L * x, form))))
    coarse, fine = values
    rel = abs(fine - coarse) / abs(fine) if fine else abs(fine - coarse)
    return RandomizedPeriodogram(coarse, rel, "quadrature")


def spectral_error_term(path: SamplePath, L: float, xi: RandomizerSpec) -> float:
    """``2 sum_{j<k} phi(L (t_{k-1} - t_{j-1})) dX_j dX_k``: the randomized
    periodogram minus the realized quadratic variation."""
    # Real kernel, so the double sum is real up to rounding.
    return 2.0 * iterated_double_integral(lambda u: xi.char_fn(L * u), path).real


def fubini_pair(w: SamplePath, b: SamplePath, x: np.ndarray, weights: np.ndarray):
    """Both orders of ``sum_x weights(x) sum_t phi_W(t, x) dB_t``.

    ``phi_W(t_m, x) = sum_{j<=m} e^{i x (t_m - t_{j-1})} dW_j`` is evaluated on
    the grid and integrated against ``b`` by left-point sums.  Returns
    ``(x_then_t, t_then_x)``: the x-sum outside, then inside.
    """
    if not w.grid.same_as(b.grid):
        raise ValueError("W and B^H must share one grid")
    t = w.times
    x = np.asarray(x, dtype=float)
    weights = np.asarray(weights, dtype=float)
    dw = w.increments()
    db = b.increments()
    # phi[i, m] for m = 0..n; phi at t_0 is 0.
    acc = np.cumsum(np.exp(-1j * x[:, None] * t[None, :-1]) * dw[None, :], axis=1)
    phi = np.zeros((x.size, t.size), dtype=complex)
    phi[:, 1:] = np.exp(1j * x[:, None] * t[None, 1:]) * acc
    left = phi[:, :-1]
    inner_t = left @ db
    x_then_t = complex(np.dot(weights, inner_t))
    inner_x = weights @ left
    t_then_x = complex(np.dot(inner_x, db))
    return x_then_t, t_then_x
