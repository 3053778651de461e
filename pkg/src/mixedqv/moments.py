"""Closed-form moments of the two quadratic-variation estimators.

Realized quadratic variation of the mixed process on a partition has error
``e1 = RQV - T`` with

    E e1   = sum_k dt_k^{2H}
    Var e1 = sum_k 2 (dt_k + dt_k^{2H})^2 + sum_{i<j} D_ij^2,
    D_ij   = (t_j - t_{i-1})^{2H} + (t_{j-1} - t_i)^{2H}
             - (t_j - t_i)^{2H} - (t_{j-1} - t_{i-1})^{2H}.

``adjusted=True`` doubles the cross sum; both variants are kept so Monte
Carlo can arbitrate between them.

The randomized periodogram has error mean

    E e2 = 2H(2H-1) int_0^T (T-u) phi(L u) u^{2H-2} du,

and the four second moments J1..J4 are reduced to low-dimensional integrals
with the singular factor isolated (see the helpers below).  Every quadrature
runs twice with doubled node counts; a relative change above the tolerance
raises :class:`QuadratureError`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import beta as beta_fn

from .paths import Hurst, TimeGrid, fgn_autocovariance
from .periodogram import RandomizerSpec
from .quadrature import (QuadratureError, gauss_jacobi, gauss_legendre,
                         graded_breaks, panel_rule)

__all__ = [
    "MomentReport",
    "MOMENT_CSV_HEADER",
    "write_moment_csv",
    "rqv_bias",
    "rqv_bias_equidistant",
    "rqv_variance",
    "rqv_variance_equidistant",
    "randomized_bias",
    "randomized_bias_on_grid",
    "j1_variance",
    "j2_variance",
    "j3_variance",
    "j4_variance",
    "j2_j3_j4_variances",
]

MOMENT_CSV_HEADER = ["estimator", "T", "n_or_L", "H", "xi_family",
                     "closed_form", "mc_estimate", "mc_se", "z"]


@dataclass(frozen=True)
class MomentReport:
    estimator: str
    T: float
    n_or_L: float
    H: Optional[float]
    xi_family: str
    closed_form: float
    mc_estimate: float
    mc_std_error: float

    @property
    def z_score(self) -> float:
        if self.mc_std_error > 0:
            return (self.mc_estimate - self.closed_form) / self.mc_std_error
        return math.nan

    def row(self):
        H = "" if self.H is None else f"{self.H:.17g}"
        return [self.estimator, f"{self.T:.17g}", f"{self.n_or_L:.17g}", H,
                self.xi_family, f"{self.closed_form:.17g}",
                f"{self.mc_estimate:.17g}", f"{self.mc_std_error:.17g}",
                f"{self.z_score:.17g}"]


def write_moment_csv(reports, fh, comments=()):
    for line in comments:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MOMENT_CSV_HEADER)
    for r in reports:
        w.writerow(r.row())


# -- realized quadratic variation ------------------------------------------

def rqv_bias(grid: TimeGrid, H: float) -> float:
    H = Hurst(H)
    return float(np.sum(grid.increments() ** (2 * H)))


def rqv_bias_equidistant(T: float, n: int, H: float) -> float:
    H = Hurst(H)
    return T ** (2 * H) * n ** (1 - 2 * H)


def rqv_variance(grid: TimeGrid, H: float, adjusted: bool = False) -> float:
    H = Hurst(H)
    h2 = 2 * H
    t = grid.times
    dt = np.diff(t)
    diag = float(np.sum(2.0 * (dt + dt**h2) ** 2))
    a = t[:-1]   # t_{i-1}
    b = t[1:]    # t_i
    n = dt.size
    cross = 0.0
    for start in range(0, n, 512):
        i = np.arange(start, min(start + 512, n))[:, None]
        j = np.arange(n)[None, :]
        upper = j > i
        # Clip so the j <= i entries (masked below) stay finite.
        d = (np.clip(b[j] - a[i], 0, None) ** h2
             + np.clip(a[j] - b[i], 0, None) ** h2
             - np.clip(b[j] - b[i], 0, None) ** h2
             - np.clip(a[j] - a[i], 0, None) ** h2)
        cross += float(np.sum(np.where(upper, d * d, 0.0)))
    return diag + (2.0 if adjusted else 1.0) * cross


def rqv_variance_equidistant(T: float, n: int, H: float, adjusted: bool = False) -> float:
    """Equidistant variance with the cross sum grouped by lag ``k = j - i``."""
    H = Hurst(H)
    h2 = 2 * H
    h = T / n
    diag = 2.0 * n * (h + h**h2) ** 2
    k = np.arange(1, n, dtype=float)
    f = (k - 1) ** h2 + (k + 1) ** h2 - 2.0 * k**h2
    cross = h ** (2 * h2) * float(np.sum((n - k) * f * f))
    return diag + (2.0 if adjusted else 1.0) * cross


# -- integrals against the characteristic function -------------------------

def _kernel_extent(T: float, L: float, xi: RandomizerSpec) -> float:
    """Upper end of the lag range where ``phi(L u)`` is not negligible."""
    cut = xi.decay_cutoff() if L > 0 else None
    return T if cut is None else min(T, cut / L)


def _kernel_breaks(a: float, b: float, L: float, xi: RandomizerSpec,
                   levels_a: int = 40, levels_b: int = 0,
                   peak_b: bool = False) -> np.ndarray:
    """Breakpoints on ``[a, b]``: geometric toward ``a`` plus panels no wider
    than the kernel length ``1 / (scale * L)`` where the kernel is still
    changing (everywhere for the oscillating uniform law).  ``peak_b`` puts
    the kernel peak at ``b`` as well as at ``a``."""
    br = graded_breaks(a, b, levels_a=levels_a, levels_b=levels_b)
    if L > 0:
        width = 1.0 / (xi.scale * L)
        span = b - a if xi.family == "uniform" else min(b - a, 20.0 * width)
        if width < span:
            m = int(math.ceil(span / width))
            mesh = np.linspace(0.0, span, m + 1)
            br = np.union1d(br, a + mesh)
            if peak_b:
                br = np.union1d(br, b - mesh)
    return br


def _self_checked(fn, order: int, tol: float, what: str) -> float:
    coarse = fn(order)
    fine = fn(2 * order)
    rel = abs(fine - coarse) / max(abs(fine), 1e-300)
    if rel > tol:
        raise QuadratureError(
            f"{what}: node doubling changed the value by {rel:.2e} "
            f"(tolerance {tol:.0e}; {coarse!r} -> {fine!r})"
        )
    return fine


def randomized_bias(T: float, H: float, L: float, xi: RandomizerSpec, *,
                    order: int = 16, tol: float = 1e-8) -> float:
    """Mean error of the randomized periodogram,
    ``2H(2H-1) int_0^T (T-u) phi(L u) u^{2H-2} du``."""
    H = Hurst(H)
    c = H * (2 * H - 1)
    hi = _kernel_extent(T, L, xi)
    br = _kernel_breaks(0.0, hi, L, xi)

    def quad(m):
        u, w = panel_rule(br, m, 2 * H - 2)
        return 2 * c * float(np.dot(w, (T - u) * xi.char_fn(L * u)))

    return _self_checked(quad, order, tol, "randomized_bias")


def randomized_bias_on_grid(grid: TimeGrid, H: float, L: float,
                            xi: RandomizerSpec) -> float:
    """Exact mean of the left-point randomized periodogram minus ``T`` on a
    finite grid: ``sum_{j,k} phi(L (t_{k-1} - t_{j-1})) Cov(dB_j, dB_k)``.

    Converges to :func:`randomized_bias` as the mesh shrinks; the gap
    measures discretization bias.
    """
    H = Hurst(H)
    if grid.equidistant:
        n, h = grid.n, grid.step
        k = np.arange(n)
        g = fgn_autocovariance(k, H) * h ** (2 * H)
        phi = xi.char_fn(L * k * h)
        return float(n * g[0] + 2.0 * np.sum((n - k[1:]) * phi[1:] * g[1:]))
    t = grid.times
    h2 = 2 * H
    a, b = t[:-1], t[1:]
    cov = 0.5 * (np.abs(b[None, :] - a[:, None]) ** h2 + np.abs(a[None, :] - b[:, None]) ** h2
                 - np.abs(b[None, :] - b[:, None]) ** h2 - np.abs(a[None, :] - a[:, None]) ** h2)
    return float(np.sum(xi.char_fn(L * (a[None, :] - a[:, None])) * cov))


def j1_variance(T: float, L: float, xi: RandomizerSpec, *,
                order: int = 16, tol: float = 1e-10) -> float:
    """``E J1^2 = int_0^T int_0^t phi^2(L(t-s)) ds dt = int_0^T (T-u) phi^2(L u) du``."""
    if L < 0:
        raise ValueError("L must be nonnegative")
    hi = _kernel_extent(T, L, xi)
    br = _kernel_breaks(0.0, hi, L, xi)

    def quad(m):
        u, w = panel_rule(br, m)
        return float(np.dot(w, (T - u) * xi.char_fn(L * u) ** 2))

    return _self_checked(quad, order, tol, "j1_variance")


def _lagged_pair_integral(T: float, H: float, L: float, xi: RandomizerSpec,
                          order: int) -> float:
    """``2H(2H-1) int_0^T d^{2H-2} int_0^{T-d} (T-d-w) phi(L(d+w)) phi(L w) dw dd``.

    Both the Brownian-then-fBm and the fBm-then-Brownian second moments
    reduce to this after substituting lag ``d`` and offset ``w``.
    """
    c = H * (2 * H - 1)
    hi = _kernel_extent(T, L, xi)
    d, wd = panel_rule(_kernel_breaks(0.0, hi, L, xi), order, 2 * H - 2)
    total = 0.0
    for di, wi in zip(d, wd):
        top = min(T - di, hi)
        if top <= 0.0:
            continue
        w, ww = panel_rule(_kernel_breaks(0.0, top, L, xi, levels_a=8), order)
        inner = np.dot(ww, (T - di - w) * xi.char_fn(L * (di + w)) * xi.char_fn(L * w))
        total += wi * inner
    return 2 * c * float(total)


def j2_variance(T: float, H: float, L: float, xi: RandomizerSpec, *,
                order: int = 12, tol: float = 1e-6) -> float:
    """``H(2H-1) int int |u-v|^{2H-2} int_0^{u^v} phi(L(u-s)) phi(L(v-s)) ds du dv``."""
    H = Hurst(H)
    return _self_checked(lambda m: _lagged_pair_integral(T, H, L, xi, m),
                         order, tol, "j2_variance")


def j3_variance(T: float, H: float, L: float, xi: RandomizerSpec, *,
                order: int = 12, tol: float = 1e-6) -> float:
    """``H(2H-1) int_0^T int_0^t int_0^t phi(L(t-u)) phi(L(t-v)) |u-v|^{2H-2} du dv dt``.

    With ``a = t-u``, ``b = t-v`` the t-integral leaves ``T - max(a, b)``;
    splitting at ``a = b`` gives the same lag integral as :func:`j2_variance`.
    """
    H = Hurst(H)
    return _self_checked(lambda m: _lagged_pair_integral(T, H, L, xi, m),
                         order, tol, "j3_variance")


def _offset_kernel(eps: np.ndarray, alpha: float, order: int,
                   panels: int = 48) -> np.ndarray:
    """``m(eps) = int_0^1 y^{a-1} (y + eps)^{a-1} (1 - y) dy`` for each eps.

    Geometric panels run from ``min(eps, 1) / 4096`` up to 1 so the
    near-singularity at ``y = -eps`` is resolved; the first panel carries the
    ``y^{a-1}`` weight exactly.
    """
    eps = np.asarray(eps, dtype=float)[:, None]
    y0 = np.minimum(eps, 1.0) / 4096.0
    # Panel edges y0 * r^k, k = 0..panels, r chosen per eps to land on 1.
    k = np.arange(panels + 1)[None, :]
    edges = y0 ** (1.0 - k / panels)
    lo = edges[:, :-1]
    hi = edges[:, 1:]
    xg, wg = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    y = (lo + half)[:, :, None] + half[:, :, None] * xg[None, None, :]
    w = half[:, :, None] * wg[None, None, :]
    f = y ** (alpha - 1) * (y + eps[:, :, None]) ** (alpha - 1) * (1 - y)
    total = np.sum(w * f, axis=(1, 2))
    xj, wj = gauss_jacobi(order, alpha - 1)
    yj = y0 * xj[None, :]
    first = y0[:, 0] ** alpha * np.sum(wj[None, :] * (yj + eps) ** (alpha - 1) * (1 - yj), axis=1)
    return total + first


def _j4_reduced(T: float, H: float, L: float, xi: RandomizerSpec, order: int) -> float:
    """``2 c^2 int_0^T phi(Lp) int_0^p phi(L(p-e)) G(p, p-e) de dp``.

    ``p = u-s`` and ``q = v-t`` are the kernel lags; for fixed lags the
    remaining (u, v) integral ``G`` collapses to one dimension along
    ``d = v-u``, with singular points at ``d = 0`` and ``d = q-p``:

        G = D e^{2a-1} B(a, a) + 2 D^{2a} m(e / D),   D = T - p,  e = p - q,

    where ``a = 2H-1`` and ``m`` is :func:`_offset_kernel`.  The integrand is
    symmetric in (p, q), hence the factor 2 and ``e >= 0``.
    """
    alpha = 2 * H - 1
    c = H * alpha
    b_aa = float(beta_fn(alpha, alpha))
    hi = _kernel_extent(T, L, xi)
    p, wp = panel_rule(_kernel_breaks(0.0, hi, L, xi, levels_a=8, levels_b=8), order)
    e_exp = min(2 * alpha - 1, 0.0)
    total = 0.0
    for pi, wi in zip(p, wp):
        D = T - pi
        e, we = panel_rule(_kernel_breaks(0.0, pi, L, xi, levels_a=40, levels_b=8,
                                            peak_b=True), order, e_exp)
        G = D * e ** (2 * alpha - 1) * b_aa + 2 * D ** (2 * alpha) * _offset_kernel(e / D, alpha, order)
        if e_exp:
            G = G * e ** (-e_exp)
        total += wi * xi.char_fn(L * pi) * float(np.dot(we, xi.char_fn(L * (pi - e)) * G))
    return 2 * c * c * total


def j4_variance(T: float, H: float, L: float, xi: RandomizerSpec, *,
                order: int = 6, tol: float = 1e-4) -> float:
    """``(H(2H-1))^2 int int int_0^v int_0^u phi(L(u-s)) phi(L(v-t))
    |t-s|^{2H-2} |u-v|^{2H-2} ds dt du dv``."""
    H = Hurst(H)
    return _self_checked(lambda m: _j4_reduced(T, H, L, xi, m), order, tol, "j4_variance")


def j2_j3_j4_variances(T: float, H: float, L: float, xi: RandomizerSpec):
    return (j2_variance(T, H, L, xi), j3_variance(T, H, L, xi),
            j4_variance(T, H, L, xi))
