"""Composite Gauss rules on graded panels for weakly singular integrands.

``panel_rule(breaks, order, exponent)`` integrates ``f(x) (x - a)^exponent``
over ``[a, b] = [breaks[0], breaks[-1]]``: the first panel uses Gauss-Jacobi
nodes that absorb the algebraic weight exactly, the others Gauss-Legendre
with the weight multiplied in.  Grading the breakpoints geometrically toward
``a`` resolves whatever is left of the singularity in ``f``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["gauss_legendre", "gauss_jacobi", "graded_breaks", "panel_rule",
           "QuadratureError"]


class QuadratureError(ArithmeticError):
    """A node-doubling self-check did not reach its tolerance."""


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi(order: int, exponent: float):
    """Nodes and weights on [0, 1] for the weight ``x^exponent``."""
    # roots_jacobi(n, a, b) is for (1-y)^a (1+y)^b on [-1, 1].
    y, w = roots_jacobi(order, 0.0, exponent)
    x = 0.5 * (y + 1.0)
    w = w * 0.5 ** (exponent + 1.0)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def graded_breaks(a: float, b: float, *, levels_a: int = 0, levels_b: int = 0,
                  width: float = None, ratio: float = 0.5,
                  max_uniform: int = 20000) -> np.ndarray:
    """Sorted breakpoints on ``[a, b]``.

    ``levels_a`` geometric points ``a + (b-a) ratio^k`` accumulate at ``a``
    (likewise ``levels_b`` at ``b``); ``width`` adds a uniform mesh of at
    most that spacing.
    """
    if not b > a:
        raise ValueError("empty interval")
    span = b - a
    pts = [np.array([a, b])]
    if levels_a:
        pts.append(a + span * ratio ** np.arange(1, levels_a + 1))
    if levels_b:
        pts.append(b - span * ratio ** np.arange(1, levels_b + 1))
    if width is not None and width < span:
        m = min(int(np.ceil(span / width)), max_uniform)
        pts.append(np.linspace(a, b, m + 1))
    br = np.unique(np.concatenate(pts))
    # Drop near-duplicates produced by the union.
    keep = np.concatenate([[True], np.diff(br) > 1e-15 * max(abs(a), abs(b), span)])
    br = br[keep]
    br[0], br[-1] = a, b
    return br


def panel_rule(breaks, order: int, exponent: float = 0.0):
    """Nodes and weights for ``int f(x) (x - breaks[0])^exponent dx``."""
    br = np.asarray(breaks, dtype=float)
    a = br[0]
    lo = br[:-1]
    hi = br[1:]
    half = 0.5 * (hi - lo)
    xg, wg = gauss_legendre(order)
    nodes = (lo + half)[:, None] + half[:, None] * xg[None, :]
    weights = half[:, None] * wg[None, :]
    if exponent != 0.0:
        weights = weights * (nodes - a) ** exponent
        xj, wj = gauss_jacobi(order, exponent)
        h0 = hi[0] - a
        nodes[0] = a + h0 * xj
        weights[0] = h0 ** (exponent + 1.0) * wj
    return nodes.ravel(), weights.ravel()
