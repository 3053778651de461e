import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedqv.integrals import realized_qv
from mixedqv.moments import (MomentReport, _offset_kernel, j1_variance,
                             j2_variance, j3_variance, j4_variance,
                             randomized_bias, randomized_bias_on_grid,
                             rqv_bias, rqv_bias_equidistant, rqv_variance,
                             rqv_variance_equidistant, write_moment_csv)
from mixedqv.paths import Seed, TimeGrid, make_equidistant_grid, sample_mixed
from mixedqv.periodogram import RandomizerSpec, randomized_periodogram
from mixedqv.quadrature import (QuadratureError, gauss_jacobi, graded_breaks,
                                panel_rule)

import oracles

GAUSS = RandomizerSpec("gaussian", 1.0)
LAWS = [GAUSS, RandomizerSpec("uniform", 2.0), RandomizerSpec("laplace", 0.5)]
hursts = st.floats(min_value=0.51, max_value=0.99)


def _irregular(seed, n, T=1.0):
    rng = np.random.default_rng(seed)
    return TimeGrid(np.concatenate([[0.0], np.sort(rng.uniform(0, T, n - 1)), [T]]))


# -- realized quadratic variation ------------------------------------------

def test_rqv_bias_values():
    assert rqv_bias_equidistant(1.0, 10, 0.75) == pytest.approx(10**-0.5, abs=1e-12)
    assert rqv_bias_equidistant(2.0, 1, 0.6) == pytest.approx(2.0**1.2)


@settings(max_examples=30, deadline=None)
@given(H=hursts, n=st.integers(1, 300), T=st.floats(0.1, 10))
def test_rqv_bias_grid_forms_agree(H, n, T):
    assert rqv_bias(make_equidistant_grid(T, n), H) == pytest.approx(
        rqv_bias_equidistant(T, n, H), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(H=hursts, n=st.integers(1, 40), T=st.floats(0.2, 5))
def test_rqv_variance_is_exact_gaussian_variance(H, n, T):
    grid = make_equidistant_grid(T, n)
    want = oracles.gaussian_rqv_variance(grid.times, H)
    assert rqv_variance_equidistant(T, n, H) == pytest.approx(want, rel=1e-10)
    assert rqv_variance(grid, H) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_rqv_variance_irregular_grid(seed):
    grid = _irregular(seed, 600)
    want = oracles.gaussian_rqv_variance(grid.times, 0.7)
    assert rqv_variance(grid, 0.7) == pytest.approx(want, rel=1e-10)


def test_adjusted_variance_differs_from_exact():
    exact = oracles.gaussian_rqv_variance(make_equidistant_grid(1, 8).times, 0.75)
    adj = rqv_variance_equidistant(1.0, 8, 0.75, adjusted=True)
    assert adj > exact * 1.03
    # With one interval there is no cross sum to double.
    assert rqv_variance_equidistant(1, 1, 0.75, adjusted=True) == rqv_variance_equidistant(1, 1, 0.75)


@pytest.mark.parametrize("n", [1, 4, 16])
def test_variance_near_half_tends_to_8_over_n(n):
    assert rqv_variance_equidistant(1.0, n, 0.5 + 1e-8) == pytest.approx(8.0 / n, rel=1e-4)


def test_rqv_bias_monte_carlo():
    grid = make_equidistant_grid(1.0, 16)
    e = np.array([realized_qv(sample_mixed(grid, 0.75, Seed(31, r))[0]) - 1
                  for r in range(4000)])
    se = e.std(ddof=1) / np.sqrt(e.size)
    assert abs(e.mean() - rqv_bias_equidistant(1.0, 16, 0.75)) < 4 * se


# -- randomized periodogram bias ------------------------------------------

@pytest.mark.parametrize("xi", LAWS, ids=str)
@pytest.mark.parametrize("L", [0.0, 1.0, 10.0, 100.0])
def test_randomized_bias_matches_adaptive_quadrature(xi, L):
    got = randomized_bias(1.0, 0.75, L, xi)
    assert got == pytest.approx(oracles.randomized_bias_quad(1.0, 0.75, L, xi), rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(H=hursts, T=st.floats(0.2, 5))
def test_randomized_bias_at_zero(H, T):
    assert randomized_bias(T, H, 0.0, GAUSS) == pytest.approx(T ** (2 * H), rel=1e-6)


@pytest.mark.parametrize("xi", LAWS, ids=str)
def test_randomized_bias_on_grid_is_brute_force_mean(xi):
    for grid in (make_equidistant_grid(1.0, 64), _irregular(1, 64)):
        C = oracles.increment_covariance(grid.times, 0.75)
        t = grid.times[:-1]
        phi = xi.char_fn(7.0 * (t[:, None] - t[None, :]))
        want = float(np.sum(phi * C)) - grid.T
        assert randomized_bias_on_grid(grid, 0.75, 7.0, xi) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("L", [1.0, 10.0])
def test_grid_mean_approaches_continuum(L):
    got = randomized_bias_on_grid(make_equidistant_grid(1.0, 4096), 0.75, L, GAUSS)
    assert got == pytest.approx(randomized_bias(1.0, 0.75, L, GAUSS), rel=1e-5)


def test_kernel_estimator_mean_monte_carlo():
    grid = make_equidistant_grid(1.0, 256)
    vals = np.array([randomized_periodogram(sample_mixed(grid, 0.75, Seed(4, r))[0],
                                            3.0, GAUSS, method="kernel").value - 1
                     for r in range(2000)])
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - randomized_bias_on_grid(grid, 0.75, 3.0, GAUSS)) < 4 * se


# -- J functionals ----------------------------------------------------------

@pytest.mark.parametrize("L", [0.0, 1.0, 10.0, 100.0, 1000.0])
@pytest.mark.parametrize("sigma", [0.5, 1.0])
def test_j1_gaussian_closed_form(L, sigma):
    xi = RandomizerSpec("gaussian", sigma)
    assert abs(j1_variance(1.0, L, xi) - oracles.j1_gaussian(1.0, L, sigma)) < 1e-10


@pytest.mark.parametrize("xi", LAWS[1:], ids=str)
@pytest.mark.parametrize("L", [1.0, 10.0, 100.0])
def test_j1_other_laws(xi, L):
    assert j1_variance(1.0, L, xi) == pytest.approx(oracles.j1_quad(1.0, L, xi), rel=1e-9)


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_j_values_at_zero(H):
    closed = 1.0 / (2 * H + 1)
    assert j2_variance(1.0, H, 0.0, GAUSS) == pytest.approx(closed, rel=1e-8)
    assert j3_variance(1.0, H, 0.0, GAUSS) == pytest.approx(oracles.j3_zero_tensor(1.0, H), rel=1e-8)
    j4 = j4_variance(1.0, H, 0.0, GAUSS)
    assert j4 == pytest.approx(oracles.j4_zero_closed(1.0, H), rel=1e-6)
    assert oracles.j4_zero_tensor(1.0, H) == pytest.approx(oracles.j4_zero_closed(1.0, H), rel=1e-8)


@pytest.mark.parametrize("L", [1.0, 10.0, 100.0])
def test_j2_gaussian_matches_original_integral(L):
    got = j2_variance(1.0, 0.75, L, GAUSS)
    assert got == pytest.approx(oracles.j2_gaussian_tensor(1.0, 0.75, L, 1.0), rel=1e-8)


def test_j_scaling_in_T():
    # At L = 0 the functionals are homogeneous in T.
    H = 0.7
    assert j1_variance(2.0, 0.0, GAUSS) == pytest.approx(2.0)
    assert j2_variance(2.0, H, 0.0, GAUSS) == pytest.approx(2 ** (2 * H + 1) / (2 * H + 1), rel=1e-8)
    assert j4_variance(2.0, H, 0.0, GAUSS) == pytest.approx(
        2 ** (4 * H) * oracles.j4_zero_closed(1.0, H), rel=1e-6)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_offset_kernel_against_hypergeometric(alpha):
    eps = np.array([1e-6, 1e-3, 0.2, 1.0, 7.0, 1e3])
    np.testing.assert_allclose(_offset_kernel(eps, alpha, 8),
                               oracles.offset_kernel_hyp2f1(eps, alpha), rtol=1e-10)


def test_j_functionals_decrease_for_heavy_tailed_law():
    xi = RandomizerSpec("laplace", 1.0)
    vals = [j4_variance(1.0, 0.75, L, xi) for L in (0.0, 1.0, 10.0)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] > 0


# -- quadrature primitives --------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(beta=st.floats(-0.95, 2.0), k=st.integers(0, 10))
def test_gauss_jacobi_moments(beta, k):
    x, w = gauss_jacobi(8, beta)
    assert np.dot(w, x**k) == pytest.approx(1.0 / (beta + k + 1), rel=1e-11)


def test_panel_rule_integrates_singular_monomial():
    x, w = panel_rule(graded_breaks(0.0, 2.0, levels_a=30), 10, -0.6)
    # int_0^2 u^{-0.6} (1 + u) du
    want = 2**0.4 / 0.4 + 2**1.4 / 1.4
    assert np.dot(w, 1 + x) == pytest.approx(want, rel=1e-10)


def test_self_check_failure_raises():
    with pytest.raises(QuadratureError, match="node doubling"):
        j4_variance(1.0, 0.75, 10.0, GAUSS, order=2, tol=1e-12)


def test_moment_report_csv():
    r = MomentReport("x", 1.0, 8, 0.75, "", 1.0, 1.5, 0.25)
    assert r.z_score == 2.0
    buf = io.StringIO()
    write_moment_csv([r], buf, ["c"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# c"
    assert lines[1].startswith("estimator,T,n_or_L")
    assert lines[2].split(",")[-1] == "2"
