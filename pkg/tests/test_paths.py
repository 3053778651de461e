import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import toeplitz

from mixedqv.paths import (FactorizationError, Hurst, SamplePath, Seed,
                           TimeGrid, _circulant_sqrt_eigs, _fgn_circulant,
                           fbm_covariance, fgn_autocovariance,
                           make_equidistant_grid, read_path_csv, sample_brownian,
                           sample_fbm, sample_mixed, subgrid_indices,
                           write_path_csv)

hursts = st.floats(min_value=0.501, max_value=0.999)


class _UnitDraw:
    """Stands in for a Generator and returns a fixed vector."""

    def __init__(self, z):
        self.z = z

    def standard_normal(self, size):
        assert size == self.z.size
        return self.z


def _circulant_linear_map(n, H):
    # The generator is linear in its normals: column i is the output for e_i.
    sq = _circulant_sqrt_eigs(n, H)
    eye = np.eye(2 * n)
    return np.column_stack([_fgn_circulant(n, H, _UnitDraw(e), sq) for e in eye])


@pytest.mark.parametrize("H", [0.55, 0.75, 0.95])
@pytest.mark.parametrize("n", [1, 2, 7, 16])
def test_circulant_generator_has_exact_fgn_covariance(n, H):
    A = _circulant_linear_map(n, H)
    target = toeplitz(fgn_autocovariance(np.arange(n), H))
    np.testing.assert_allclose(A @ A.T, target, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(H=hursts, n=st.integers(min_value=1, max_value=2000))
def test_circulant_embedding_is_nonnegative(H, n):
    assert _circulant_sqrt_eigs(n, H) is not None


@settings(max_examples=40, deadline=None)
@given(H=hursts, n=st.integers(min_value=1, max_value=200))
def test_fgn_sums_to_fbm_variance(H, n):
    # Var(B_n) = n^{2H} is the sum of the Toeplitz covariance.
    g = toeplitz(fgn_autocovariance(np.arange(n), H))
    assert g.sum() == pytest.approx(n ** (2 * H), rel=1e-10)


@given(H=hursts, s=st.floats(0, 10), t=st.floats(0, 10))
def test_fbm_covariance_symmetry_and_diagonal(H, s, t):
    assert fbm_covariance(s, t, H) == fbm_covariance(t, s, H)
    assert fbm_covariance(t, t, H) == pytest.approx(t ** (2 * H), abs=1e-12)


def test_hurst_bounds():
    assert Hurst(0.75) == 0.75
    for bad in (0.5, 1.0, 0.3, 1.2):
        with pytest.raises(ValueError):
            Hurst(bad)


def test_grid_validation_and_coarsening():
    with pytest.raises(ValueError):
        TimeGrid([0.0])
    with pytest.raises(ValueError):
        TimeGrid([0.1, 0.5])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.5, 0.5])
    g = make_equidistant_grid(2.0, 8)
    assert g.n == 8 and g.T == 2.0 and g.step == 0.25
    c = g.coarsen(4)
    assert c.equidistant and c.n == 2
    np.testing.assert_array_equal(c.times, [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        g.coarsen(3)
    assert g.refine().n == 16
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.3, 1.0]).step


@settings(max_examples=30, deadline=None)
@given(k=st.integers(0, 10), j=st.integers(0, 6), T=st.floats(0.1, 50))
def test_dyadic_subgrids_embed(k, j, T):
    fine = make_equidistant_grid(T, 2 ** (k + j))
    coarse = make_equidistant_grid(T, 2 ** k)
    idx = subgrid_indices(fine, coarse)
    np.testing.assert_array_equal(idx, np.arange(0, fine.n + 1, 2 ** j))


def test_subgrid_mismatch_raises():
    with pytest.raises(ValueError):
        subgrid_indices(make_equidistant_grid(1, 4), make_equidistant_grid(1, 3))


@settings(max_examples=20, deadline=None)
@given(H=hursts, base=st.integers(0, 2**32), index=st.integers(0, 10**6),
       n=st.integers(1, 300))
def test_mixed_is_sum_and_starts_at_zero(H, base, index, n):
    grid = make_equidistant_grid(1.0, n)
    x, w, b = sample_mixed(grid, H, Seed(base, index))
    np.testing.assert_array_equal(x.values, w.values + b.values)
    assert x.values[0] == w.values[0] == b.values[0] == 0.0
    assert x.kind == "mixed" and w.kind == "brownian" and b.kind == "fbm"


def test_sampling_is_deterministic_and_streams_differ():
    grid = make_equidistant_grid(1.0, 64)
    a = sample_mixed(grid, 0.7, Seed(5, 3))
    b = sample_mixed(grid, 0.7, Seed(5, 3))
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.values, q.values)
    c = sample_mixed(grid, 0.7, Seed(5, 4))
    assert not np.array_equal(a[0].values, c[0].values)
    assert not np.array_equal(a[1].increments(), a[2].increments())


def _check_covariance(values, times, H, nsig=4.5):
    # Per-pair standard error of the mean of the products.
    M = values.shape[0]
    for i, j in [(1, 1), (1, -1), (len(times) // 2, -1), (-1, -1), (2, 3)]:
        prod = values[:, i] * values[:, j]
        se = prod.std(ddof=1) / np.sqrt(M)
        target = fbm_covariance(times[i], times[j], H)
        assert abs(prod.mean() - target) < nsig * se, (i, j)


@pytest.mark.parametrize("method", ["circulant", "dense"])
def test_fbm_covariance_monte_carlo(method):
    H = 0.8
    grid = make_equidistant_grid(1.5, 16)
    vals = np.array([sample_fbm(grid, H, Seed(11, r), method=method).values
                     for r in range(3000)])
    _check_covariance(vals, grid.times, H)


def test_irregular_grid_uses_dense_factorization():
    rng = np.random.default_rng(0)
    times = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, 12)), [1.0]])
    grid = TimeGrid(times)
    vals = np.array([sample_fbm(grid, 0.65, Seed(2, r)).values for r in range(3000)])
    _check_covariance(vals, grid.times, 0.65)
    with pytest.raises(ValueError):
        sample_fbm(grid, 0.65, 1, method="circulant")


def test_dense_factorization_failure_is_reported():
    # Two points a hair apart make the covariance numerically singular.
    grid = TimeGrid([0.0, 0.5, 0.5 + 1e-15, 1.0])
    with pytest.raises(FactorizationError, match="smallest eigenvalue"):
        sample_fbm(grid, 0.9, 0, method="dense")


def test_brownian_increment_variance():
    grid = make_equidistant_grid(2.0, 4)
    inc = np.array([sample_brownian(grid, Seed(9, r)).increments() for r in range(4000)])
    np.testing.assert_allclose(inc.var(axis=0), grid.increments(), rtol=0.1)


def test_restrict_keeps_values():
    grid = make_equidistant_grid(1.0, 16)
    x = sample_mixed(grid, 0.75, 4)[0]
    r = x.restrict(grid.coarsen(4))
    np.testing.assert_array_equal(r.values, x.values[::4])
    with pytest.raises(ValueError):
        SamplePath(grid, np.zeros(3))


def test_csv_round_trip():
    grid = make_equidistant_grid(1.0, 32)
    x = sample_mixed(grid, 0.75, 8)[0]
    buf = io.StringIO()
    write_path_csv(x, buf, ["hello"])
    text = buf.getvalue()
    assert text.startswith("# hello\n")
    data = [line for line in text.splitlines() if not line.startswith("#")]
    assert data[0] == "0,0" and len(data) == 33
    y = read_path_csv(io.StringIO(text))
    assert y.grid.equidistant
    np.testing.assert_array_equal(y.values, x.values)
    np.testing.assert_array_equal(y.times, x.times)
    z = read_path_csv(io.StringIO("t,value\n0,0\n0.5,1\n1,2\n"))
    np.testing.assert_array_equal(z.values, [0, 1, 2])
