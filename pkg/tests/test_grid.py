"""Grid construction, quadrature, differentiation, and CSV round-trips."""

import math

import numpy as np
import pytest

from susy_metric.grid import (
    differentiate,
    grid_function,
    inner_product,
    make_grid,
    norm,
    read_gridfunction_csv,
    write_gridfunction_csv,
)


def test_make_grid_uniform_partition():
    g = make_grid(1.0, 5)
    assert np.allclose(g.x, [0.0, 0.25, 0.5, 0.75, 1.0], atol=0)
    assert g.spacing * (g.n_points - 1) == pytest.approx(g.d, abs=1e-16)


def test_make_grid_single_panel_simpson_weights():
    g = make_grid(math.pi, 3)
    assert np.allclose(g.weights, [math.pi / 6, 4 * math.pi / 6, math.pi / 6], rtol=1e-15)


def test_make_grid_rejects_even_count_and_bad_d():
    with pytest.raises(ValueError):
        make_grid(1.0, 4)
    with pytest.raises(ValueError):
        make_grid(0.0, 5)
    with pytest.raises(ValueError):
        make_grid(-2.0, 5)


@pytest.mark.parametrize("n", [5, 17, 101, 2001])
def test_weights_positive_and_sum_to_d(n):
    g = make_grid(2.5, n)
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - g.d) < 1e-12 * g.d


def test_inner_product_normalized_sine():
    g = make_grid(1.0, 201)
    f = grid_function(g, np.sqrt(2.0) * np.sin(np.pi * g.x))
    assert inner_product(f, f) == pytest.approx(1.0, abs=1e-8)


def test_inner_product_sine_orthogonality():
    g = make_grid(1.0, 201)
    f = grid_function(g, np.sin(np.pi * g.x))
    h = grid_function(g, np.sin(2 * np.pi * g.x))
    assert abs(inner_product(f, h)) < 1e-8


def test_inner_product_matches_overlap_closed_form():
    # independent check of the quadrature rule against the analytic overlap;
    # the expected value is frozen from a brute-force Simpson sum at n=4001
    from susy_metric.oracle import RobinParams, adjoint_eigenfunction, metric_eigendata, overlap_s

    p = RobinParams(1.3, 1.0)
    g = make_grid(1.0, 4001)
    _, Xi1 = metric_eigendata(p, 1)
    xi1 = adjoint_eigenfunction(p, 1)
    got = inner_product(grid_function(g, Xi1(g.x)), grid_function(g, xi1(g.x)))
    frozen = 0.4537881806281679 - 0.34497177118840056j  # brute-force Simpson, n=4001
    assert abs(got - frozen) < 1e-8
    assert abs(got - overlap_s(p, 1, 1)) < 1e-8


def test_inner_product_conjugate_symmetry():
    g = make_grid(1.0, 101)
    rng = np.random.default_rng(7)
    f = grid_function(g, rng.standard_normal(101) + 1j * rng.standard_normal(101))
    h = grid_function(g, rng.standard_normal(101) + 1j * rng.standard_normal(101))
    assert abs(inner_product(f, h) - np.conj(inner_product(h, f))) < 1e-14


@pytest.mark.parametrize("n", [5, 9, 21, 101])
def test_quadrature_exact_for_cubics(n):
    g = make_grid(1.7, n)
    rng = np.random.default_rng(n)
    coeffs = rng.standard_normal(4)
    poly = np.polynomial.Polynomial(coeffs)
    f = grid_function(g, poly(g.x).astype(complex))
    one = grid_function(g, np.ones(n))
    exact = poly.integ()(g.d) - poly.integ()(0.0)
    assert abs(inner_product(one, f) - exact) <= 1e-12 * max(1.0, abs(exact))


def test_differentiate_quadratic_exact():
    g = make_grid(1.0, 201)
    f = grid_function(g, g.x**2)
    df = differentiate(f, 1)
    assert np.max(np.abs(df.values - 2 * g.x)) < 1e-10


def test_differentiate_constant_is_zero():
    g = make_grid(1.0, 101)
    f = grid_function(g, np.ones(101))
    assert np.max(np.abs(differentiate(f, 1).values)) < 1e-12


def test_differentiate_second_order_accuracy():
    a = 1.3
    g = make_grid(1.0, 2001)
    f = grid_function(g, np.exp(1j * a * g.x))
    err = np.max(np.abs(differentiate(f, 2).values - (-(a**2)) * f.values))
    assert err < 5e-4

    # halving the spacing cuts the error by 4 within 20%
    errors = {}
    for n in (1001, 2001):
        gg = make_grid(1.0, n)
        ff = grid_function(gg, np.exp(1j * a * gg.x))
        errors[n] = max(
            np.max(np.abs(differentiate(ff, 1).values - 1j * a * ff.values)),
            np.max(np.abs(differentiate(ff, 2).values + a * a * ff.values)),
        )
    ratio = errors[1001] / errors[2001]
    assert 4 * 0.8 <= ratio <= 4 * 1.2


def test_differentiate_rejects_bad_order():
    g = make_grid(1.0, 11)
    f = grid_function(g, np.ones(11))
    with pytest.raises(ValueError):
        differentiate(f, 3)


def test_grid_function_validation():
    g = make_grid(1.0, 11)
    with pytest.raises(ValueError):
        grid_function(g, np.ones(10))
    bad = np.ones(11)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        grid_function(g, bad)


def test_grid_mismatch_rejected():
    f = grid_function(make_grid(1.0, 11), np.ones(11))
    h = grid_function(make_grid(1.0, 13), np.ones(13))
    with pytest.raises(ValueError):
        inner_product(f, h)


def test_csv_round_trip(tmp_path):
    g = make_grid(2.0, 41)
    rng = np.random.default_rng(3)
    f = grid_function(g, rng.standard_normal(41) + 1j * rng.standard_normal(41))
    path = tmp_path / "f.csv"
    write_gridfunction_csv(f, path)
    header = path.read_text().splitlines()[0]
    assert header == "x,re,im"
    back = read_gridfunction_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_norm_matches_inner_product():
    g = make_grid(1.0, 51)
    f = grid_function(g, np.exp(1j * 0.7 * g.x) * (1 + g.x))
    assert norm(f) == pytest.approx(math.sqrt(inner_product(f, f).real), rel=1e-14)
