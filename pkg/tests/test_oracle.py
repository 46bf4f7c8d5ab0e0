import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from mindisc.discrepancy import local_discrepancy, midpoint_grid, star_discrepancy_1d
from mindisc.exceptions import UnsupportedError
from mindisc.kernels import KernelSpec, kernel_eval, kernel_grad_x
from mindisc.oracle import (
    dense_sup,
    finite_diff_grad,
    gauss_hermite,
    gauss_legendre,
    grid,
    integrate_1d,
    star_discrepancy_bruteforce,
    tensor_product,
)


def test_legendre_weights_normalised():
    assert integrate_1d(gauss_legendre(5), lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-14)


def test_legendre_integrates_wendland1_embedding():
    got = integrate_1d(gauss_legendre(20), lambda x: -x**2 + x + 0.5)
    assert abs(got - 2 / 3) < 1e-12


def test_hermite_second_moment():
    assert abs(integrate_1d(gauss_hermite(50), lambda x: x**2) - 1.0) < 1e-10


@pytest.mark.parametrize("order", [1, 5, 20, 50])
def test_rules_agree_with_numpy(order):
    # Cross-check of the in-house eigenvalue route against numpy's tabulation.
    x, w = leggauss(order)
    gl = gauss_legendre(order)
    np.testing.assert_allclose(gl.nodes[:, 0], 0.5 * (x + 1), atol=1e-13)
    np.testing.assert_allclose(gl.weights, 0.5 * w, atol=1e-13)
    x, w = hermegauss(order)
    gh = gauss_hermite(order)
    np.testing.assert_allclose(gh.nodes[:, 0], x, atol=1e-10 * max(1, order))
    np.testing.assert_allclose(gh.weights, w / w.sum(), rtol=1e-8, atol=1e-300)


@pytest.mark.parametrize("degree", range(0, 10))
def test_legendre_exactness(degree):
    # Order q integrates degree 2q-1 exactly; degree <= 9 needs order 5.
    assert abs(integrate_1d(gauss_legendre(5), lambda x: x**degree) - 1 / (degree + 1)) < 1e-12


def test_tensor_product_weights_and_moments():
    rule = tensor_product(gauss_hermite(10), 2)
    assert rule.weights.sum() == pytest.approx(1.0)
    got = rule.weights @ (rule.nodes[:, 0] ** 2 * rule.nodes[:, 1] ** 2)
    assert got == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UnsupportedError):
        tensor_product(gauss_hermite(3), 3)


def test_grid_validation():
    with pytest.raises(ValueError):
        grid([(0, 1)], 9)
    with pytest.raises(UnsupportedError):
        grid([(0, 1)] * 3, 10)
    assert grid([(0, 1), (0, 2)], 11).shape == (121, 2)


def test_dense_sup_constant():
    assert dense_sup(lambda a: np.full(a.shape[0], -0.3), [(0, 1)], 10) == pytest.approx(0.3)


def test_dense_sup_single_point_local_discrepancy():
    f = lambda a: np.array([local_discrepancy(ai, [0.5]) for ai in a])  # noqa: E731
    # Strict counts alone approach 0.5 from below at a -> 0.5.
    assert dense_sup(f, [(0, 1)], 100_001) == pytest.approx(0.5, abs=1e-4)


def test_bruteforce_midpoint_grid():
    pts = midpoint_grid(10, 1)
    assert star_discrepancy_bruteforce(pts) == pytest.approx(0.05, abs=1e-4)
    assert star_discrepancy_bruteforce(pts) == pytest.approx(star_discrepancy_1d(pts), abs=1e-9)


def test_finite_diff_grad():
    np.testing.assert_allclose(finite_diff_grad(lambda x: float(x[0] ** 2), [1.0]), [2.0], atol=1e-9)
    np.testing.assert_allclose(finite_diff_grad(lambda x: 3.0, [0.2, 0.4]), [0.0, 0.0])
    spec = KernelSpec("gaussian", 2, sigma=0.8)
    y = np.array([0.1, -0.4])
    x = np.array([0.3, 0.2])
    fd = finite_diff_grad(lambda p: kernel_eval(spec, p, y), x)
    np.testing.assert_allclose(kernel_grad_x(spec, x, y), fd, atol=1e-4)
    with pytest.raises(ValueError):
        finite_diff_grad(lambda x: x, [0.0], step=0.0)
