import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_lyapunov

from cvoptomech.errors import NoBracket, NotHermitian, SingularSystem, ToleranceNotMet, UnstableDrift
from cvoptomech.numerics import (
    QuadratureSpec,
    eigenvalues,
    find_root,
    hermitian_spectrum,
    integrate_matrix,
    lyapunov_residual,
    solve_lyapunov,
)


def random_hurwitz(rng, n):
    M = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(M).real) + rng.uniform(0.1, 2)
    return M - shift * np.eye(n)


def random_psd(rng, n):
    B = rng.normal(size=(n, n))
    return B @ B.T


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_lyapunov_residual_small(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        A, D = random_hurwitz(rng, n), random_psd(rng, n)
        V = solve_lyapunov(A, D)
        bound = 1e-10 * (np.linalg.norm(A) * np.linalg.norm(V) + np.linalg.norm(D))
        assert lyapunov_residual(A, V, D) <= bound
        np.testing.assert_allclose(V, V.T, atol=0)


def test_lyapunov_matches_scipy():
    rng = np.random.default_rng(1)
    for _ in range(10):
        A, D = random_hurwitz(rng, 4), random_psd(rng, 4)
        np.testing.assert_allclose(solve_lyapunov(A, D), solve_continuous_lyapunov(A, -D),
                                   rtol=1e-9, atol=1e-12)


def test_lyapunov_scalar_and_diagonal():
    assert solve_lyapunov([[-2.0]], [[4.0]])[0, 0] == pytest.approx(1.0)
    A = np.diag([-1.0, -3.0])
    np.testing.assert_allclose(solve_lyapunov(A, np.eye(2)), np.diag([0.5, 1 / 6]))


def test_lyapunov_rejects_unstable():
    with pytest.raises(UnstableDrift):
        solve_lyapunov(np.diag([-1.0, 0.5]), np.eye(2))


def test_lyapunov_singular_operator():
    # eigenvalues +-i: A kron I + I kron A is singular
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(SingularSystem):
        solve_lyapunov(A, np.eye(2), check_stability=False)


def test_eigenvalues_against_characteristic_polynomial():
    rng = np.random.default_rng(2)
    for n in (2, 3, 6):
        M = rng.normal(size=(n, n))
        lam = eigenvalues(M)
        coeffs = np.poly(M)
        assert np.max(np.abs(np.polyval(coeffs, lam))) < 1e-9 * np.abs(coeffs).max() * 10**n


def test_eigenvalues_dimension_limit():
    with pytest.raises(ValueError):
        eigenvalues(np.eye(17))


def test_hermitian_spectrum():
    H = np.array([[2.0, 1j], [-1j, 2.0]])
    np.testing.assert_allclose(hermitian_spectrum(H), [1.0, 3.0])
    with pytest.raises(NotHermitian):
        hermitian_spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_lorentzian_matrix_integral():
    # int dw k / (pi (w^2 + k^2)) = 1, scaled into a 2x2 matrix
    k = 0.3
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    q = QuadratureSpec(omega_max=5.0, points=(0.0,))
    val = integrate_matrix(lambda w: (k / np.pi / (w**2 + k**2))[:, None, None] * M, q)
    np.testing.assert_allclose(val, M, rtol=1e-9)


def test_gaussian_integral_and_scalar_mode():
    q = QuadratureSpec(omega_max=3.0)
    val = integrate_matrix(lambda w: np.array([[np.exp(-w * w)]]), q, vectorized=False)
    assert val[0, 0] == pytest.approx(np.sqrt(np.pi), rel=1e-10)


def test_truncated_domain():
    q = QuadratureSpec(omega_max=1.0, include_tails=False)
    val = integrate_matrix(lambda w: (w**2)[:, None, None], q)
    assert val[0, 0] == pytest.approx(2 / 3, rel=1e-12)


def test_complex_integrand():
    q = QuadratureSpec(omega_max=2.0)
    val = integrate_matrix(lambda w: (1 / (1 + 1j * w) ** 2)[:, None, None], q)
    # int dw 1/(1+iw)^2 = 0 by closing the contour
    assert abs(val[0, 0]) < 1e-8


def test_quadrature_budget_exhausted():
    q = QuadratureSpec(omega_max=1.0, max_subdivisions=4, abs_tol=1e-14, rel_tol=1e-14)
    with pytest.raises(ToleranceNotMet):
        integrate_matrix(lambda w: np.sin(200 * w)[:, None, None] ** 2, q)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(omega_max=-1)


def test_find_root_bracket_and_seed():
    assert find_root(lambda x: x**2 - 2, bracket=(0, 2)) == pytest.approx(np.sqrt(2), rel=1e-14)
    # bracket grown geometrically from the seed
    assert find_root(lambda x: np.log(x) - 10, seed=1e-3) == pytest.approx(np.exp(10), rel=1e-12)


def test_find_root_failures():
    with pytest.raises(NoBracket):
        find_root(lambda x: x**2 + 1, bracket=(-1, 1))
    with pytest.raises(NoBracket):
        find_root(lambda x: 1.0 + 0 * x, seed=1.0, max_grow=10)
    with pytest.raises(NoBracket):
        find_root(lambda x: x)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=2, max_value=6))
def test_lyapunov_solution_is_psd_for_psd_noise(seed, n):
    rng = np.random.default_rng(seed)
    A, D = random_hurwitz(rng, n), random_psd(rng, n)
    V = solve_lyapunov(A, D)
    assert np.linalg.eigvalsh(V).min() > -1e-9 * np.abs(V).max()
