import math

import numpy as np
import pytest
from scipy import integrate

from beltrami.examples import (ExampleParams, check_fk_continuity, closed_form_residual,
                               ex1_derivatives, ex1_dilatations, ex1_f, ex1_fk, ex1_gk, ex1_mu,
                               ex1_q, ex1_Q_integral, ex2_coefficients, grid_closed_form_residual,
                               polar_identity_check, polar_identity_discrepancy)
from beltrami.grid import GridSpec, sample_function

P1 = ExampleParams(alpha=1.0)


def disk_points(rng, n, rmin=0.0, rmax=1.0):
    r = np.sqrt(rng.uniform(rmin ** 2, rmax ** 2, n))
    return r * np.exp(2j * np.pi * rng.random(n))


def test_params_validation():
    with pytest.raises(ValueError):
        ExampleParams(alpha=2.5, p=1.0)
    with pytest.raises(ValueError):
        ExampleParams(alpha=1.0, p=0.5)
    with pytest.raises(ValueError):
        ExampleParams(alpha=1.0, k=0.5)
    assert ExampleParams(alpha=1.0, k=4).rho_k == pytest.approx(0.75)


def test_mu_zero_on_inner_disk(rng):
    z = disk_points(rng, 1000, 0, 0.5)
    w = disk_points(rng, 1000, 0, 3)
    assert np.all(ex1_mu(z, w, P1) == 0)
    assert ex1_mu(np.array([0j]), np.array([0.3]), P1)[0] == 0


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0])
def test_mu_small_w_branch_bound(rng, alpha):
    P = ExampleParams(alpha=alpha)
    z = disk_points(rng, 4000, 0.5, 1.0)
    w = disk_points(rng, 4000, 0, 1.0)
    r = np.abs(z)
    c = alpha * (2 * r - 1)
    assert np.all(np.abs(ex1_mu(z, w, P)) <= (2 - c) / (2 + c) + 1e-15)


def test_small_w_branch_exceeds_printed_bound_for_alpha_above_one():
    # at w = 0 the branch equals |1 - c|/(1 + c), larger than (2 - c)/(2 + c) once c > sqrt(2)
    P = ExampleParams(alpha=1.5)
    z = np.array([0.99 + 0j])
    c = 1.5 * (2 * 0.99 - 1)
    assert abs(ex1_mu(z, np.array([0j]), P)[0]) > (2 - c) / (2 + c)
    assert abs(ex1_mu(z, np.array([0j]), P)[0]) <= ex1_q(z, P)[0]


def test_mu_large_w_value():
    assert abs(ex1_mu(np.array([0.75]), np.array([1.0]), P1)[0]) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_q_is_sup_over_w(rng, alpha):
    P = ExampleParams(alpha=alpha)
    z = disk_points(rng, 300, 0.5, 1.0)
    wa = np.concatenate([np.linspace(0, 0.999999, 400), np.linspace(1, 20, 50)])
    sup = np.max(np.abs(ex1_mu(z[:, None], wa[None, :] + 0j, P)), axis=1)
    np.testing.assert_allclose(sup, ex1_q(z, P), atol=1e-5)
    assert np.all(sup <= ex1_q(z, P) + 1e-15)


def test_f_values():
    assert ex1_f(np.array([0.75]), P1)[0] == pytest.approx(0.5)
    assert ex1_f(np.array([0.3j]), P1)[0] == 0
    assert ex1_f(np.array([1.0]), P1)[0] == 1
    assert abs(ex1_f(np.array([0.999999j]), P1)[0]) == pytest.approx(1, abs=1e-5)


def test_f_continuous_at_half():
    z = 0.5 * np.exp(1j * np.linspace(0, 6, 20))
    assert np.abs(ex1_f(z * (1 + 1e-12), P1)).max() < 1e-10


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("k", [4, 8, 32])
def test_fk_gk_roundtrip(rng, alpha, k):
    P = ExampleParams(alpha=alpha, k=k)
    y = disk_points(rng, 10_000)
    assert np.abs(ex1_fk(ex1_gk(y, P), P) - y).max() < 1e-12


def test_gk_outer_value():
    assert ex1_gk(np.array([0.5]), P1.with_k(4))[0] == pytest.approx(0.75)
    assert ex1_f(np.array([0.75]), P1)[0] == pytest.approx(0.5)


def test_gk_linear_inside_inner_radius():
    P = P1.with_k(8)
    s0 = P.inner_image_radius
    assert s0 == pytest.approx(0.25)
    y = np.array([0.05, 0.1j, 0.2 + 0.1j])
    ratio = ex1_gk(y, P) / y
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-14)


@pytest.mark.parametrize("k", [4, 8, 16, 32])
def test_fk_continuity(k):
    assert check_fk_continuity(P1.with_k(k)) < 1e-10


@pytest.mark.parametrize("k", [4, 8, 16, 32])
def test_fk_uniform_approximation(k):
    P = P1.with_k(k)
    z = GridSpec(512).nodes()
    d = np.abs(ex1_fk(z, P) - ex1_f(z, P)).max()
    assert d <= P.inner_image_radius + 1e-15


def test_fk_identity_when_truncation_inactive(rng):
    P = P1.with_k(2)
    assert not P.truncation_active
    z = disk_points(rng, 100)
    np.testing.assert_array_equal(ex1_fk(z, P), z)


def test_dilatation_values():
    assert ex1_dilatations(np.array([0.75]), P1, "Kmu")[0] == pytest.approx(4)
    assert ex1_dilatations(np.array([1.0]), P1.with_k(4), "Kmugk")[0] == pytest.approx(2)
    assert ex1_dilatations(np.array([0.5]), P1, "Kmu")[0] == math.inf
    with pytest.raises(ValueError):
        ex1_dilatations(np.array([0.75]), P1, "bogus")


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("k", [4, 8, 16])
def test_kmu_bounded_by_k_beyond_threshold(alpha, k):
    P = ExampleParams(alpha=alpha, k=k)
    r0 = (2 + k * alpha) / (2 * k * alpha)
    if r0 >= 1:
        pytest.skip("threshold outside the disk")
    r = np.linspace(r0, 0.999, 500)
    assert np.all(ex1_dilatations(r, P, "Kmu") <= k * (1 + 1e-14))


def test_kmuk_matches_grid_dilatation_of_fk():
    from beltrami.diagnostics import dilatation_fields
    from beltrami.grid import wirtinger_derivatives

    P = P1.with_k(4)
    g = GridSpec(512)
    fz, fzb = wirtinger_derivatives(sample_function(lambda z: ex1_fk(z, P), g))
    _, K, _ = dilatation_fields(fz.samples, fzb.samples)
    z = g.nodes()
    r = np.abs(z)
    band = (r > P.rho_k + 3 * g.spacing) & (r < 0.95)
    np.testing.assert_allclose(K[band], ex1_dilatations(z[band], P, "Kmuk"), rtol=1e-3)


def test_ex2_split(rng):
    z = disk_points(rng, 1000)
    w = disk_points(rng, 1000, 0, 2)
    mu, nu = ex2_coefficients(z, w, P1)
    np.testing.assert_allclose(np.abs(mu) + np.abs(nu), np.abs(ex1_mu(z, w, P1)), atol=1e-15)
    inner = np.abs(z) <= 0.5
    assert np.all(mu[inner] == 0) and np.all(nu[inner] == 0)


def test_ex2_residual_with_closed_form(rng):
    z = disk_points(rng, 1000, 0.51, 0.99)
    fz, fzb = ex1_derivatives(z, P1)
    mu, nu = ex2_coefficients(z, ex1_f(z, P1), P1)
    assert np.abs(fzb - mu * fz - nu * np.conj(fz)).max() < 1e-14


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_closed_form_residual_exact(rng, alpha):
    P = ExampleParams(alpha=alpha)
    z = disk_points(rng, 1000, 0.51, 0.99)
    assert closed_form_residual(P, z).max() < 1e-13


def test_grid_closed_form_residual_second_order():
    errs = []
    for n in (256, 512):
        g = GridSpec(n)
        errs.append(grid_closed_form_residual(sample_function(lambda z: ex1_f(z, P1), g), P1, 0.6, 0.9))
    assert errs[1] < errs[0] / 3.5


def test_polar_identity_trivial_cases():
    g = GridSpec(64)
    assert polar_identity_check(sample_function(lambda z: z, g)) < 1e-13
    assert polar_identity_check(sample_function(lambda z: z * z, g)) < 1e-12


def test_polar_identity_example():
    # the chain rule is applied to the same differences, so the identity holds to roundoff
    for n in (256, 512):
        g = GridSpec(n)
        f = sample_function(lambda z: ex1_f(z, ExampleParams(alpha=0.7)), g)
        assert polar_identity_check(f) < 1e-12


def test_polar_identity_reports_excluded_nodes():
    g = GridSpec(64)
    d, excluded = polar_identity_discrepancy(sample_function(lambda z: np.conj(z), g))
    assert excluded > 0 and d.size == 0


@pytest.mark.parametrize("alpha,p", [(1.0, 1.0), (0.5, 2.0), (1.2, 1.5), (0.8, 1.0)])
def test_q_integral_against_adaptive_quadrature(alpha, p):
    P = ExampleParams(alpha=alpha, p=p)
    ref, _ = integrate.quad(lambda r: ((r ** alpha + 1) / (alpha * r ** alpha)) ** p * r, 0, 1,
                            limit=200, epsabs=1e-13, epsrel=1e-12)
    assert ex1_Q_integral(P, p) == pytest.approx(2 * math.pi * ref, rel=1e-8)


def test_q_integral_closed_form_alpha_one():
    assert ex1_Q_integral(P1) == pytest.approx(3 * math.pi)
