import math

import numpy as np
import pytest

from fock_lab.errors import NumericResourceError
from fock_lab.fock import (QuadratureSpec, bargmann, bargmann_estimate, bargmann_shift_identity_residual,
                           completeness_probe, fock_inner, fock_norm_curve, gabor_atom, gaussian_integral,
                           gram_diagnostics, gram_matrix, kernel, kernel_function, minimality_probe,
                           weighted_membership_integral)
from fock_lab.products import ProductForm, log_G_gamma_closed
from fock_lab.sequences import FamilySpec, PerturbationSpec, build_sequence


def G_closed_log(z):
    return log_G_gamma_closed(z).real


# ---------------------------------------------------------------- atoms and transform

def test_gabor_atom_examples():
    t = np.linspace(-3, 3, 13)
    assert np.allclose(gabor_atom(0, 0, t), np.exp(-math.pi * t ** 2))
    assert gabor_atom(1.7, 0, 1.7) == pytest.approx(1.0)
    assert np.allclose(np.abs(gabor_atom(0, 2.3, t)), np.exp(-math.pi * t ** 2))


@pytest.mark.parametrize("z", [0, 1, 1j, 1 + 1j])
def test_bargmann_of_gaussian_is_constant(z):
    # int e^{-2 pi x^2 + 2 pi x z} dx = 2^{-1/2} e^{pi z^2 / 2}
    val = bargmann(lambda t: np.exp(-math.pi * t ** 2), z)
    assert abs(val - 2 ** -0.25) < 1e-10


def test_bargmann_of_zero_and_error_estimates():
    assert bargmann(lambda t: np.zeros_like(t), 1 + 1j) == 0
    est = bargmann_estimate(lambda t: np.exp(-math.pi * t ** 2), 0.5 - 0.5j)
    assert est.step_error < 1e-10 and est.tail_bound < 1e-20


def test_bargmann_tail_and_domain_errors():
    q = QuadratureSpec(time_halfwidth=2.0, time_step=1e-2)
    with pytest.raises(NumericResourceError):
        bargmann(lambda t: np.ones_like(t), 0.9, q)
    with pytest.raises(ValueError):
        bargmann(lambda t: np.ones_like(t), 5.0)


@pytest.mark.parametrize("z", [0, 1, 1j, 1 + 1j, 2 - 1j])
def test_shift_identity_residual(z):
    assert bargmann_shift_identity_residual(z, QuadratureSpec(8.0, 1e-3)) <= 1e-6


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(angular_count=63)
    with pytest.raises(ValueError):
        QuadratureSpec(angular_count=32)
    with pytest.raises(ValueError):
        QuadratureSpec(time_step=-1.0)


# ---------------------------------------------------------------- kernels

def test_kernel_examples():
    for w in (0, 1 + 2j, -3j):
        assert kernel(0, w).value == pytest.approx(1.0)
    z = 1.3 - 0.7j
    assert kernel(z, z, normalized=True).log_mod == pytest.approx(math.pi * abs(z) ** 2 / 2)
    k = kernel_function(z, normalized=True)
    assert abs(fock_inner(k, k) - 1.0) < 1e-6


def test_reproducing_property_for_cubic_polynomials():
    rng = np.random.default_rng(11)
    for _ in range(5):
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        p = np.polynomial.Polynomial(c)
        z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        val = fock_inner(lambda w: p(w), kernel_function(z))
        assert abs(val - p(z)) < 1e-6 * max(1.0, abs(p(z)))


@pytest.mark.parametrize("z", [0, 0.5 + 0.5j, 1.2 - 0.9j, 2.0j])
def test_kernel_norm(z):
    k = kernel_function(z)
    norm2 = fock_inner(k, k).real
    assert norm2 == pytest.approx(math.exp(math.pi * abs(z) ** 2), rel=1e-6)


def test_gaussian_measure_is_a_probability():
    assert gaussian_integral(lambda w: np.ones_like(w)) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- membership integrals

def test_membership_zero_function():
    curve = weighted_membership_integral(lambda z: np.full(z.shape, -np.inf), 0, 0, [1, 2, 3])
    assert curve.integral_values == [0.0, 0.0, 0.0]


def test_membership_constant_matches_exact_value():
    # int_{|z|<=R} e^{-pi |z|^2} dA = 1 - e^{-pi R^2}; beta = 0 weight is 1/2
    curve = fock_norm_curve(lambda z: np.zeros(z.shape), [0.5, 1.0, 2.0], cell=0.01)
    for R, v in zip(curve.radii, curve.integral_values):
        assert v == pytest.approx(1 - math.exp(-math.pi * R * R), rel=1e-4)


def test_membership_closed_form_flattens_above_one_half():
    curve = weighted_membership_integral(G_closed_log, 0.0, 0.75, [5, 10, 20], cell=0.5, envelope="axis")
    assert curve.final_increment() < 0.1
    grow = weighted_membership_integral(G_closed_log, 0.0, 0.25, [5, 10, 20], cell=0.5, envelope="axis")
    assert grow.final_increment() > 0.3
    assert all(b > a for a, b in zip(grow.integral_values[:-1], grow.integral_values[1:]))


def test_membership_validation_and_warnings():
    with pytest.raises(ValueError):
        weighted_membership_integral(G_closed_log, 0, 0, [2, 1])
    with pytest.raises(ValueError):
        weighted_membership_integral(G_closed_log, 0, 0, [1, 2], cell=0.0)
    curve = weighted_membership_integral(lambda z: np.zeros(z.shape), 0, 0, [2, 3], cell=2.0)
    assert curve.warnings


# ---------------------------------------------------------------- probes

def test_minimality_probe_unperturbed_flattens():
    curve = minimality_probe(ProductForm.als(), math.sqrt(2.0), [10, 20, 40])
    assert curve.final_increment() < 0.05


def test_minimality_probe_negative_shift_grows():
    form = ProductForm.als(PerturbationSpec.als_beta(-0.3))
    lam = form.sequence(3.0).point(("re", 1, 1))
    curve = minimality_probe(form, lam, [10, 20, 40])
    assert curve.final_increment() > 0.1


def test_minimality_probe_classification_does_not_depend_on_removed_point():
    form = ProductForm.als(PerturbationSpec.als_beta(-0.3))
    seq = form.sequence(4.0)
    incs = [minimality_probe(form, seq.point(idx), [10, 20, 40]).final_increment()
            for idx in (("re", 1, 1), ("im", -1, 2), ("re", -1, 0))]
    assert all(i > 0.1 for i in incs)
    curves = [minimality_probe(ProductForm.als(), lam, [10, 20, 40]).final_increment()
              for lam in (math.sqrt(2.0), 2j, -1.0)]
    assert all(i < 0.05 for i in curves)


def test_minimality_probe_rejects_non_zero():
    with pytest.raises(ValueError):
        minimality_probe(ProductForm.als(), 1.5, [5, 10])


def test_completeness_probe_sides():
    flat = completeness_probe(ProductForm.als(PerturbationSpec.als_beta(0.5)), [10, 20, 40])
    assert flat.final_increment() < 0.05
    grows = completeness_probe(ProductForm.als(), [10, 20, 40])
    assert grows.final_increment() > 0.1
    with pytest.raises(ValueError):
        completeness_probe(ProductForm.als(), [10, 20], degree=2)


# ---------------------------------------------------------------- Gram matrices

def test_gram_examples():
    one = gram_diagnostics(np.array([0.3 + 0.2j]), 5)
    assert one.smallest_eigenvalue == pytest.approx(1.0)
    far = gram_diagnostics(np.array([0j, 10 + 0j]), 20)
    assert far.smallest_eigenvalue == pytest.approx(1.0, abs=1e-12)
    dup = gram_diagnostics(np.array([1j, 1j]), 5)
    assert abs(dup.smallest_eigenvalue) < 1e-12


def test_gram_two_by_two_closed_form():
    a, b = 0.2 + 0.1j, 0.5 - 0.3j
    g = math.exp(-math.pi * abs(a - b) ** 2 / 2)
    s = gram_diagnostics(np.array([a, b]), 5)
    assert s.smallest_eigenvalue == pytest.approx(1 - g, abs=1e-14)
    assert s.largest_eigenvalue == pytest.approx(1 + g, abs=1e-14)


def test_gram_entries_match_quadrature():
    a, b = 0.4 - 0.2j, -0.3 + 0.5j
    G = gram_matrix([a, b])
    val = fock_inner(kernel_function(b, True), kernel_function(a, True))
    assert abs(G[0, 1] - val) < 1e-8


def test_gram_limits():
    seq = build_sequence(FamilySpec.lattice(1.0), 30.0)
    with pytest.raises(ValueError):
        gram_diagnostics(seq, 30.0)
    with pytest.raises(ValueError):
        gram_diagnostics(seq, 0.5)
