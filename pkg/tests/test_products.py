import math

import numpy as np
import pytest

from conftest import phase_diff
from fock_lab.errors import NumericResourceError
from fock_lab.products import (FormKind, LogValue, ProductForm, dist_ratio, eval_G_gamma_closed,
                               eval_log_product, eval_log_product_many, log_G_gamma_closed,
                               perturbation_from_dict, perturbation_to_dict, phi_optimality, tail_bound,
                               truncated_log_product, zero_set)
from fock_lab.sequences import FamilySpec, PerturbationSpec, build_sequence, make_sequence

ALS = ProductForm.als()


def assert_logvalue(v, log_mod, phase, tol):
    assert abs(v.log_mod - log_mod) <= tol
    assert abs(phase_diff(v.phase, phase)) <= tol


# ---------------------------------------------------------------- frozen oracles

def test_closed_form_against_oracle(oracle):
    for x, y, lm, ph in oracle["closed_form"]:
        z = complex(x, y)
        assert_logvalue(eval_G_gamma_closed(z), lm, ph, 1e-12)
        v = eval_log_product(ALS, z)
        assert_logvalue(v, lm, ph, v.tail_bound + 1e-11)


def test_lattice_strip_against_sigma_oracle(oracle):
    for nu, beta, N, x, y, lm, ph in oracle["lattice_strip"]:
        v = eval_log_product(ProductForm.strip(nu, beta, int(N)), complex(x, y))
        assert_logvalue(v, lm, ph, v.tail_bound + 1e-11)


def test_axis_shift_against_oracle(oracle):
    for beta, x, y, lm, ph in oracle["als_beta"]:
        v = eval_log_product(ProductForm.als(PerturbationSpec.als_beta(beta)), complex(x, y))
        assert_logvalue(v, lm, ph, v.tail_bound + 1e-11)


def test_phi_against_oracle(oracle):
    for s, x, y, lm, ph in oracle["phi"]:
        v = phi_optimality(complex(x, y), s)
        assert_logvalue(v, lm, ph, v.tail_bound + 1e-11)


@pytest.mark.parametrize("form", [ProductForm.plane(0.5, 0.2), ProductForm.strip(0.5, 0.3, 2),
                                  ProductForm.plane(0.8, -0.15)])
def test_lattice_forms_against_richardson_extrapolated_disc_sums(form):
    z = 1.2 + 0.7j
    T = [truncated_log_product(form, z, R) for R in (100, 200, 400)]
    r1, r2 = 2 * T[1] - T[0], 2 * T[2] - T[1]
    ref = (4 * r2 - r1) / 3
    v = eval_log_product(form, z, 1e-6)
    assert abs(v.log_mod - ref.real) < 1e-6
    assert abs(phase_diff(v.phase, ref.imag)) < 1e-6


def test_axis_forms_against_direct_ring_sums():
    form = ProductForm.als(PerturbationSpec.angular_power(0.8))
    z = 0.9 - 0.4j
    v = eval_log_product(form, z)
    # the rotation tail decays like N^(1/2 - s); extrapolate the ring sums with that rate
    a = 4.0 ** (0.8 - 0.5)
    T = [truncated_log_product(form, z, math.sqrt(2 * N)) for N in (10000, 40000)]
    ref = (a * T[1] - T[0]) / (a - 1)
    assert abs(v.log_mod - ref.real) < 3e-3
    assert abs(phase_diff(v.phase, ref.imag)) < 3e-3


# ---------------------------------------------------------------- examples

def test_axis_form_zero_at_one():
    v = eval_log_product(ALS, 1.0)
    assert v.is_zero and v.log_mod == -math.inf


def test_strip_form_zero_at_lattice_point():
    v = eval_log_product(ProductForm.strip(0.5), 2 + 3j)
    assert v.is_zero and v.log_mod == -math.inf


def test_axis_form_at_sqrt3():
    v = eval_log_product(ALS, math.sqrt(3.0))
    assert v.log_mod == pytest.approx(math.log(2 / (3 * math.pi)), abs=1e-12)
    assert abs(phase_diff(v.phase, math.pi)) < 1e-12


def test_closed_form_examples():
    assert eval_G_gamma_closed(1.0).is_zero
    c = eval_G_gamma_closed(1e-5)
    assert c.log_mod == pytest.approx(math.log(0.5), abs=1e-9)
    assert abs(phase_diff(c.phase, math.pi)) < 1e-9
    c0 = eval_G_gamma_closed(0.0)
    assert c0.log_mod == pytest.approx(math.log(0.5), abs=1e-15)
    c = eval_G_gamma_closed(math.sqrt(3.0))
    assert c.value == pytest.approx(-2 / (3 * math.pi), rel=1e-13)


def test_closed_form_large_imaginary_part_does_not_overflow():
    z = 30 * np.exp(1j * math.pi / 4)
    v = eval_G_gamma_closed(z)
    # |sin(w)| ~ e^{|Im w|}/2 with Im w = pi |z|^2 / 2
    expected = math.log(abs(z * z - 1) / (math.pi * abs(z) ** 2)) + math.pi * 900 / 2 - math.log(2)
    assert v.log_mod == pytest.approx(expected, abs=1e-9)
    assert np.isfinite(log_G_gamma_closed(np.array([z, 100 + 100j])).real).all()


def test_leading_factor_normalization_at_origin():
    # lattice forms: only the leading factor (0 - lambda_00) survives at z = 0
    for nu in (0.3, 0.5, 1.0):
        v = eval_log_product(ProductForm.strip(nu, 0.2, 2), 0.0)
        assert v.value == pytest.approx(-nu, abs=1e-14)
    # the axis form carries the factor 1/2 so that it equals the closed form
    assert eval_log_product(ALS, 0.0).value == pytest.approx(-0.5, abs=1e-15)


def test_radial_limit_is_minus_twice_the_closed_form():
    for z in (0.3 + 0.4j, 2.2 - 1.1j, -1.7 + 3.1j):
        a = eval_log_product(ProductForm.radial(), z)
        b = eval_G_gamma_closed(z)
        assert a.log_mod == pytest.approx(b.log_mod + math.log(2.0), abs=1e-9)
        assert abs(phase_diff(a.phase, b.phase + math.pi)) < 1e-9


def test_logvalue_value_and_sentinel():
    v = LogValue.from_log(complex(math.log(2.0), 0.5), 0.0)
    assert v.value == pytest.approx(2 * complex(math.cos(0.5), math.sin(0.5)))
    zero = eval_log_product(ALS, -1.0)
    assert zero.is_zero and zero.value == 0


def test_phase_in_principal_range():
    for z in np.random.default_rng(3).normal(size=40) * 4 + 1j * np.random.default_rng(4).normal(size=40) * 4:
        v = eval_log_product(ProductForm.strip(0.5, 0.3, 2), z, 1e-8)
        assert -math.pi < v.phase <= math.pi


def test_many_matches_scalar():
    form = ProductForm.als(PerturbationSpec.als_beta(0.5))
    z = np.array([0.4 + 0.3j, 2.5 - 1.5j, 1.1j, 3.0 + 0.2j])
    lm, ph, tb, zero = eval_log_product_many(form, z)
    for k, zk in enumerate(z):
        v = eval_log_product(form, zk)
        assert lm[k] == pytest.approx(v.log_mod, abs=1e-12)
        assert abs(phase_diff(ph[k], v.phase)) < 1e-12


def test_rel_tol_validation_and_resource_cap():
    with pytest.raises(ValueError):
        eval_log_product(ALS, 1 + 1j, 0.0)
    with pytest.raises(NumericResourceError) as info:
        eval_log_product(ALS, 200 + 1j)
    assert info.value.required > 0
    with pytest.raises(NumericResourceError, match="R_t"):
        eval_log_product(ProductForm.plane(0.5, 0.2), 30 + 30j)


# ---------------------------------------------------------------- tail bounds

def test_tail_bound_dominates_actual_tail():
    z = 1.05 + 0.1j
    for form in (ALS, ProductForm.als(PerturbationSpec.als_beta(0.5)), ProductForm.strip(0.5, 0.3, 2),
                 ProductForm.plane(0.5, 0.2)):
        R = 10.0
        inner = truncated_log_product(form, z, R)
        outer = truncated_log_product(form, z, 1000.0 if form.family.family.value == "als" else 300.0)
        assert abs(outer - inner) <= tail_bound(form, z, R)


def test_tail_bound_examples():
    assert tail_bound(ALS, 0.0, 10.0) == 0.0
    assert tail_bound(ALS, 1.0, 20.0) <= tail_bound(ALS, 1.0, 10.0)
    with pytest.raises(ValueError):
        tail_bound(ALS, 6.0, 10.0)


def test_truncation_consistency():
    form = ProductForm.als(PerturbationSpec.als_beta(0.25))
    z = 2.3 + 1.9j
    loose = eval_log_product(form, z, 1e-6)
    tight = eval_log_product(form, z, 1e-12)
    assert abs(loose.log_mod - tight.log_mod) <= loose.tail_bound + tight.tail_bound + 1e-12


# ---------------------------------------------------------------- zero fidelity and symmetry

@pytest.mark.parametrize("form", [ProductForm.strip(0.5, 0.3, 2), ProductForm.als(PerturbationSpec.als_beta(0.5)),
                                  ProductForm.plane(0.7)])
def test_zero_fidelity(form):
    seq = form.sequence(6.0)
    inside = seq.points[np.abs(seq.points) <= 4.0]
    _, _, _, zero = eval_log_product_many(form, inside, 1e-6)
    assert zero.all()
    x = np.linspace(-4, 4, 41)
    grid = (x[:, None] + 1j * x[None, :]).ravel()
    grid = grid[np.abs(grid) <= 4.0]
    far = grid[zero_set(form, 7.0).distances(grid) >= 0.05]
    _, _, _, zero = eval_log_product_many(form, far, 1e-6)
    assert not zero.any()


@pytest.mark.parametrize("form", [ProductForm.strip(0.5), ProductForm.plane(0.6, 0.15), ALS])
def test_conjugation_symmetry_when_point_set_is_symmetric(form):
    for z in (0.7 + 1.3j, 2.1 - 0.4j, -1.5 + 0.8j):
        a = eval_log_product(form, z, 1e-6)
        b = eval_log_product(form, z.conjugate(), 1e-6)
        assert a.log_mod == pytest.approx(b.log_mod, abs=1e-8)
        assert abs(phase_diff(a.phase, -b.phase)) < 1e-8


def test_double_zero_at_fixed_point_is_merged():
    form = ProductForm.als(PerturbationSpec.als_beta(-0.25))
    zs = zero_set(form, 5.0)
    assert zs.distances(np.array([1.0 + 0j]))[0] == 0.0
    assert eval_log_product(form, 1.0).is_zero


# ---------------------------------------------------------------- phi

def test_phi_examples():
    v = phi_optimality(10j, 0.7)
    assert v.log_mod < 0
    assert phi_optimality(0, 0.7).log_mod == 0.0
    assert phi_optimality(3, 0.7).is_pole
    assert phi_optimality(-20, 0.7).log_mod > phi_optimality(20j, 0.7).log_mod + 5
    with pytest.raises(ValueError):
        phi_optimality(1j, 0.4)


# ---------------------------------------------------------------- dist ratio

def test_dist_ratio_examples():
    ref = build_sequence(FamilySpec.als(), 30.0)
    assert dist_ratio(2.5 + 0.3j, ref, ref) == 1.0
    moved = make_sequence(FamilySpec.als(), PerturbationSpec.als_beta(0.25), 30.0)
    assert dist_ratio(math.sqrt(2.0), moved, ref) == math.inf
    assert dist_ratio(math.sqrt(3.0) + 0.01j, moved, ref) < 0.1
    # at the midpoint sqrt(2n+1) the moved point sqrt(2n+4 beta) is (1 - 4 beta)/(2 sqrt(2n))
    # away while the ring radii are 1/(2 sqrt(2n)) away, so the ratio tends to |1 - 4 beta|
    for beta in (0.1, 0.5):
        moved = make_sequence(FamilySpec.als(), PerturbationSpec.als_beta(beta), 30.0)
        errs = []
        for n in (10, 40, 160):
            mid = 0.5 * (math.sqrt(2 * n) + math.sqrt(2 * n + 2))
            errs.append(abs(dist_ratio(mid, moved, ref) - abs(1 - 4 * beta)))
        assert errs[-1] < 0.01
        assert errs[-1] <= errs[0] + 1e-12


def test_form_validation_and_serialization():
    with pytest.raises(ValueError):
        ProductForm(FormKind.STRIP, FamilySpec.als())
    with pytest.raises(ValueError):
        ProductForm(FormKind.ALS, FamilySpec.lattice(0.5))
    with pytest.raises(ValueError):
        ProductForm.phi(0.3)
    for p in (PerturbationSpec.strip_beta(0.3, 2), PerturbationSpec.angular_power(0.7, 3, True),
              PerturbationSpec.tabulated([(("re", 1, 2), 0.1, 0.2)]), PerturbationSpec.als_beta(-0.1)):
        assert perturbation_from_dict(perturbation_to_dict(p)) == p
