"""Randomized invariant suites shared by the property tests and the acceptance runner.

Each suite runs ``cases`` seeded random cases and returns the list of
failure descriptions (empty when everything holds).
"""

import math

import numpy as np

from fock_lab.fock import gram_diagnostics, weighted_membership_integral
from fock_lab.products import ProductForm, tail_bound
from fock_lab.sequences import FamilySpec, PerturbationSpec, dist, make_sequence

SEED = 20240601


def dist_lipschitz(cases: int = 1000, seed: int = SEED) -> list:
    rng = np.random.default_rng(seed)
    window = 12.0
    # axis-family points are sparse off the axes: the nearest zero of z can be
    # |z| away, so the sequences are built on twice the sampling radius
    build = 2.0 * window + 2.0
    seqs = [
        make_sequence(FamilySpec.lattice(1.0), None, build),
        make_sequence(FamilySpec.lattice(0.3), PerturbationSpec.full_beta(0.4), build),
        make_sequence(FamilySpec.lattice(0.7, 2), PerturbationSpec.strip_beta(-0.3, 2), build),
        make_sequence(FamilySpec.als(), PerturbationSpec.als_beta(0.3), build),
        make_sequence(FamilySpec.als(), PerturbationSpec.angular_power(0.7), build),
    ]
    failures = []
    for k in range(cases):
        seq = seqs[k % len(seqs)]
        r = rng.uniform(0, window - 1.0, 2)
        th = rng.uniform(0, 2 * math.pi, 2)
        z1, z2 = r * np.exp(1j * th)
        if rng.random() < 0.3:  # nearby pairs probe the local behaviour
            z2 = z1 + rng.normal(scale=0.05) + 1j * rng.normal(scale=0.05)
            if abs(z2) > window - 1.0:
                continue
        d1, d2 = dist(z1, seq), dist(z2, seq)
        if abs(d1 - d2) > abs(z1 - z2) + 1e-12:
            failures.append(f"case {k}: |{d1} - {d2}| > |{z1} - {z2}|")
    return failures


def _random_form(rng):
    kind = rng.integers(0, 8)
    if kind == 0:
        return ProductForm.als()
    if kind == 1:
        return ProductForm.als(PerturbationSpec.als_beta(float(rng.uniform(-0.24, 1.0))))
    if kind == 2:
        return ProductForm.als(PerturbationSpec.angular_power(float(rng.uniform(0.55, 0.95))))
    if kind == 3:
        N = int(rng.integers(1, 4))
        return ProductForm.strip(float(rng.uniform(0.1, 1.0)), float(rng.uniform(-0.5, 0.5)), N)
    if kind == 4:
        return ProductForm.plane(float(rng.uniform(0.1, 1.0)), float(rng.uniform(-0.5, 0.5)))
    if kind == 5:
        return ProductForm.phi(float(rng.uniform(0.55, 0.95)))
    if kind == 6:
        table = [((int(rng.integers(-20, 21)), int(rng.integers(-20, 21))), float(rng.normal(scale=0.1)),
                  float(rng.normal(scale=0.1))) for _ in range(5)]
        table = [t for t in table if t[0] != (0, 0)]
        fam = FamilySpec.lattice(0.5)
        return ProductForm("full_plane_genus2", fam, PerturbationSpec.tabulated(table))
    return ProductForm.radial()


def tail_bound_monotone(cases: int = 1000, seed: int = SEED + 1) -> list:
    rng = np.random.default_rng(seed)
    failures = []
    for k in range(cases):
        form = _random_form(rng)
        z = rng.uniform(0, 10) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        R = max(2.0 * abs(z), 1.5) * (1.0 + rng.uniform(0, 3))
        R2 = R * (1.0 + rng.uniform(1e-3, 4))
        a, b = tail_bound(form, z, R), tail_bound(form, z, R2)
        if not (math.isfinite(a) and a >= 0 and b <= a * (1 + 1e-12)):
            failures.append(f"case {k}: {form.kind.value} bound({R:.4g})={a} < bound({R2:.4g})={b}")
    return failures


def gram_eigenvalue(cases: int = 1000, seed: int = SEED + 2) -> list:
    rng = np.random.default_rng(seed)
    failures = []
    for k in range(cases):
        n = int(rng.integers(1, 41))
        pts = rng.uniform(0, 3, n) * np.exp(1j * rng.uniform(0, 2 * math.pi, n))
        if n > 1 and rng.random() < 0.1:
            pts[-1] = pts[0]
        s = gram_diagnostics(pts, 4.0)
        rot = gram_diagnostics(pts * np.exp(1j * rng.uniform(0, 2 * math.pi)), 4.0)
        perm = gram_diagnostics(rng.permutation(pts), 4.0)
        if s.smallest_eigenvalue > 1 + 1e-12:
            failures.append(f"case {k}: smallest eigenvalue {s.smallest_eigenvalue} > 1")
        for other in (rot, perm):
            if abs(other.smallest_eigenvalue - s.smallest_eigenvalue) > 1e-10:
                failures.append(f"case {k}: eigenvalue changed under relabelling")
    return failures


def membership_monotone(cases: int = 1000, seed: int = SEED + 3) -> list:
    """I(R) nondecreasing in R; beyond |z| = 1 the curve is nonincreasing in beta."""
    rng = np.random.default_rng(seed)
    failures = []
    for k in range(cases):
        coef = rng.normal(size=4) + 1j * rng.normal(size=4)
        poly = np.polynomial.Polynomial(coef)

        def F(z, poly=poly):
            with np.errstate(divide="ignore"):
                return np.log(np.abs(poly(z)))
        radii = [1.0] + sorted(set(float(x) for x in 0.5 * rng.integers(3, 9, 3)))
        alpha = float(rng.uniform(0, 1))
        b1, b2 = sorted(rng.uniform(-1, 2, 2))
        c1 = weighted_membership_integral(F, alpha, b1, radii, cell=0.25, arc_density=4)
        c2 = weighted_membership_integral(F, alpha, b2, radii, cell=0.25, arc_density=4)
        for c in (c1, c2):
            v = c.integral_values
            if any(b < a for a, b in zip(v[:-1], v[1:])):
                failures.append(f"case {k}: curve decreases in R: {v}")
        for j in range(1, len(radii)):
            inc1 = c1.integral_values[j] - c1.integral_values[0]
            inc2 = c2.integral_values[j] - c2.integral_values[0]
            if inc2 > inc1 * (1 + 1e-12) + 1e-300:
                failures.append(f"case {k}: beta {b2:.3g} above beta {b1:.3g} at R={radii[j]}")
    return failures


SUITES = {
    "dist Lipschitz": dist_lipschitz,
    "tail-bound monotonicity": tail_bound_monotone,
    "Gram eigenvalue <= 1": gram_eigenvalue,
    "membership monotonicity": membership_monotone,
}
