"""Growth-exponent sweeps along paths, decay fits and completeness/minimality sweeps."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .fock import FLAT_THRESHOLD, MembershipCurve, completeness_probe, minimality_probe
from .products import (DEFAULT_REL_TOL, FormKind, ProductForm, eval_log_product_many,
                       log_G_gamma_closed, phi_cutoff, zero_set)
from .sequences import Family, FamilySpec, PerturbationSpec, reference_points

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
GROW_THRESHOLD = 0.1
SECTOR_MARGIN = math.pi / 16


class PathKind(str, enum.Enum):
    REAL_MIDPOINTS = "real_midpoints"
    IMAGINARY_MIDPOINTS = "imaginary_midpoints"
    RAY = "ray"
    DIAGONAL_RAY = "diagonal_ray"


@dataclass(frozen=True)
class PathSpec:
    """Where to sample: midpoints between zeros on a half-axis, or a ray."""

    kind: PathKind
    r_min: float
    r_max: float
    count: int = 64
    theta: float | None = None
    floor: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        if not (0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if self.count < 2:
            raise ValueError("count must be >= 2")
        if self.kind is PathKind.RAY:
            if self.theta is None:
                raise ValueError("ray paths need theta")
            if not in_sector(self.theta):
                raise ValueError("ray angle must keep pi/16 away from the real axis")
        if self.kind is PathKind.DIAGONAL_RAY:
            object.__setattr__(self, "theta", math.pi / 4)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "r_min": self.r_min, "r_max": self.r_max, "count": self.count,
                "theta": self.theta, "floor": self.floor}


def in_sector(theta: float) -> bool:
    t = theta % (2.0 * math.pi)
    return (SECTOR_MARGIN <= t <= math.pi - SECTOR_MARGIN) or (
        math.pi + SECTOR_MARGIN <= t <= 2.0 * math.pi - SECTOR_MARGIN)


@dataclass
class EstimateReport:
    samples: list
    fitted_exponent: float
    stderr: float
    bracket: tuple
    intercept: float = 0.0
    residuals: list = field(default_factory=list)
    M_nuisance: float | None = None
    weight_exponent: float = 0.0
    variant: str = ""

    def to_dict(self) -> dict:
        return {"samples": [list(s) for s in self.samples], "fitted_exponent": self.fitted_exponent,
                "stderr": self.stderr, "bracket": list(self.bracket), "intercept": self.intercept,
                "max_abs_residual": max((abs(r) for r in self.residuals), default=0.0),
                "M_nuisance": self.M_nuisance, "weight_exponent": self.weight_exponent,
                "variant": self.variant}


# ---------------------------------------------------------------------------
# fitting


def fit_exponent(samples) -> tuple[float, float]:
    """Least-squares slope of value against log r, with its standard error."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    r, v = arr[:, 0], arr[:, 1]
    if np.any(r <= 0):
        raise ValueError("radii must be positive")
    if np.unique(r).size < 2:
        raise ValueError("degenerate abscissae")
    res = stats.linregress(np.log(r), v)
    return float(res.slope), float(res.stderr)


def power_decay_fit(samples) -> tuple[float, float, float]:
    """Fit log_mod = -c r^p: regress log(-log_mod) on log r.  Returns (c, p, stderr of p)."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    bad = [(float(r), float(v)) for r, v in arr if not v < 0]
    if bad:
        raise ValueError(f"log_mod must be negative; offending samples: {bad[:10]}")
    res = stats.linregress(np.log(arr[:, 0]), np.log(-arr[:, 1]))
    return float(math.exp(res.intercept)), float(res.slope), float(res.stderr)


# ---------------------------------------------------------------------------
# paths


def _phi_zeros(s: float, n_max: int) -> np.ndarray:
    n = np.arange(1, n_max + 1, dtype=float)
    return n * np.exp(1j * math.pi / n ** s)


def _axis_zeros(form: ProductForm, window: float, imaginary: bool) -> np.ndarray:
    """Sorted positive coordinates of the zeros (and reference points) on a half-axis."""
    if form.kind is FormKind.PHI:
        pts = np.concatenate([_phi_zeros(form.s, int(window) + 2), np.arange(1, int(window) + 2)])
    else:
        pts = np.concatenate([zero_set(form, window).points,
                              zero_set(ProductForm(form.kind, form.family), window).points])
    if imaginary:
        sel = (np.abs(pts.real) < 1e-12) & (pts.imag > 0)
        coords = pts.imag[sel]
    else:
        sel = (np.abs(pts.imag) < 1e-12) & (pts.real > 0)
        coords = pts.real[sel]
    return np.unique(coords)


def _distance_to_zeros(form: ProductForm, z: np.ndarray) -> np.ndarray:
    window = float(np.max(np.abs(z))) + 3.0
    if form.kind is FormKind.PHI:
        n_max = phi_cutoff(complex(window), form.s)
        pts = np.concatenate([_phi_zeros(form.s, n_max), np.arange(1, n_max + 1)])
        return np.min(np.abs(z[:, None] - pts[None, :]), axis=1)
    return zero_set(form, window).distances(z)


def _subsample(values: np.ndarray, count: int) -> np.ndarray:
    if values.size <= count:
        return values
    idx = np.unique(np.round(np.linspace(0, values.size - 1, count)).astype(int))
    return values[idx]


def path_points(form: ProductForm, path: PathSpec) -> np.ndarray:
    """Sample points on the path, keeping the distance floor to all zeros.

    Midpoint paths take midpoints between consecutive zeros of the perturbed
    and reference sets merged together.  For the axis family the floor is
    applied to dist(z) * max(1, |z|), since ring gaps shrink like 1/|z|.
    """
    if path.kind in (PathKind.REAL_MIDPOINTS, PathKind.IMAGINARY_MIDPOINTS):
        coords = _axis_zeros(form, path.r_max + 2.0, path.kind is PathKind.IMAGINARY_MIDPOINTS)
        mids = 0.5 * (coords[:-1] + coords[1:])
        mids = mids[(mids >= path.r_min) & (mids <= path.r_max)]
        z = mids * (1j if path.kind is PathKind.IMAGINARY_MIDPOINTS else 1.0)
    else:
        r = np.geomspace(path.r_min, path.r_max, path.count)
        z = r * complex(math.cos(path.theta), math.sin(path.theta))
    z = np.asarray(z, dtype=complex)
    if z.size == 0:
        return z
    d = _distance_to_zeros(form, z)
    scale = np.maximum(1.0, np.abs(z)) if form.family.family is Family.ALS else 1.0
    z = z[d * scale >= path.floor]
    return _subsample(z, path.count)


# ---------------------------------------------------------------------------
# sweeps


def _log_ratio(form: ProductForm, z: np.ndarray, weight_exponent: float, variant: str, rel_tol: float):
    lm, _, _, zero = eval_log_product_many(form, z, rel_tol)
    r = np.abs(z)
    w = weight_exponent * np.log1p(r)
    if variant == "phi":
        return lm + w
    if variant == "axis":
        window = float(np.max(r)) + 3.0
        zl = zero_set(form, window)
        zg = zero_set(ProductForm(form.kind, form.family), window)
        base = log_G_gamma_closed(z).real
        return lm - base - (np.log(zl.distances(z)) - np.log(zg.distances(z))) + w
    d = zero_set(form, float(np.max(r)) + 3.0).distances(z)
    return lm - 0.5 * math.pi * r * r - np.log(d) + w


def ratio_sweep(form: ProductForm, weight_exponent: float, path: PathSpec, variant: str | None = None,
                rel_tol: float = DEFAULT_REL_TOL) -> EstimateReport:
    """Sample the compensated log-ratio along a path and fit its slope against log r.

    Variants: "gaussian" (log|G| - pi|z|^2/2 - log dist(z, zeros)), "axis"
    (log|G| - log|G_closed| - log(dist(z, zeros)/dist(z, reference))) and
    "phi" (log|phi|).  In every case weight_exponent * log(1 + |z|) is added.
    """
    if variant is None:
        variant = {FormKind.PHI: "phi", FormKind.ALS: "axis", FormKind.RADIAL: "axis"}.get(form.kind, "gaussian")
    if variant not in ("gaussian", "axis", "phi"):
        raise ValueError(f"unknown variant {variant}")
    z = path_points(form, path)
    if z.size < MIN_SAMPLES:
        raise ValueError(f"only {z.size} valid samples on the path (need {MIN_SAMPLES})")
    vals = _log_ratio(form, z, weight_exponent, variant, rel_tol)
    r = np.abs(z)
    order = np.argsort(r, kind="stable")
    r, vals = r[order], vals[order]
    samples = [(float(a), float(b)) for a, b in zip(r, vals)]
    res = stats.linregress(np.log(r), vals)
    resid = vals - (res.intercept + res.slope * np.log(r))
    bracket = (float(np.exp(vals.min())), float(np.exp(vals.max())))
    return EstimateReport(samples, float(res.slope), float(res.stderr), bracket, float(res.intercept),
                          [float(x) for x in resid], None, float(weight_exponent), variant)


def phi_ray_samples(s: float, theta: float, r_min: float, r_max: float, count: int = 40,
                    rel_tol: float = DEFAULT_REL_TOL) -> list:
    """(r, log|phi(r e^{i theta})|) on a geometric grid of radii."""
    form = ProductForm.phi(s)
    path = PathSpec(PathKind.RAY, r_min, r_max, count, theta=theta, floor=0.0)
    z = path_points(form, path)
    lm = eval_log_product_many(form, z, rel_tol)[0]
    return [(float(abs(a)), float(b)) for a, b in zip(z, lm)]


# ---------------------------------------------------------------------------
# completeness / minimality sweeps


class TransitionVerdict(str, enum.Enum):
    MINIMAL_AND_COMPLETE = "MinimalAndComplete-consistent"
    NOT_MINIMAL = "NotMinimal-consistent"
    NOT_COMPLETE = "NotComplete-consistent"
    INCONCLUSIVE = "Inconclusive"


class TransitionFamily(str, enum.Enum):
    ALS = "als"
    STRIP = "strip"
    FULL = "full"


@dataclass
class TransitionResult:
    beta: float
    verdict: TransitionVerdict
    removed: complex
    minimality: MembershipCurve
    completeness: MembershipCurve

    def to_dict(self) -> dict:
        return {"beta": self.beta, "verdict": self.verdict.value,
                "removed": [self.removed.real, self.removed.imag],
                "minimality": self.minimality.to_dict(), "completeness": self.completeness.to_dict()}


def classify(minimality: MembershipCurve, completeness: MembershipCurve,
             flat: float = FLAT_THRESHOLD, grow: float = GROW_THRESHOLD) -> TransitionVerdict:
    """Verdict from the final relative increments of the two probe curves."""
    m_inc = minimality.final_increment()
    c_inc = completeness.final_increment()
    if c_inc < flat:
        return TransitionVerdict.NOT_COMPLETE
    if m_inc > grow:
        return TransitionVerdict.NOT_MINIMAL
    if m_inc < flat and c_inc > grow:
        return TransitionVerdict.MINIMAL_AND_COMPLETE
    return TransitionVerdict.INCONCLUSIVE


def transition_form(family: TransitionFamily | str, beta: float, nu: float = 0.5,
                    strip_height: int = 1) -> ProductForm:
    family = TransitionFamily(family)
    if family is TransitionFamily.ALS:
        return ProductForm.als(PerturbationSpec.als_beta(beta) if beta != 0 else None)
    if family is TransitionFamily.STRIP:
        return ProductForm.strip(nu, beta, strip_height)
    return ProductForm.plane(nu, beta)


def probe_point(form: ProductForm) -> complex:
    """The zero removed by the minimality probe: the first moved point of the family."""
    fam = form.family
    if fam.family is Family.ALS:
        cols = {"axis": np.array([0]), "sign": np.array([1]), "n": np.array([1])}
    else:
        cols = {"m": np.array([1]), "n": np.array([1])}
    return complex(form.perturbation.moved_points(fam, cols, reference_points(fam, cols))[0])


def with_doubling(radii) -> list:
    """Append 2 * max(radii) so the flattening test I(2R) vs I(R) covers the largest radius."""
    radii = sorted(float(r) for r in radii)
    if 2.0 * radii[-1] not in radii:
        radii.append(2.0 * radii[-1])
    return radii


def phase_transition_sweep(family: TransitionFamily | str, beta_grid, radii, nu: float = 0.5,
                           strip_height: int = 1, cell: float = 0.5, arc_density: float = 8.0,
                           flat: float = FLAT_THRESHOLD, grow: float = GROW_THRESHOLD) -> list:
    """Run the minimality and completeness probes for each beta and classify.

    The completeness probe uses the constant polynomial as witness: if
    int |G|^2 dmu stays bounded, G itself is a nonzero Fock function
    vanishing on the sequence.
    """
    radii = with_doubling(radii)
    out = []
    for beta in sorted(float(b) for b in beta_grid):
        form = transition_form(family, beta, nu, strip_height)
        lam = probe_point(form)
        m = minimality_probe(form, lam, radii, cell=cell, arc_density=arc_density)
        c = completeness_probe(form, radii, cell=cell, arc_density=arc_density)
        verdict = classify(m, c, flat, grow)
        logger.info("beta=%g verdict=%s (minimality %.3g, completeness %.3g)", beta, verdict.value,
                    m.final_increment(), c.final_increment())
        out.append(TransitionResult(beta, verdict, lam, m, c))
    return out


def family_spec_for(family: TransitionFamily | str, nu: float = 0.5, strip_height: int = 1) -> FamilySpec:
    family = TransitionFamily(family)
    if family is TransitionFamily.ALS:
        return FamilySpec.als()
    return FamilySpec.lattice(nu, strip_height if family is TransitionFamily.STRIP else None)
