"""Bargmann transform, reproducing kernels and Gaussian-measure integrals.

The Fock space here is the space of entire functions square integrable
against dmu(z) = exp(-pi |z|^2) dA(z), whose reproducing kernel is
k_z(w) = exp(pi conj(z) w) with norm exp(pi |z|^2 / 2).

Membership integrals I(R) = int_{|z|<=R} |F|^2 W dmu are computed on a polar
grid whose radial cells are uniform in s = r^2.  With unit cells (or any
cell width dividing 1) the ring radii sqrt(2n) of the axis family fall on
cell boundaries, so no node sits on a zero ring.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfc, logsumexp

from .errors import NumericResourceError
from .products import (FormKind, LogValue, ProductForm, als_log_abs_fast, eval_log_product_many,
                       lattice_log_abs_fast, zero_set)
from .sequences import Family, PerturbationKind, PointSequence

logger = logging.getLogger(__name__)

#: integrand cut-off used when an axis-type envelope is requested
ENVELOPE_CUTOFF = 100.0
FLAT_THRESHOLD = 0.05
MAX_GRAM_POINTS = 2000


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretization parameters for the Bargmann integral and polar grids."""

    time_halfwidth: float = 8.0
    time_step: float = 1e-3
    radial_max: float = 10.0
    radial_step: float = 0.25
    angular_count: int = 64
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.time_halfwidth <= 0 or self.time_step <= 0:
            raise ValueError("time half-width and step must be positive")
        if self.time_step > self.time_halfwidth:
            raise ValueError("time step larger than the half-width")
        if self.radial_max <= 0 or self.radial_step <= 0:
            raise ValueError("radial parameters must be positive")
        if self.angular_count < 64 or self.angular_count % 2:
            raise ValueError("angular_count must be even and >= 64")

    def time_nodes(self) -> np.ndarray:
        count = int(round(2.0 * self.time_halfwidth / self.time_step))
        return -self.time_halfwidth + (np.arange(count) + 0.5) * self.time_step


@dataclass
class MembershipCurve:
    """Cumulative integrals I(R) over the discs |z| <= R."""

    radii: list
    integral_values: list
    weight_descriptor: tuple
    log_values: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    nodes: int = 0

    def relative_increments(self) -> list:
        """(I(R_{k+1}) - I(R_k)) / I(R_k) for consecutive radii."""
        out = []
        for a, b in zip(self.log_values[:-1], self.log_values[1:]):
            if a == -math.inf:
                out.append(0.0 if b == -math.inf else math.inf)
            else:
                out.append(math.expm1(b - a))
        return out

    def final_increment(self) -> float:
        inc = self.relative_increments()
        return inc[-1] if inc else math.nan

    def flattens(self, threshold: float = FLAT_THRESHOLD) -> bool:
        return self.final_increment() < threshold

    def to_dict(self) -> dict:
        return {"radii": list(self.radii), "integral_values": list(self.integral_values),
                "log_values": list(self.log_values), "weight": list(self.weight_descriptor),
                "relative_increments": self.relative_increments(), "warnings": list(self.warnings),
                "nodes": self.nodes}


# ---------------------------------------------------------------------------
# atoms, transform and kernels


def gabor_atom(x: float, y: float, t):
    """Time-frequency shifted Gaussian e^{2 pi i y t} e^{-pi (t - x)^2}."""
    t = np.asarray(t, dtype=float)
    out = np.exp(2j * math.pi * y * t - math.pi * (t - x) ** 2)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransformValue:
    value: complex
    step_error: float
    tail_bound: float


def _sample(f, q: QuadratureSpec):
    t = q.time_nodes()
    if callable(f):
        vals = np.asarray(f(t), dtype=complex)
    else:
        vals = np.asarray(f, dtype=complex)
        if vals.shape != t.shape:
            raise ValueError(f"sampled function must have {t.size} values on the midpoint grid")
    return t, vals


def bargmann_estimate(f, z: complex, q: QuadratureSpec | None = None) -> TransformValue:
    """Bf(z) = 2^{1/4} e^{-pi z^2/2} int f(x) e^{2 pi x z - pi x^2} dx by the midpoint rule.

    ``f`` is a callable or its samples on ``q.time_nodes()``.  The step error
    compares the full sum with the sum over even-indexed nodes (twice the
    step).  The tail bound assumes |f| outside [-T, T] does not exceed its
    largest sampled modulus.
    """
    q = q or QuadratureSpec()
    z = complex(z)
    T = q.time_halfwidth
    if abs(z.real) > T / 2 or abs(z.imag) > T / 2:
        raise ValueError("|Re z| and |Im z| must not exceed T/2")
    t, vals = _sample(f, q)
    expo = 2.0 * math.pi * t * z - math.pi * t * t - 0.5 * math.pi * z * z
    terms = vals * np.exp(expo)
    full = complex(np.sum(terms) * q.time_step)
    half = complex(np.sum(terms[::2]) * 2.0 * q.time_step)
    fmax = float(np.max(np.abs(vals))) if vals.size else 0.0
    a = abs(z.real)
    tail = fmax * math.exp(-0.5 * math.pi * (z * z).real + math.pi * a * a) * erfc(math.sqrt(math.pi) * (T - a))
    scale = 2.0 ** 0.25
    return TransformValue(scale * full, scale * abs(full - half), scale * tail)


def bargmann(f, z: complex, q: QuadratureSpec | None = None) -> complex:
    """Bargmann transform at z; raises when the truncation tail exceeds q.tolerance."""
    q = q or QuadratureSpec()
    est = bargmann_estimate(f, z, q)
    if est.tail_bound > q.tolerance:
        raise NumericResourceError(
            f"Bargmann tail bound {est.tail_bound:.3g} exceeds tolerance; increase T "
            f"(currently {q.time_halfwidth})", required=q.time_halfwidth * 1.5)
    return est.value


def kernel(z: complex, w: complex, normalized: bool = False) -> LogValue:
    """k_z(w) = exp(pi conj(z) w), optionally divided by ||k_z|| = exp(pi |z|^2 / 2)."""
    z, w = complex(z), complex(w)
    expo = math.pi * z.conjugate() * w
    if normalized:
        expo -= 0.5 * math.pi * abs(z) ** 2
    return LogValue.from_log(expo, 0.0)


def normalized_kernel_values(z: complex, w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    return np.exp(math.pi * np.conj(z) * w - 0.5 * math.pi * abs(z) ** 2)


PROBE_GRID = tuple(complex(a, b) for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0))


def bargmann_shift_identity_residual(z: complex, q: QuadratureSpec | None = None,
                                     probes=PROBE_GRID) -> float:
    """max_w |2^{1/4} B(e^{-i pi x y} rho_z g)(w) - normalized k_{conj z}(w)| over probe points.

    Here z = x + i y and g is the Gaussian e^{-pi t^2}.
    """
    q = q or QuadratureSpec()
    z = complex(z)
    x, y = z.real, z.imag
    t = q.time_nodes()
    samples = np.exp(-1j * math.pi * x * y) * gabor_atom(x, y, t)
    worst = 0.0
    for w in probes:
        lhs = 2.0 ** 0.25 * bargmann(samples, w, q)
        rhs = complex(normalized_kernel_values(z.conjugate(), np.array([w]))[0])
        worst = max(worst, abs(lhs - rhs))
    return worst


# ---------------------------------------------------------------------------
# Gaussian-measure integrals on the whole plane (Gauss-Legendre x trapezoid)


def gaussian_integral(func: Callable[[np.ndarray], np.ndarray], center: complex = 0j,
                      radius: float | None = None, radial_nodes: int = 160,
                      angular_count: int | None = None) -> complex:
    """int func(w) exp(-pi |w|^2) dA(w) over the disc |w - center| <= radius.

    ``func`` must be vectorized.  The default radius center-distance + 7
    leaves a Gaussian tail below 1e-20 relative to the peak for moderate
    integrands.
    """
    c = complex(center)
    R = radius if radius is not None else abs(c) + 7.0
    if angular_count is None:
        angular_count = max(64, 2 * int(math.ceil(8.0 * math.pi * (abs(c) + R))))
    angular_count += angular_count % 2
    x, wts = np.polynomial.legendre.leggauss(radial_nodes)
    r = 0.5 * R * (x + 1.0)
    wr = 0.5 * R * wts
    th = 2.0 * math.pi * np.arange(angular_count) / angular_count
    rr, tt = np.meshgrid(r, th, indexing="ij")
    w = c + rr * np.exp(1j * tt)
    vals = np.asarray(func(w), dtype=complex) * np.exp(-math.pi * np.abs(w) ** 2)
    return complex(np.sum(vals * (rr * wr[:, None])) * (2.0 * math.pi / angular_count))


def fock_inner(F, G, center: complex = 0j, radius: float | None = None, radial_nodes: int = 160) -> complex:
    """<F, G> = int F conj(G) dmu."""
    return gaussian_integral(lambda w: F(w) * np.conj(G(w)), center, radius, radial_nodes)


def kernel_function(z: complex, normalized: bool = False):
    z = complex(z)
    shift = 0.5 * math.pi * abs(z) ** 2 if normalized else 0.0
    return lambda w: np.exp(math.pi * np.conj(z) * np.asarray(w) - shift)


# ---------------------------------------------------------------------------
# membership integrals


def _axis_window(r: float, count: int) -> np.ndarray:
    """Indices of angular nodes where pi (r^2 - |Im z^2|) <= ENVELOPE_CUTOFF."""
    c = ENVELOPE_CUTOFF / (math.pi * r * r)
    j = np.arange(count)
    if c >= 1.0:
        return j
    w = 0.5 * math.acos(1.0 - c)
    step = 2.0 * math.pi / count
    out = []
    for k in range(4):
        centre = math.pi / 4 + k * math.pi / 2
        lo = int(math.ceil((centre - w) / step - 0.5))
        hi = int(math.floor((centre + w) / step - 0.5))
        out.append(np.arange(lo, hi + 1) % count)
    return np.unique(np.concatenate(out))


def _log_weight(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    a = np.abs(z)
    out = -np.log1p(a ** (2.0 * beta)) if beta != 0 else np.full(z.shape, -math.log(2.0))
    if alpha != 0:
        z2 = z * z
        out = out + alpha * (np.log1p(np.abs(z2)) - np.log1p(np.abs(z2.imag)))
    return out


def _call_log(F_log, z: np.ndarray) -> np.ndarray:
    out = F_log(z)
    if isinstance(out, LogValue):
        out = [out] + [F_log(complex(zi)) for zi in z[1:]]
    if isinstance(out, (list, tuple)) and out and isinstance(out[0], LogValue):
        return np.array([v.log_mod for v in out], dtype=float)
    return np.asarray(out, dtype=float)


def weighted_membership_integral(F_log, alpha: float, beta: float, radii, *, cell: float = 0.25,
                                 arc_density: float = 8.0, envelope: str | None = None,
                                 extra_log_weight=None, chunk: int = 400_000) -> MembershipCurve:
    """Cumulative I(R) = int_{|z|<=R} |F|^2 W e^{-pi|z|^2} dA on a polar midpoint grid.

    W(z) = ((1+|z^2|)/(1+|Im z^2|))^alpha / (1 + |z|^{2 beta}); with beta = 0
    the weight is the constant 1/2 as the formula gives.  ``F_log`` maps an
    array of points to log|F| (``-inf`` at zeros); a scalar callable that
    returns :class:`LogValue` is also accepted.  ``envelope="axis"`` skips
    nodes where pi(|z|^2 - |Im z^2|) > 100, valid for functions bounded by a
    polynomial times e^{pi |Im z^2| / 2} such as the axis-family products.
    ``extra_log_weight`` adds a further log-weight (vectorized callable).
    """
    radii = [float(r) for r in radii]
    if not radii or any(b <= a for a, b in zip(radii[:-1], radii[1:])) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    if cell <= 0:
        raise ValueError("cell must be positive")
    warnings = []
    if cell > 1.0:
        warnings.append(f"radial cell {cell} in r^2 is coarser than the ring spacing")
    if arc_density < 4.0:
        warnings.append(f"angular density {arc_density} per unit arc is coarse")
    s_max = radii[-1] ** 2
    n_cells = int(math.ceil(s_max / cell - 1e-9))
    bounds = [r * r / cell for r in radii]
    if any(abs(b - round(b)) > 1e-9 for b in bounds):
        warnings.append("some radii^2 are not multiples of the radial cell; they are rounded up")
    s_mid = (np.arange(n_cells) + 0.5) * cell
    cell_logs = np.full(n_cells, -np.inf)
    # build nodes ring by ring, evaluate in chunks
    buf_z, buf_cell, buf_lw = [], [], []
    total_nodes = 0

    def flush():
        nonlocal buf_z, buf_cell, buf_lw
        if not buf_z:
            return
        z = np.concatenate(buf_z)
        owner = np.concatenate(buf_cell)
        lw = np.concatenate(buf_lw)
        lf = _call_log(F_log, z)
        lg = 2.0 * lf - math.pi * np.abs(z) ** 2 + _log_weight(z, alpha, beta) + lw
        if extra_log_weight is not None:
            lg = lg + np.asarray(extra_log_weight(z), dtype=float)
        order = np.argsort(owner, kind="stable")
        owner, lg = owner[order], lg[order]
        cuts = np.flatnonzero(np.diff(owner)) + 1
        starts = np.concatenate([[0], cuts])
        for st, part in zip(starts, np.split(lg, cuts)):
            k = owner[st]
            cell_logs[k] = np.logaddexp(cell_logs[k], logsumexp(part))
        buf_z, buf_cell, buf_lw = [], [], []

    pending = 0
    for k in range(n_cells):
        r = math.sqrt(s_mid[k])
        count = max(64, int(math.ceil(arc_density * 2.0 * math.pi * r / 4.0)) * 4)
        idx = _axis_window(r, count) if envelope == "axis" else np.arange(count)
        if idx.size == 0:
            continue
        th = (idx + 0.5) * (2.0 * math.pi / count)
        buf_z.append(r * np.exp(1j * th))
        buf_cell.append(np.full(idx.size, k))
        # area element: dA = (1/2) ds dtheta
        buf_lw.append(np.full(idx.size, math.log(0.5 * cell * 2.0 * math.pi / count)))
        pending += idx.size
        total_nodes += idx.size
        if pending >= chunk:
            flush()
            pending = 0
    flush()
    cum = np.logaddexp.accumulate(cell_logs) if n_cells else np.array([])
    logs = []
    for b in bounds:
        m = int(math.ceil(b - 1e-9))
        logs.append(float(cum[m - 1]) if m >= 1 else -math.inf)
    vals = [math.exp(v) if v < 700 else math.inf for v in logs]
    return MembershipCurve(radii, vals, (alpha, beta), logs, warnings, total_nodes)


# ---------------------------------------------------------------------------
# log|G| on grids for product forms


def log_abs_function(form: ProductForm, rel_tol: float = 1e-8) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized z -> log|G(z)| for a product form, using the fastest exact route."""
    p = form.perturbation
    if form.kind is FormKind.ALS and p.kind in (PerturbationKind.NONE, PerturbationKind.ALS_BETA,
                                                PerturbationKind.TABULATED):
        return lambda z: als_log_abs_fast(p, z)
    if form.kind is FormKind.RADIAL and p.is_identity:
        return lambda z: np.log(2.0) + als_log_abs_fast(p, z)
    if form.family.family is Family.LATTICE:
        return lambda z: lattice_log_abs_fast(form, z)

    def f(z):
        return eval_log_product_many(form, z, rel_tol)[0]
    return f


def _envelope_for(form: ProductForm):
    return "axis" if form.family.family is Family.ALS and form.kind is not FormKind.PHI else None


def minimality_probe(form: ProductForm, removed: complex, radii, **kw) -> MembershipCurve:
    """Membership curve of |G(z)/(z - lambda)|^2 e^{-pi|z|^2}.

    Flattening is consistent with G/(. - lambda) lying in the Fock space, so
    the sequence with lambda removed is a zero set.
    """
    lam = complex(removed)
    zs = zero_set(form, abs(lam) + 2.0)
    if zs.distances(np.array([lam]))[0] > 1e-9 * max(1.0, abs(lam)):
        raise ValueError(f"{lam} is not a zero of the product")
    base = log_abs_function(form)

    def f(z):
        with np.errstate(divide="ignore"):
            return base(z) - np.log(np.abs(z - lam))
    kw.setdefault("envelope", _envelope_for(form))
    curve = weighted_membership_integral(f, 0.0, 0.0, radii, **kw)
    return _unweighted(curve)


def completeness_probe(form: ProductForm, radii, degree: int = 0, **kw) -> MembershipCurve:
    """Membership curve of |G(z) z^degree|^2 e^{-pi|z|^2}.

    Flattening means a nonzero Fock function vanishes on the sequence, which
    is the not-complete side.
    """
    if degree not in (0, 1):
        raise ValueError("degree must be 0 or 1")
    base = log_abs_function(form)

    def f(z):
        with np.errstate(divide="ignore"):
            return base(z) + degree * np.log(np.abs(z))
    kw.setdefault("envelope", _envelope_for(form))
    return _unweighted(weighted_membership_integral(f, 0.0, 0.0, radii, **kw))


def _unweighted(curve: MembershipCurve) -> MembershipCurve:
    # the beta = 0 weight is the constant 1/2; undo it for plain Fock norms
    logs = [v + math.log(2.0) for v in curve.log_values]
    vals = [math.exp(v) if v < 700 else math.inf for v in logs]
    return MembershipCurve(curve.radii, vals, ("fock", 0.0), logs, curve.warnings, curve.nodes)


def fock_norm_curve(F_log, radii, **kw) -> MembershipCurve:
    """Truncated Fock norms int_{|z|<=R} |F|^2 dmu."""
    return _unweighted(weighted_membership_integral(F_log, 0.0, 0.0, radii, **kw))


def dist_ratio_norm_curves(form: ProductForm, radii, **kw):
    """Truncated Fock norms of G with and without the weight dist(z, Gamma)^2/dist(z, Lambda)^2."""
    window = max(radii) + 3.0
    zl = zero_set(form, window)
    zg = zero_set(ProductForm(form.kind, form.family), window)
    base = log_abs_function(form)

    def ratio(z):
        with np.errstate(divide="ignore"):
            return 2.0 * (np.log(zg.distances(z)) - np.log(zl.distances(z)))
    kw.setdefault("envelope", _envelope_for(form))
    plain = fock_norm_curve(base, radii, **kw)
    weighted = _unweighted(weighted_membership_integral(base, 0.0, 0.0, radii, extra_log_weight=ratio, **kw))
    return weighted, plain


# ---------------------------------------------------------------------------
# Gram matrices of normalized kernels


@dataclass(frozen=True)
class GramSummary:
    size: int
    smallest_eigenvalue: float
    largest_eigenvalue: float
    condition_number: float

    def to_dict(self) -> dict:
        return {"size": self.size, "smallest_eigenvalue": self.smallest_eigenvalue,
                "largest_eigenvalue": self.largest_eigenvalue, "condition_number": self.condition_number,
                "note": "finite-section heuristic"}


def gram_matrix(points) -> np.ndarray:
    """<k_i, k_j> for normalized kernels: exp(pi conj(l_i) l_j - pi(|l_i|^2 + |l_j|^2)/2).

    Entry (i, j) is the inner product of the normalized kernels at l_j and l_i
    in the convention <f, g> = int f conj(g) dmu, i.e. k_{l_j}(l_i) normalized.
    """
    lam = np.asarray(points, dtype=complex).ravel()
    a = np.abs(lam) ** 2
    expo = math.pi * (lam[:, None] * np.conj(lam)[None, :]) - 0.5 * math.pi * (a[:, None] + a[None, :])
    return np.exp(expo)


def gram_diagnostics(seq, R_cut: float) -> GramSummary:
    """Smallest eigenvalue and condition number of the kernel Gram matrix inside R_cut.

    A finite-section trend indicator only.
    """
    pts = seq.points if isinstance(seq, PointSequence) else np.asarray(seq, dtype=complex)
    pts = pts[np.abs(pts) <= R_cut]
    if pts.size == 0:
        raise ValueError("no points inside R_cut")
    if pts.size > MAX_GRAM_POINTS:
        raise ValueError(f"{pts.size} points inside R_cut exceed the limit {MAX_GRAM_POINTS}")
    G = gram_matrix(pts)
    asym = float(np.max(np.abs(G - G.conj().T)))
    if asym > 1e-12:
        raise RuntimeError(f"Gram matrix not Hermitian (deviation {asym:.3g})")
    ev = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    lo, hi = float(ev[0]), float(ev[-1])
    cond = hi / lo if lo > 0 else math.inf
    return GramSummary(int(pts.size), lo, hi, cond)
