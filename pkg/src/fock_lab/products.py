"""Log-domain evaluation of the generating entire functions of point sequences.

Values are returned as :class:`LogValue` (log-modulus, phase, tail bound).

Lattice products use the genus-2 factors (1 - z/lambda) exp(z/gamma + z^2/(2 gamma^2))
with a separate leading factor (z - lambda_{0,0}).  The convergence factor of
index (m, n) always uses the integer point gamma = m + i n, also on the
positive half of row 0 where the zero itself sits at m + nu.  Building the
factor on m + nu instead would multiply the product by exp(b z^2) with
b = (psi'(1 + nu) - psi'(1))/2 and destroy the Gaussian growth.  Each lattice row is summed in closed form with log-gamma
functions, so the only truncation is in the number of rows (exponentially
small) and, for perturbations of unbounded support, in the perturbation
correction.

Axis-sequence products sum the factors ring by ring up to a cutoff N and add
the remaining tail as an explicit Hurwitz-zeta series.

Normalization of the axis-sequence product: the literal product
(z^2 - 1) prod (1 + z^2/2n)(1 + z/sqrt(2n))(1 - z/sqrt(2n)) equals twice the
closed form (z^2 - 1)/(pi z^2) sin(pi z^2 / 2), because
prod (1 - x^2/n^2) = sin(pi x)/(pi x).  ``ALS_NORMALIZATION = 1/2`` is applied to
the product so that the unperturbed product coincides with the closed form.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from . import _series as S
from .errors import NumericResourceError, WindowError
from .sequences import (Family, FamilySpec, PerturbationKind, PerturbationSpec, PointSequence,
                        _columns_from_indices, _coverage, _window_columns, dist, make_sequence,
                        reference_points)

logger = logging.getLogger(__name__)

ALS_NORMALIZATION = 0.5
DEFAULT_REL_TOL = 1e-10
MAX_POINTS = 100_000
ZERO_TOL = 1e-12
_H = math.sqrt(2.0) / 2.0  # half-diagonal of a unit lattice cell


@dataclass(frozen=True)
class LogValue:
    """A complex value stored as log-modulus and phase, plus a truncation bound."""

    log_mod: float
    phase: float
    tail_bound: float = 0.0
    is_zero: bool = False
    is_pole: bool = False
    radius: float = math.nan

    def __post_init__(self):
        if self.is_zero:
            object.__setattr__(self, "log_mod", -math.inf)
        if self.is_pole:
            object.__setattr__(self, "log_mod", math.inf)
        if math.isfinite(self.phase):
            object.__setattr__(self, "phase", S.wrap_phase(self.phase))

    @classmethod
    def from_log(cls, w: complex, tail_bound: float = 0.0, radius: float = math.nan) -> "LogValue":
        return cls(float(w.real), float(w.imag), float(tail_bound), radius=radius)

    @property
    def value(self) -> complex:
        if self.is_zero:
            return 0j
        return complex(math.exp(self.log_mod) * complex(math.cos(self.phase), math.sin(self.phase)))


class FormKind(str, enum.Enum):
    STRIP = "strip_genus2"
    PLANE = "full_plane_genus2"
    ALS = "als"
    RADIAL = "radial_limit"
    PHI = "phi"


@dataclass(frozen=True)
class ProductForm:
    """Which product to evaluate: kind, base family and perturbation."""

    kind: FormKind
    family: FamilySpec
    perturbation: PerturbationSpec = PerturbationSpec()
    s: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FormKind(self.kind))
        kind, fam, p = self.kind, self.family, self.perturbation
        if kind is FormKind.PHI:
            if self.s is None or not (0.5 < self.s < 1.0):
                raise ValueError("the phi product needs s in (1/2, 1)")
            return
        p.check_family(fam)
        if kind in (FormKind.STRIP, FormKind.PLANE):
            if fam.family is not Family.LATTICE:
                raise ValueError("genus-2 lattice forms need the lattice family")
            return
        if fam.family is not Family.ALS:
            raise ValueError(f"{kind.value} form needs the axis family")
        if p.kind is PerturbationKind.ANGULAR_POWER and not p.s > 0.5:
            raise ValueError("angular perturbation of the axis family needs s > 1/2")
        if kind is FormKind.ALS:
            if p.kind is PerturbationKind.ANGULAR_POWER and p.symmetric:
                raise ValueError("the axis form only perturbs the positive real branch")
            if p.kind is PerturbationKind.TABULATED:
                for (axis, sign, n), (d, t) in p.table_map(fam).items():
                    if (d != 0.0 or t != 0.0) and not (axis == "re" and sign == 1 and n >= 1):
                        raise ValueError("the axis form only perturbs the positive real branch")

    # constructors -----------------------------------------------------
    @classmethod
    def strip(cls, nu: float, beta: float = 0.0, strip_height: int = 1) -> "ProductForm":
        p = PerturbationSpec.strip_beta(beta, strip_height) if beta != 0 else PerturbationSpec.none()
        return cls(FormKind.STRIP, FamilySpec.lattice(nu, strip_height), p)

    @classmethod
    def plane(cls, nu: float, beta: float = 0.0) -> "ProductForm":
        p = PerturbationSpec.full_beta(beta) if beta != 0 else PerturbationSpec.none()
        return cls(FormKind.PLANE, FamilySpec.lattice(nu), p)

    @classmethod
    def als(cls, perturbation: PerturbationSpec | None = None) -> "ProductForm":
        return cls(FormKind.ALS, FamilySpec.als(), perturbation or PerturbationSpec.none())

    @classmethod
    def radial(cls, perturbation: PerturbationSpec | None = None) -> "ProductForm":
        return cls(FormKind.RADIAL, FamilySpec.als(), perturbation or PerturbationSpec.none())

    @classmethod
    def phi(cls, s: float) -> "ProductForm":
        return cls(FormKind.PHI, FamilySpec.als(), PerturbationSpec.none(), float(s))

    @classmethod
    def from_sequence(cls, kind: FormKind | str, seq: PointSequence) -> "ProductForm":
        return cls(FormKind(kind), seq.family, seq.perturbation)

    # sequences --------------------------------------------------------
    def sequence(self, window: float) -> PointSequence:
        """The (perturbed) zero sequence of the product on a window."""
        if self.kind is FormKind.PHI:
            raise ValueError("the phi product has no sequence object")
        return make_sequence(self.family, self.perturbation, window)

    def reference(self, window: float) -> PointSequence:
        """The unperturbed base sequence on a window."""
        return make_sequence(self.family, None, window)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "family": self.family.to_dict(),
               "perturbation": perturbation_to_dict(self.perturbation)}
        if self.s is not None:
            out["s"] = self.s
        return out


def perturbation_to_dict(p: PerturbationSpec) -> dict:
    out = {"kind": p.kind.value}
    if p.kind in (PerturbationKind.STRIP_BETA, PerturbationKind.FULL_BETA, PerturbationKind.ALS_BETA):
        out["beta"] = p.beta
    if p.kind is PerturbationKind.STRIP_BETA:
        out["strip_height"] = p.strip_height
    if p.kind is PerturbationKind.ANGULAR_POWER:
        out.update(s=p.s, start=p.start, symmetric=p.symmetric)
    if p.kind is PerturbationKind.TABULATED:
        out["table"] = [[list(i), d, t] for i, d, t in p.table]
    return out


def perturbation_from_dict(data: dict) -> PerturbationSpec:
    kind = PerturbationKind(data.get("kind", "none"))
    if kind is PerturbationKind.NONE:
        return PerturbationSpec.none()
    if kind is PerturbationKind.STRIP_BETA:
        return PerturbationSpec.strip_beta(data["beta"], data["strip_height"])
    if kind is PerturbationKind.FULL_BETA:
        return PerturbationSpec.full_beta(data["beta"])
    if kind is PerturbationKind.ALS_BETA:
        return PerturbationSpec.als_beta(data["beta"])
    if kind is PerturbationKind.ANGULAR_POWER:
        return PerturbationSpec.angular_power(data["s"], data.get("start", 2), data.get("symmetric", False))
    return PerturbationSpec.tabulated([(tuple(i), d, t) for i, d, t in data["table"]])


# ---------------------------------------------------------------------------
# zero detection


def _axis_split(points: np.ndarray):
    """Split points lying on the coordinate axes into sorted real and imaginary coordinates, or None."""
    on_re = points.imag == 0.0
    on_im = points.real == 0.0
    if not np.all(on_re | on_im):
        return None
    return (np.sort(points.real[on_re]), np.sort(points.imag[on_im & ~on_re]))


def _line_dist(coord: np.ndarray, offset: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Distance from (coord, offset) to the nearest point (line[k], 0)."""
    if line.size == 0:
        return np.full(coord.shape, np.inf)
    k = np.searchsorted(line, coord)
    lo = line[np.clip(k - 1, 0, line.size - 1)]
    hi = line[np.clip(k, 0, line.size - 1)]
    d = np.minimum(np.abs(coord - lo), np.abs(coord - hi))
    return np.hypot(d, offset)


@dataclass(frozen=True)
class ZeroSet:
    """Distinct zeros of a product inside a window (coincident zeros merged)."""

    points: np.ndarray
    coverage: float
    tree: cKDTree
    axes: tuple | None = None

    def distances(self, z, guard: float = 1.0) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if guard < 1.0:
            raise ValueError("guard must be >= 1")
        need = float(np.max(np.abs(z))) + guard
        if need > self.coverage:
            raise WindowError(f"zero set covers radius {self.coverage:.6g}, need {need:.6g}")
        return self.raw_distances(z)

    def raw_distances(self, z: np.ndarray) -> np.ndarray:
        if self.axes is not None:
            re, im = self.axes
            return np.minimum(_line_dist(z.real, z.imag, re), _line_dist(z.imag, z.real, im))
        d, _ = self.tree.query(np.column_stack([z.real, z.imag]), k=1)
        return d

    def near(self, z: np.ndarray, tol) -> np.ndarray:
        """Mask of points within tol of a zero."""
        tol = np.broadcast_to(np.asarray(tol, dtype=float), z.shape)
        if self.axes is not None:
            return self.raw_distances(z) <= tol
        d, _ = self.tree.query(np.column_stack([z.real, z.imag]), k=1,
                               distance_upper_bound=float(np.max(tol)) * 1.0001 if tol.size else 0.0)
        return d <= tol


@lru_cache(maxsize=64)
def _zero_set_cached(family: FamilySpec, perturbation: PerturbationSpec, window: int) -> ZeroSet:
    cols = _window_columns(family, float(window))
    lam = perturbation.moved_points(family, cols)
    lam = np.unique(lam)
    cov = _coverage(perturbation, family, float(window))
    return ZeroSet(lam, cov, cKDTree(np.column_stack([lam.real, lam.imag])), _axis_split(lam))


def zero_set(form: ProductForm, window: float) -> ZeroSet:
    """Zeros of the product with modulus <= window (rounded up to an integer).

    Unlike :class:`PointSequence` this tolerates coincident points, which occur
    for instance when the beta shift moves sqrt(2n + 4 beta) onto the fixed
    point 1 (beta = -1/4).
    """
    if form.kind is FormKind.PHI:
        raise ValueError("the phi product has no zero set object")
    return _zero_set_cached(form.family, form.perturbation, int(math.ceil(window)))


def _near_zero(form: ProductForm, z: np.ndarray, tol, reference: bool = False) -> np.ndarray:
    """Mask of z within tol of a zero (or of a reference point)."""
    p = PerturbationSpec.none() if reference else form.perturbation
    extra = abs(p.beta) + 3.0
    window = int(math.ceil(float(np.max(np.abs(z))) + extra)) + 1
    return _zero_set_cached(form.family, p, window).near(z, tol)


def _zero_tol(z):
    return ZERO_TOL * np.maximum(1.0, np.abs(z))


# ---------------------------------------------------------------------------
# lattice products


def _lattice_rows(z: np.ndarray, nu: float, shift_rows: int, shift: float):
    """log G for the lattice (with strip shift on rows 1..shift_rows), and bounds."""
    n_cut = int(math.ceil(float(np.max(np.abs(z.imag))))) + 8
    n_cut = max(n_cut, shift_rows)
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.log(z - nu)
        total, mag = S.lattice_row0_log(z, nu)
        total = total + lead
        mag = mag + np.abs(lead)
        for n in range(1, n_cut + 1):
            b = shift if n <= shift_rows else 0.0
            val, m = S.lattice_row_log(z, n, b)
            total = total + val
            mag = mag + m
            val, m = S.lattice_row_log(z, -n, 0.0)
            total = total + val
            mag = mag + m
    bound = S.lattice_row_tail_bound(z, n_cut)
    return total, bound, mag, n_cut


def _lattice_eval(form: ProductForm, z: np.ndarray, rel_tol: float):
    fam, p = form.family, form.perturbation
    nu = fam.nu
    if p.kind is PerturbationKind.STRIP_BETA:
        total, bound, mag, radius = _lattice_rows(z, nu, p.strip_height, p.beta / p.strip_height)
    else:
        total, bound, mag, radius = _lattice_rows(z, nu, 0, 0.0)
    if p.kind in (PerturbationKind.NONE, PerturbationKind.STRIP_BETA):
        return total, bound, mag, float(radius)
    if p.kind is PerturbationKind.TABULATED:
        corr, cmag = _tabulated_correction(form, z)
        return total + corr, bound, mag + cmag, float(radius)
    if p.kind is PerturbationKind.ANGULAR_POWER:
        out = np.empty_like(total)
        extra_b = np.empty(z.shape)
        extra_m = np.empty(z.shape)
        for i, zi in enumerate(z):
            c, b, m = _row1_rotation(complex(zi), p, rel_tol)
            out[i], extra_b[i], extra_m[i] = c, b, m
        return total + out, bound + extra_b, mag + extra_m, float(radius)
    # full-plane radial shift
    out = np.empty_like(total)
    extra_b = np.empty(z.shape)
    extra_m = np.empty(z.shape)
    rt = 0.0
    for i, zi in enumerate(z):
        c, b, m, rt_i = _full_beta_correction(complex(zi), nu, p.beta, rel_tol)
        out[i], extra_b[i], extra_m[i] = c, b, m
        rt = max(rt, rt_i)
    return total + out, bound + extra_b, mag + extra_m, rt


def _tabulated_correction(form: ProductForm, z: np.ndarray):
    fam, p = form.family, form.perturbation
    table = p.table_map(fam)
    corr = np.zeros(z.shape, dtype=complex)
    mag = np.zeros(z.shape)
    moved = [k for k, (d, t) in table.items() if d != 0.0 or t != 0.0]
    if not moved:
        return corr, mag
    cols = _columns_from_indices(fam, moved)
    gam = reference_points(fam, cols)
    lam = p.moved_points(fam, cols, gam)
    with np.errstate(divide="ignore", invalid="ignore"):
        for key, g, lm in zip(moved, gam, lam):
            if fam.family is Family.LATTICE and key == (0, 0):
                a, b = np.log(z - lm), np.log(z - g)
            else:
                a, b = np.log1p(-z / lm), np.log1p(-z / g)
            corr += a - b
            mag += np.abs(a) + np.abs(b)
    return corr, mag


def _row1_rotation(z: complex, p: PerturbationSpec, rel_tol: float):
    """Correction for the rotated row n = 1 (m >= start): direct part plus tail."""
    s = p.s
    M = max(p.start, int(math.ceil(4.0 * abs(z))) + 8, int(math.ceil((math.pi / math.log(2)) ** (1.0 / s))) + 1)
    if M > MAX_POINTS:
        raise NumericResourceError(f"row rotation needs {M} terms", required=M)
    m = np.arange(p.start, M + 1, dtype=float)
    gam = m + 1j
    lam = gam * np.exp(1j * math.pi / m ** s)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.log1p(-z / lam)
        b = np.log1p(-z / gam)
    direct = complex(np.sum(a - b))
    mag = float(np.sum(np.abs(a) + np.abs(b)))
    tail, tb = S.row1_rotation_tail(z, M, s, tol=rel_tol * 1e-3)
    return direct + tail, tb, mag


def _cell_sum(R: float, power: int) -> float:
    """Upper bound for sum over nonzero lattice points |gamma| > R of |gamma|^-power."""
    a = R - 2.0 * _H
    if a <= 0:
        return math.inf
    # 2 pi * integral_a^inf (u + h) u^-power du
    return 2.0 * math.pi * (a ** (2 - power) / (power - 2) + _H * a ** (1 - power) / (power - 1))


def _full_beta_2d_bound(z: complex, beta: float, R: float) -> float:
    if R < 4.0 * abs(z):
        return math.inf
    e = math.exp(4.0 * abs(beta) / R ** 2)
    c = e / (1.0 - e / 256.0)
    return c * abs(beta) * abs(z) ** 4 * _cell_sum(R, 6)


@lru_cache(maxsize=32)
def _lattice_disc(nu: float, R: float):
    k = int(math.floor(R)) + 1
    m, n = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    cols = {"m": m, "n": n}
    fam = FamilySpec.lattice(nu)
    gam = reference_points(fam, cols)
    keep = (np.abs(gam) <= R) & ~((m == 0) & (n == 0))
    return gam[keep]


def _full_beta_correction(z: complex, nu: float, beta: float, rel_tol: float):
    """log(G_perturbed / G_reference) for the radial 1/|gamma|^2 shift of the whole lattice."""
    R = max(4.0 * abs(z), 8.0)
    while _full_beta_2d_bound(z, beta, R) > rel_tol:
        R *= 1.25
        if math.pi * R * R > MAX_POINTS:
            need = R
            while _full_beta_2d_bound(z, beta, need) > rel_tol:
                need *= 1.25
            raise NumericResourceError(
                f"full-plane shift at |z|={abs(z):.4g} needs truncation radius R_t ~ {need:.4g} "
                f"(cap {MAX_POINTS} points); relax rel_tol", required=need)
    R = float(math.ceil(R))
    gam = _lattice_disc(nu, R)
    lam = gam * np.exp(beta / np.abs(gam) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.log1p(-z / lam)
        b = np.log1p(-z / gam)
        lead_l = nu * math.exp(beta / nu ** 2)
        lead = complex(np.log(z - lead_l) - np.log(z - nu))
    corr = complex(np.sum(a - b)) + lead
    mag = float(np.sum(np.abs(a) + np.abs(b))) + abs(lead)
    # 1d row-0 differences between the shifted lattice and Z^2 beyond R
    m1 = int(math.floor(R - nu)) + 1
    m2 = int(math.floor(R)) + 1
    t1, b1 = S.radial_tail_1d(z, m1 + nu, beta, tol=rel_tol * 1e-3)
    t2, b2 = S.radial_tail_1d(z, float(m2), beta, tol=rel_tol * 1e-3)
    corr += t1 - t2
    bound = b1 + b2 + _full_beta_2d_bound(z, beta, R)
    return corr, bound, mag, R


# ---------------------------------------------------------------------------
# axis-sequence products


def _als_cutoff(form: ProductForm, z: complex) -> int:
    p = form.perturbation
    N = max(16, int(math.ceil(4.0 * abs(z) ** 2)))
    if p.kind is PerturbationKind.ALS_BETA:
        N = max(N, int(math.ceil(8.0 * abs(p.beta))) + 2)
    if p.kind is PerturbationKind.ANGULAR_POWER:
        N = max(N, int(math.ceil((math.pi / math.log(2)) ** (1.0 / p.s))) + 1, p.start)
    if p.kind is PerturbationKind.TABULATED:
        sup = p.support_radius(form.family)
        N = max(N, int(math.ceil(sup * sup / 2.0)) + 1)
    return N


def _als_branch_columns(N: int):
    ns = np.arange(1, N + 1)
    for ax in (0, 1):
        for sg in (1, -1):
            yield {"axis": np.full(N, ax), "sign": np.full(N, sg), "n": ns}


def _als_eval_scalar(form: ProductForm, z: complex, rel_tol: float):
    fam, p = form.family, form.perturbation
    N = _als_cutoff(form, z)
    if 4 * N > MAX_POINTS:
        raise NumericResourceError(
            f"axis product at |z|={abs(z):.4g} needs {4 * N} points (truncation radius "
            f"R_t = {math.sqrt(2 * N):.4g}); cap is {MAX_POINTS}", required=math.sqrt(2 * N))
    total = 0j
    mag = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for cols in _als_branch_columns(N):
            lam = p.moved_points(fam, cols)
            terms = np.log1p(-z / lam)
            total += complex(np.sum(terms))
            mag += float(np.sum(np.abs(terms)))
        if form.kind is FormKind.ALS:
            lead = complex(np.log(ALS_NORMALIZATION) + np.log(complex(z * z - 1.0)))
        else:
            cols = {"axis": np.zeros(2, dtype=int), "sign": np.array([1, -1]), "n": np.zeros(2, dtype=int)}
            lam = p.moved_points(fam, cols)
            lead = complex(np.sum(np.log1p(-z / lam)))
    total += lead
    mag += abs(lead)
    tol = rel_tol * 1e-3
    tail, bound = S.als_even_tail(z, N, tol)
    if p.kind is PerturbationKind.ALS_BETA:
        t, b = S.als_beta_tail(z, N, p.beta, tol)
        tail, bound = tail + t, bound + b
    elif p.kind is PerturbationKind.ANGULAR_POWER:
        t, b = S.als_rotation_tail(z, N, p.s, p.symmetric, tol)
        tail, bound = tail + t, bound + b
    total += tail
    mag += abs(tail)
    return total, bound, mag, math.sqrt(2.0 * N)


# ---------------------------------------------------------------------------
# the ratio product with rotated zeros


def phi_cutoff(z: complex, s: float) -> int:
    return max(50, int(math.ceil(4.0 * abs(z))) + 4, int(math.ceil((math.pi / math.log(2)) ** (1.0 / s))) + 1)


def _phi_eval_scalar(z: complex, s: float, rel_tol: float):
    N = phi_cutoff(z, s)
    if N > MAX_POINTS:
        raise NumericResourceError(f"phi product needs {N} factors", required=N)
    n = np.arange(1, N + 1, dtype=float)
    zeros = n * np.exp(1j * math.pi / n ** s)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.log1p(-z / zeros)
        b = np.log1p(-z / n)
    total = complex(np.sum(a - b))
    mag = float(np.sum(np.abs(a) + np.abs(b)))
    tail, bound = S.phi_tail(z, N, s, tol=rel_tol * 1e-3)
    return total + tail, bound, mag + abs(tail), float(N)


def phi_optimality(z: complex, s: float, rel_tol: float = DEFAULT_REL_TOL) -> LogValue:
    """log of prod_{n>=1} (1 - z/(n e^{i pi/n^s})) / (1 - z/n).

    The zeros sit at the rotated points n e^{i theta_n}; the poles at the
    positive integers are flagged with ``is_pole``.
    """
    if not (0.5 < s < 1.0):
        raise ValueError("s must lie in (1/2, 1)")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    z = complex(z)
    k = round(z.real)
    if k >= 1 and abs(z - k) <= ZERO_TOL * max(1.0, abs(z)):
        return LogValue(math.inf, 0.0, 0.0, is_pole=True)
    if abs(z) >= 0.5:
        k = max(1, round(abs(z)))
        for n in range(max(1, k - 2), k + 3):
            if abs(z - n * np.exp(1j * math.pi / n ** s)) <= ZERO_TOL * max(1.0, abs(z)):
                return LogValue(-math.inf, 0.0, 0.0, is_zero=True)
    total, bound, mag, radius = _phi_eval_scalar(z, s, rel_tol)
    bound += 16.0 * S.EPS * mag
    return LogValue.from_log(total, bound, radius)


# ---------------------------------------------------------------------------
# public evaluation API


def eval_log_product_many(form: ProductForm, z, rel_tol: float = DEFAULT_REL_TOL):
    """Vectorized evaluation.  Returns (log_mod, phase, tail_bound, is_zero) arrays.

    ``tail_bound`` is the truncation bound plus a floating-point rounding
    allowance proportional to the summed magnitudes of all logged terms.
    """
    lm, ph, trunc, rnd, zero = _eval_many(form, z, rel_tol)
    return lm, ph, trunc + rnd, zero


def _eval_many(form: ProductForm, z, rel_tol: float):
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if form.kind is FormKind.PHI:
        vals = [phi_optimality(complex(zi), form.s, rel_tol) for zi in z]
        return (np.array([v.log_mod for v in vals]), np.array([v.phase for v in vals]),
                np.array([v.tail_bound for v in vals]), np.zeros(z.shape), np.array([v.is_zero for v in vals]))
    zero = _near_zero(form, z, _zero_tol(z))
    zz = np.where(zero, z + 0.5 + 0.25j, z)  # placeholder values, overwritten below
    removable = np.zeros(z.shape, dtype=bool)
    if form.perturbation.kind in (PerturbationKind.TABULATED, PerturbationKind.FULL_BETA) and not np.all(zero):
        removable = _near_zero(form, z, 1e-9 * np.maximum(1.0, np.abs(z)), reference=True) & ~zero
    if form.family.family is Family.LATTICE:
        total, bound, mag, _ = _lattice_eval(form, zz, rel_tol)
        if np.any(removable):
            h = 1e-6 * np.maximum(1.0, np.abs(z[removable])) * np.exp(0.7j)
            f1, b1, m1, _ = _lattice_eval(form, z[removable] + h, rel_tol)
            f2, b2, m2, _ = _lattice_eval(form, z[removable] + 2 * h, rel_tol)
            total[removable] = 2 * f1 - f2
            bound[removable] = b1 + b2 + np.abs(f1 - f2)
            mag[removable] = m1 + m2
    else:
        total = np.empty(z.shape, dtype=complex)
        bound = np.empty(z.shape)
        mag = np.empty(z.shape)
        for i, zi in enumerate(zz):
            zi = complex(zi)
            if removable[i]:
                h = 1e-6 * max(1.0, abs(zi)) * complex(math.cos(0.7), math.sin(0.7))
                f1, b1, m1, _ = _als_eval_scalar(form, zi + h, rel_tol)
                f2, b2, m2, _ = _als_eval_scalar(form, zi + 2 * h, rel_tol)
                total[i], bound[i], mag[i] = 2 * f1 - f2, b1 + b2 + abs(f1 - f2), m1 + m2
            else:
                total[i], bound[i], mag[i], _ = _als_eval_scalar(form, zi, rel_tol)
    rounding = np.where(zero, 0.0, 16.0 * S.EPS * mag)
    log_mod = np.where(zero, -np.inf, total.real)
    phase = np.where(zero, 0.0, S.wrap_phase(total.imag))
    bound = np.where(zero, 0.0, bound)
    return log_mod, phase, bound, rounding, zero


def eval_log_product(form: ProductForm, z: complex, rel_tol: float = DEFAULT_REL_TOL) -> LogValue:
    """Evaluate the product at z in log-domain with a certified truncation bound."""
    if form.kind is FormKind.PHI:
        return phi_optimality(z, form.s, rel_tol)
    z = complex(z)
    if form.family.family is Family.ALS:
        radius = math.sqrt(2.0 * _als_cutoff(form, z))
    else:
        radius = math.ceil(abs(z.imag)) + 8.0
    lm, ph, tb, rnd, zero = _eval_many(form, np.array([z]), rel_tol)
    if tb[0] > rel_tol and not zero[0]:
        raise NumericResourceError(
            f"truncation bound {tb[0]:.3g} exceeds rel_tol {rel_tol:.3g}", required=radius)
    return LogValue(float(lm[0]), float(ph[0]), float(tb[0] + rnd[0]), is_zero=bool(zero[0]),
                    radius=float(radius))


def log_G_gamma_closed(z) -> np.ndarray:
    """Complex log (mod 2 pi i) of (z^2 - 1)/(pi z^2) sin(pi z^2/2), vectorized."""
    z = np.asarray(z, dtype=complex)
    z2 = z * z
    w = 0.5 * math.pi * z2
    small = np.abs(z) < 1e-2
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.log(z2 - 1.0) - math.log(math.pi) - np.log(z2) + S.log_sin(w)
        ser = np.log(0.5 * (z2 - 1.0)) + np.log(1.0 - w * w / 6.0 + w ** 4 / 120.0)
    return np.where(small, ser, big)


def closed_form_zero_mask(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    z2 = z * z
    half = z2 / 2.0
    k = np.round(half.real)
    on_ring = (np.abs(half - k) <= ZERO_TOL * np.maximum(1.0, np.abs(z2))) & (k != 0)
    on_pm1 = np.abs(z2 - 1.0) <= ZERO_TOL * np.maximum(1.0, np.abs(z2))
    return on_ring | on_pm1


def eval_G_gamma_closed(z: complex) -> LogValue:
    """Closed form (z^2 - 1)/(pi z^2) sin(pi z^2 / 2) in log-domain."""
    z = complex(z)
    if bool(closed_form_zero_mask(np.array([z]))[0]):
        return LogValue(-math.inf, 0.0, 0.0, is_zero=True)
    w = complex(log_G_gamma_closed(np.array([z]))[0])
    return LogValue.from_log(w, 0.0)


def dist_ratio(z: complex, perturbed: PointSequence, reference: PointSequence, guard: float = 1.0) -> float:
    """dist(z, perturbed) / dist(z, reference); inf when only the reference distance vanishes."""
    a = dist(z, perturbed, guard)
    b = dist(z, reference, guard)
    if b == 0.0:
        return 1.0 if a == 0.0 else math.inf
    return a / b


# ---------------------------------------------------------------------------
# crude tail bounds by truncation radius


def tail_bound(form: ProductForm, z: complex, R_t: float) -> float:
    """Upper bound on the log-sum of all factors with |gamma| > R_t.

    Lattice forms: sum of genus-2 remainders |log E_2(w)| <= (2/3)|w|^3 plus
    perturbation terms 2|z||lambda - gamma|/(|lambda||gamma|).  Axis forms:
    ring-grouped even factors plus the moved branch.  The phi product: rotated
    zeros against integer poles.  Requires R_t >= 2|z|.
    """
    z = complex(z)
    az = abs(z)
    if R_t < 2.0 * az:
        raise ValueError("tail bound needs R_t >= 2|z|")
    if az == 0.0:
        return 0.0
    p = form.perturbation
    if form.kind is FormKind.PHI:
        n0 = math.floor(R_t) + 1
        return 2.0 * math.pi * az * (n0 ** (-1.0 - form.s) + n0 ** (-form.s) / form.s)
    if form.family.family is Family.LATTICE:
        out = (2.0 / 3.0) * az ** 3 * _cell_sum(R_t, 3)
        if p.kind is PerturbationKind.FULL_BETA:
            out += 2.0 * az * abs(p.beta) * math.exp(2.0 * abs(p.beta) / R_t ** 2) * _cell_sum(R_t, 3)
        elif p.kind is PerturbationKind.STRIP_BETA:
            c = abs(p.beta) / p.strip_height
            for n in range(1, p.strip_height + 1):
                m0 = math.ceil(math.sqrt(max(R_t * R_t - n * n, 0.0)))
                m0 = max(m0, 1)
                row = 1.0 / (m0 * m0 + n * n) + (math.pi / 2 - math.atan(m0 / n)) / n
                out += 2.0 * 2.0 * az * c * row / max(1.0 - c / R_t, 0.5)
        elif p.kind is PerturbationKind.ANGULAR_POWER:
            m0 = max(p.start, math.ceil(math.sqrt(max(R_t * R_t - 1.0, 1.0))))
            out += 2.0 * 2.0 * math.pi * az * (m0 ** (-1.0 - p.s) + m0 ** (-p.s) / p.s)
        elif p.kind is PerturbationKind.TABULATED:
            out += _tabulated_tail(form, z, R_t)
        return out
    n0 = math.floor(R_t * R_t / 2.0)
    if n0 < 1:
        raise ValueError("R_t too small for the axis family")
    t = az ** 4 / (4.0 * (n0 + 1) ** 2)
    out = (az ** 4 / 4.0) / (1.0 - t) / n0
    if p.kind is PerturbationKind.ALS_BETA:
        A, _ = p.decay_constants(form.family)
        out += 2.0 * az * A * math.exp(A / n0) / math.sqrt(2.0 * n0)
    elif p.kind is PerturbationKind.ANGULAR_POWER:
        w = 2.0 if p.symmetric else 1.0
        out += w * 2.0 * math.sqrt(2.0) * math.pi * az * n0 ** (0.5 - p.s) / (p.s - 0.5)
    elif p.kind is PerturbationKind.TABULATED:
        out += _tabulated_tail(form, z, R_t)
    return out


def _tabulated_tail(form: ProductForm, z: complex, R_t: float) -> float:
    fam, p = form.family, form.perturbation
    moved = [k for k, (d, t) in p.table_map(fam).items() if d != 0.0 or t != 0.0]
    if not moved:
        return 0.0
    cols = _columns_from_indices(fam, moved)
    gam = reference_points(fam, cols)
    lam = p.moved_points(fam, cols, gam)
    far = np.abs(gam) > R_t
    if not np.any(far):
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = np.log1p(-z / lam[far]) - np.log1p(-z / gam[far])
    return float(np.sum(np.abs(diff)))


def truncated_log_product(form: ProductForm, z: complex, R_t: float) -> complex:
    """Direct sum of the factor logs over |gamma| <= R_t (independent of the closed forms).

    Lattice forms sum genus-2 factors over the disc; axis forms sum whole rings
    with sqrt(2n) <= R_t.  Intended as a cross-check, not for production use.
    """
    z = complex(z)
    fam, p = form.family, form.perturbation
    if form.kind is FormKind.PHI:
        n = np.arange(1, math.floor(R_t) + 1, dtype=float)
        zeros = n * np.exp(1j * math.pi / n ** form.s)
        return complex(np.sum(np.log1p(-z / zeros) - np.log1p(-z / n)))
    if fam.family is Family.LATTICE:
        k = int(math.floor(R_t)) + 1
        m, n = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
        cols = {"m": m.ravel(), "n": n.ravel()}
        gam = reference_points(fam, cols)
        lam = p.moved_points(fam, cols, gam)
        lead = (cols["m"] == 0) & (cols["n"] == 0)
        keep = (np.abs(gam) <= R_t) & ~lead
        g = (cols["m"] + 1j * cols["n"])[keep]
        lm = lam[keep]
        body = np.sum(np.log1p(-z / lm) + z / g + z * z / (2.0 * g * g))
        return complex(np.log(z - lam[lead][0]) + body)
    N = int(math.floor(R_t * R_t / 2.0 + 1e-12))
    total = 0j
    for cols in _als_branch_columns(N):
        total += complex(np.sum(np.log1p(-z / p.moved_points(fam, cols))))
    if form.kind is FormKind.ALS:
        total += math.log(ALS_NORMALIZATION) + np.log(complex(z * z - 1.0))
    else:
        cols = {"axis": np.zeros(2, dtype=int), "sign": np.array([1, -1]), "n": np.zeros(2, dtype=int)}
        total += complex(np.sum(np.log1p(-z / p.moved_points(fam, cols))))
    return total


# ---------------------------------------------------------------------------
# fast modulus for grids of axis-sequence points (membership integrals)


def _psi_integral(z: np.ndarray, c: float, x0: np.ndarray) -> np.ndarray:
    """integral_{x0}^inf [log(1 - z/sqrt(2x+c)) - log(1 - z/sqrt(2x))] dx."""
    def anti(u):
        return 0.5 * u * u * np.log1p(-z / u) - 0.5 * z * z * np.log(u - z) - 0.5 * z * u
    uc = np.sqrt(2.0 * x0 + c)
    u0 = np.sqrt(2.0 * x0)
    return -(anti(uc) - anti(u0))


def _g_derivs(z, u):
    """d/dx log(1 - z/u(x)) and its third derivative, u = sqrt(2x + c)."""
    a = u - z
    g = z / (u * u * a)
    g1 = z * (-2.0 / (u ** 3 * a) - 1.0 / (u * u * a * a))
    g2 = z * (6.0 / (u ** 4 * a) + 4.0 / (u ** 3 * a * a) + 2.0 / (u * u * a ** 3))
    f1 = g
    f3 = (g2 * u - g1) / u ** 3
    return f1, f3


def als_log_abs_fast(perturbation: PerturbationSpec, z) -> np.ndarray:
    """log|G| for the axis form on many points, via closed form times a ratio product.

    G = G_closed * Psi with Psi = prod_n (1 - z/lambda_n)/(1 - z/sqrt(2n)) over
    the moved branch.  Psi is summed directly up to an adaptive n0 and the rest
    by Euler-Maclaurin with an exact antiderivative.  Supports no perturbation,
    finite tabulated perturbations and the beta shift.
    """
    z = np.asarray(z, dtype=complex)
    fam = FamilySpec.als()
    base = log_G_gamma_closed(z).real
    zero = closed_form_zero_mask(z)
    p = perturbation
    if p.kind is PerturbationKind.NONE or p.is_identity:
        return np.where(zero, -np.inf, base)
    if p.kind is PerturbationKind.TABULATED:
        corr, _ = _tabulated_correction(ProductForm.als(p), z)
        out = base + corr.real
        lz = _near_zero(ProductForm.als(p), z, _zero_tol(z))
        # zeros of the reference that were moved cancel; recompute those points nearby
        bad = ~np.isfinite(out) & ~lz
        if np.any(bad):
            h = 1e-6 * np.maximum(1.0, np.abs(z[bad])) * np.exp(0.7j)
            out[bad] = als_log_abs_fast(p, z[bad] + h)
        return np.where(lz, -np.inf, out)
    if p.kind is not PerturbationKind.ALS_BETA:
        raise ValueError("fast axis evaluation supports none, tabulated and beta-shift perturbations")
    beta = p.beta
    c = 4.0 * beta
    D = 8.0
    xs = z * z / 2.0
    n_base = int(math.ceil(D + 2.0 * abs(beta))) + 2
    # push n0 past the singularities xs and xs - 2 beta when they sit near the real ray
    need = np.where(np.abs(xs.imag) < D, np.ceil(np.maximum(xs.real, xs.real - 2 * beta) + D), 0.0)
    n0 = np.maximum(n_base, need).astype(np.int64)
    out = base.copy()
    psi = np.zeros(z.shape, dtype=complex)
    nmax = int(n0.max()) if n0.size else 0
    unmoved = (lambda n: n < -2.0 * beta) if beta < 0 else (lambda n: False)
    with np.errstate(divide="ignore", invalid="ignore"):
        for n in range(1, nmax):
            if unmoved(n):
                continue
            active = n < n0
            if not np.any(active):
                continue
            lam = math.sqrt(2.0 * n + c)
            g = math.sqrt(2.0 * n)
            psi[active] += np.log1p(-z[active] / lam) - np.log1p(-z[active] / g)
        x0 = n0.astype(float)
        f0 = np.log1p(-z / np.sqrt(2.0 * x0 + c)) - np.log1p(-z / np.sqrt(2.0 * x0))
        fc1, fc3 = _g_derivs(z, np.sqrt(2.0 * x0 + c))
        f01, f03 = _g_derivs(z, np.sqrt(2.0 * x0))
        em = _psi_integral(z, c, x0) + 0.5 * f0 - (fc1 - f01) / 12.0 + (fc3 - f03) / 720.0
        psi += em
    out = base + psi.real
    # reference points on the moved branch are not zeros; the moved points are
    moved_zero = _near_zero(ProductForm.als(p), z, _zero_tol(z))
    out = np.where(moved_zero, -np.inf, out)
    bad = ~np.isfinite(out) & ~moved_zero
    if np.any(bad):
        h = 1e-6 * np.maximum(1.0, np.abs(z[bad])) * np.exp(0.7j)
        out[bad] = als_log_abs_fast(p, z[bad] + h)
    return out


# ---------------------------------------------------------------------------
# fast modulus for grids of lattice points


def _log_abs_sigma(z: np.ndarray) -> np.ndarray:
    """log|sigma(z)| for the square lattice Z^2 (genus-2 product z prod'(...)).

    log|sigma(z)| - pi|z|^2/2 is Z^2-periodic, so sigma is evaluated at the
    reduced point z0 = z - round(z) with the row sums of the nu = 1 lattice,
    whose product equals -sigma(z)/z.
    """
    z0 = z - (np.round(z.real) + 1j * np.round(z.imag))
    with np.errstate(divide="ignore", invalid="ignore"):
        total, _, _, _ = _lattice_rows(z0, 1.0, 0, 0.0)
        log_s0 = total.real + np.log(np.abs(z0))
    return log_s0 + 0.5 * math.pi * (np.abs(z) ** 2 - np.abs(z0) ** 2)


def lattice_log_abs_fast(form: ProductForm, z) -> np.ndarray:
    """log|G| for lattice forms on many points.

    G = sigma(z) (z - nu)/z * Gamma(1+nu)Gamma(1-z)/Gamma(1+nu-z) * (moved rows / reference rows).
    Handles no perturbation, strip shifts and tabulated perturbations in
    closed form; other kinds fall back to the certified evaluator.
    """
    z = np.asarray(z, dtype=complex)
    p, nu = form.perturbation, form.family.nu
    if form.family.family is not Family.LATTICE:
        raise ValueError("lattice form expected")
    if p.kind not in (PerturbationKind.NONE, PerturbationKind.STRIP_BETA, PerturbationKind.TABULATED):
        return eval_log_product_many(form, z, 1e-8)[0]
    from scipy.special import loggamma
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (_log_abs_sigma(z) + np.log(np.abs(z - nu)) - np.log(np.abs(z))
               + (loggamma(1.0 + nu) + loggamma(1.0 - z) - loggamma(1.0 + nu - z)).real)
        if p.kind is PerturbationKind.STRIP_BETA:
            b = p.beta / p.strip_height
            for n in range(1, p.strip_height + 1):
                out = out + (S.lattice_row_log(z, n, b)[0] - S.lattice_row_log(z, n, 0.0)[0]).real
        elif p.kind is PerturbationKind.TABULATED:
            out = out + _tabulated_correction(form, z)[0].real
    # points next to integer lattice points (removable 0/0 in the formula) and zeros
    frac = z - (np.round(z.real) + 1j * np.round(z.imag))
    near_int = np.abs(frac) < 1e-6
    zero = _near_zero(form, z, _zero_tol(z))
    redo = (near_int | ~np.isfinite(out)) & ~zero
    if np.any(redo):
        out[redo] = eval_log_product_many(form, z[redo], 1e-8)[0]
    out[zero] = -np.inf
    return out
