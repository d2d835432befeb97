"""Point-sequence families, their perturbations and density functionals.

Two families are supported:

* ``LatticeNu``: the shifted square lattice.  The index ``(m, n)`` maps to
  ``m + i n`` for ``n != 0``; on the real row ``n = 0`` it maps to ``m + nu``
  for ``m >= 0`` and to ``m`` for ``m < 0``.  With ``nu = 1`` this is the
  integer lattice with the origin removed.
* ``AxisALS``: the points ``+-sqrt(2n), +-i sqrt(2n)`` for ``n >= 1`` together
  with ``+-1``.  The index is ``(axis, sign, n)`` with ``axis`` in
  ``{"re", "im"}``; ``("re", +-1, 0)`` is the extra point ``+-1``.

A perturbed point is always ``gamma * exp(delta) * exp(i theta)`` where gamma
is the unperturbed point carrying the same index.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import NumericResourceError, WindowError

logger = logging.getLogger(__name__)

# Point-count ceiling for the enumerations behind the density functionals.
MAX_DENSITY_POINTS = 60_000_000


class Family(str, enum.Enum):
    LATTICE = "lattice"
    ALS = "als"


class PerturbationKind(str, enum.Enum):
    NONE = "none"
    TABULATED = "tabulated"
    STRIP_BETA = "strip_beta"
    FULL_BETA = "full_beta"
    ALS_BETA = "als_beta"
    ANGULAR_POWER = "angular_power"


_AXES = ("re", "im")


@dataclass(frozen=True)
class FamilySpec:
    """Which base sequence to build: the shifted lattice or the axis sequence."""

    family: Family
    nu: float = 1.0
    strip_height: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.LATTICE:
            if not (0.0 < float(self.nu) <= 1.0):
                raise ValueError(f"nu must lie in (0, 1], got {self.nu!r}")
        if self.strip_height is not None and int(self.strip_height) < 1:
            raise ValueError("strip height must be a positive integer")

    @classmethod
    def lattice(cls, nu: float = 1.0, strip_height: int | None = None) -> "FamilySpec":
        return cls(Family.LATTICE, float(nu), strip_height)

    @classmethod
    def als(cls) -> "FamilySpec":
        return cls(Family.ALS, 1.0, None)

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.family is Family.LATTICE:
            out["nu"] = self.nu
            if self.strip_height is not None:
                out["strip_height"] = self.strip_height
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "FamilySpec":
        fam = Family(data["family"])
        if fam is Family.ALS:
            return cls.als()
        return cls.lattice(float(data.get("nu", 1.0)), data.get("strip_height"))


# ---------------------------------------------------------------------------
# index columns and reference points


def _lattice_gamma(nu: float, m: np.ndarray, n: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    row0 = np.where(m >= 0, m + nu, m)
    return np.where(n != 0, m + 1j * n, row0 + 0j)


def _als_gamma(axis: np.ndarray, sign: np.ndarray, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n)
    radius = np.where(n == 0, 1.0, np.sqrt(2.0 * np.maximum(n, 0)))
    unit = np.where(np.asarray(axis) == 0, 1.0 + 0j, 1j)
    return np.asarray(sign) * radius * unit


def reference_points(family: FamilySpec, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """Unperturbed points for the given index columns."""
    if family.family is Family.LATTICE:
        return _lattice_gamma(family.nu, columns["m"], columns["n"])
    return _als_gamma(columns["axis"], columns["sign"], columns["n"])


def _lattice_window(nu: float, radius: float) -> dict:
    k = int(math.floor(radius)) + 1
    m, n = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    gam = _lattice_gamma(nu, m, n)
    keep = np.abs(gam) <= radius
    return {"m": m[keep].astype(np.int64), "n": n[keep].astype(np.int64)}


def _als_window(radius: float) -> dict:
    nmax = int(math.floor(radius * radius / 2.0 + 1e-12))
    while nmax > 0 and math.sqrt(2.0 * nmax) > radius:
        nmax -= 1
    ns = np.arange(1, nmax + 1, dtype=np.int64)
    axis, sign, n = [], [], []
    for ax in (0, 1):
        for sg in (1, -1):
            axis.append(np.full(ns.size, ax, dtype=np.int64))
            sign.append(np.full(ns.size, sg, dtype=np.int64))
            n.append(ns)
    if radius >= 1.0:
        axis.append(np.zeros(2, dtype=np.int64))
        sign.append(np.array([1, -1], dtype=np.int64))
        n.append(np.zeros(2, dtype=np.int64))
    return {"axis": np.concatenate(axis), "sign": np.concatenate(sign), "n": np.concatenate(n)}


def _window_columns(family: FamilySpec, radius: float) -> dict:
    if family.family is Family.LATTICE:
        return _lattice_window(family.nu, radius)
    return _als_window(radius)


def _normalize_index(family: FamilySpec, idx) -> tuple:
    if family.family is Family.LATTICE:
        m, n = idx
        return (int(m), int(n))
    axis, sign, n = idx
    if axis not in _AXES:
        axis = _AXES[int(axis)]
    sign, n = int(sign), int(n)
    if sign not in (1, -1) or n < 0 or (n == 0 and axis != "re"):
        raise ValueError(f"invalid axis-sequence index {idx!r}")
    return (axis, sign, n)


def _columns_from_indices(family: FamilySpec, indices: Sequence[tuple]) -> dict:
    if family.family is Family.LATTICE:
        arr = np.array(indices, dtype=np.int64).reshape(-1, 2)
        return {"m": arr[:, 0], "n": arr[:, 1]}
    axis = np.array([_AXES.index(i[0]) for i in indices], dtype=np.int64)
    sign = np.array([i[1] for i in indices], dtype=np.int64)
    n = np.array([i[2] for i in indices], dtype=np.int64)
    return {"axis": axis, "sign": sign, "n": n}


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class PerturbationSpec:
    """Maps each reference point to (delta, theta).

    Use the named constructors rather than the raw fields.  ``table`` holds
    ``(index, delta, theta)`` triples for the tabulated kind.
    """

    kind: PerturbationKind = PerturbationKind.NONE
    beta: float = 0.0
    strip_height: int | None = None
    s: float = 0.0
    start: int = 2
    table: tuple = ()
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        if self.kind is PerturbationKind.STRIP_BETA:
            if self.strip_height is None or int(self.strip_height) < 1:
                raise ValueError("strip perturbation needs a positive strip height")
        if self.kind is PerturbationKind.ANGULAR_POWER:
            if not self.s > 0:
                raise ValueError("angular exponent s must be positive")
            if int(self.start) < 1:
                raise ValueError("angular perturbation start index must be >= 1")
        elif self.symmetric:
            raise ValueError("the symmetric flag only applies to angular perturbations")

    # constructors -----------------------------------------------------
    @classmethod
    def none(cls) -> "PerturbationSpec":
        return cls()

    @classmethod
    def strip_beta(cls, beta: float, strip_height: int) -> "PerturbationSpec":
        return cls(PerturbationKind.STRIP_BETA, beta=float(beta), strip_height=int(strip_height))

    @classmethod
    def full_beta(cls, beta: float) -> "PerturbationSpec":
        return cls(PerturbationKind.FULL_BETA, beta=float(beta))

    @classmethod
    def als_beta(cls, beta: float) -> "PerturbationSpec":
        return cls(PerturbationKind.ALS_BETA, beta=float(beta))

    @classmethod
    def angular_power(cls, s: float, start: int = 2, symmetric: bool = False) -> "PerturbationSpec":
        """Rotation by pi/k^s from index ``start`` on.  ``symmetric`` (axis family
        only) rotates the negative real branch too, so that -lambda is a zero
        whenever lambda is."""
        return cls(PerturbationKind.ANGULAR_POWER, s=float(s), start=int(start), symmetric=bool(symmetric))

    @classmethod
    def tabulated(cls, entries: Mapping | Iterable) -> "PerturbationSpec":
        """Build from ``{index: (delta, theta)}`` or an iterable of triples."""
        if isinstance(entries, Mapping):
            items = [(tuple(k), float(v[0]), float(v[1])) for k, v in entries.items()]
        else:
            items = [(tuple(k), float(d), float(t)) for k, d, t in entries]
        items.sort(key=lambda x: tuple(str(c) for c in x[0]))
        return cls(PerturbationKind.TABULATED, table=tuple(items))

    # helpers ----------------------------------------------------------
    @property
    def is_identity(self) -> bool:
        if self.kind is PerturbationKind.NONE:
            return True
        if self.kind is PerturbationKind.TABULATED:
            return all(d == 0.0 and t == 0.0 for _, d, t in self.table)
        return False

    def check_family(self, family: FamilySpec) -> None:
        lattice_only = {PerturbationKind.STRIP_BETA, PerturbationKind.FULL_BETA}
        if self.kind in lattice_only and family.family is not Family.LATTICE:
            raise ValueError(f"{self.kind.value} perturbation only applies to the lattice family")
        if self.kind is PerturbationKind.ALS_BETA and family.family is not Family.ALS:
            raise ValueError("als_beta perturbation only applies to the axis family")
        if self.kind is PerturbationKind.TABULATED:
            for idx, _, _ in self.table:
                _normalize_index(family, idx)
        if self.symmetric and family.family is not Family.ALS:
            raise ValueError("symmetric angular perturbation only applies to the axis family")

    def table_map(self, family: FamilySpec) -> dict:
        return {_normalize_index(family, idx): (d, t) for idx, d, t in self.table}

    def moved_points(self, family: FamilySpec, columns: Mapping[str, np.ndarray],
                     gamma: np.ndarray | None = None) -> np.ndarray:
        """Perturbed points for the given index columns (vectorized)."""
        self.check_family(family)
        if gamma is None:
            gamma = reference_points(family, columns)
        gamma = np.asarray(gamma, dtype=complex)
        kind = self.kind
        if kind is PerturbationKind.NONE:
            return gamma.copy()
        if kind is PerturbationKind.STRIP_BETA:
            m, n = columns["m"], columns["n"]
            rows = (n >= 1) & (n <= self.strip_height)
            shift = np.sign(m) * self.beta / self.strip_height
            return np.where(rows, gamma + shift, gamma)
        if kind is PerturbationKind.FULL_BETA:
            return gamma * np.exp(self.beta / np.abs(gamma) ** 2)
        if kind is PerturbationKind.ALS_BETA:
            axis, sign, n = columns["axis"], columns["sign"], columns["n"]
            branch = (axis == 0) & (sign == 1) & (n >= 1)
            if self.beta < 0:
                branch &= ~(n < -2.0 * self.beta)
            arg = np.maximum(2.0 * n + 4.0 * self.beta, 0.0)
            out = np.where(branch, np.sqrt(arg) + 0j, gamma)
            if np.any(branch & (arg <= 0.0)):
                raise ValueError("als_beta moves a point onto the origin; choose a non-integer -2*beta")
            return out
        if kind is PerturbationKind.ANGULAR_POWER:
            theta = angular_theta(self, family, columns)
            return np.where(theta != 0.0, gamma * np.exp(1j * theta), gamma)
        # tabulated
        table = self.table_map(family)
        out = gamma.copy()
        if not table:
            return out
        keys = _index_tuples(family, columns)
        for pos, key in enumerate(keys):
            hit = table.get(key)
            if hit is not None:
                d, t = hit
                if d != 0.0 or t != 0.0:
                    out[pos] = gamma[pos] * math.exp(d) * complex(math.cos(t), math.sin(t))
        return out

    def support_radius(self, family: FamilySpec) -> float:
        """Largest reference modulus that the perturbation moves (inf if unbounded)."""
        kind = self.kind
        if kind is PerturbationKind.NONE:
            return 0.0
        if kind is PerturbationKind.TABULATED:
            table = self.table_map(family)
            moved = [k for k, (d, t) in table.items() if d != 0.0 or t != 0.0]
            if not moved:
                return 0.0
            cols = _columns_from_indices(family, moved)
            return float(np.max(np.abs(reference_points(family, cols))))
        return math.inf

    def decay_constants(self, family: FamilySpec) -> tuple[float, float]:
        """Bounds (A, B) with |delta| <= A / |gamma|^p and |theta| <= B / |gamma|^p.

        The power p is 2 for the plane-wide and axis families (in terms of
        |gamma|^2 = 2n on the axis family) and 1 for strip rows (in terms of |m|).
        Only the tail beyond the family minimum matters, so these constants
        bound the sup over all moved points.
        """
        kind = self.kind
        if kind in (PerturbationKind.NONE,):
            return 0.0, 0.0
        if kind is PerturbationKind.FULL_BETA:
            return abs(self.beta), 0.0
        if kind is PerturbationKind.STRIP_BETA:
            # |delta_{m,n}| <= |beta|/(N |m|) and |theta_{m,n}| <= |beta| n/(N m^2) <= |beta|/|m|
            b = abs(self.beta) / self.strip_height
            return 2.0 * b, float(self.strip_height) * b
        if kind is PerturbationKind.ALS_BETA:
            # |gamma|^2 |delta| = 2n |log(1+2 beta/n)|/2 <= 2|beta| / (1 - 2|beta|/n) ; bound crudely
            b = abs(self.beta)
            return 4.0 * b + 8.0 * b * b, 0.0
        if kind is PerturbationKind.ANGULAR_POWER:
            raise ValueError("angular_power perturbations have no |gamma|^2 decay bound")
        raise ValueError("tabulated perturbations have finite support; no decay constants needed")


def angular_theta(p: PerturbationSpec, family: FamilySpec, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """theta = pi / k^s on the targeted branch: lattice row 1 with m >= start,
    or the positive real branch of the axis family with n >= start."""
    if family.family is Family.LATTICE:
        k = np.asarray(columns["m"])
        target = (np.asarray(columns["n"]) == 1) & (k >= p.start)
    else:
        k = np.asarray(columns["n"])
        on_axis = np.asarray(columns["axis"]) == 0
        sign = np.asarray(columns["sign"])
        branch = (sign == 1) | (sign == -1) if p.symmetric else sign == 1
        target = on_axis & branch & (k >= p.start)
    kk = np.where(target, np.maximum(k, 1), 1).astype(float)
    return np.where(target, math.pi / kk ** p.s, 0.0)


def _index_tuples(family: FamilySpec, columns: Mapping[str, np.ndarray]) -> list:
    if family.family is Family.LATTICE:
        return list(zip(columns["m"].tolist(), columns["n"].tolist()))
    return [(_AXES[a], s, n) for a, s, n in
            zip(columns["axis"].tolist(), columns["sign"].tolist(), columns["n"].tolist())]


# ---------------------------------------------------------------------------
# the sequence container


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _order(points: np.ndarray) -> np.ndarray:
    arg = np.mod(np.angle(points), 2.0 * math.pi)
    return np.lexsort((arg, np.abs(points)))


@dataclass(frozen=True, eq=False)
class PointSequence:
    """Immutable, indexed collection of points with family metadata.

    ``coverage`` is a radius such that every point of the full (infinite)
    sequence with modulus <= coverage is retained in ``points``.
    """

    points: np.ndarray
    reference: np.ndarray
    columns: Mapping[str, np.ndarray]
    family: FamilySpec
    perturbation: PerturbationSpec
    window: float
    coverage: float
    delta: np.ndarray = field(repr=False, default=None)
    theta: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return int(self.points.size)

    @cached_property
    def indices(self) -> list:
        return _index_tuples(self.family, self.columns)

    @cached_property
    def index(self) -> dict:
        return {key: pos for pos, key in enumerate(self.indices)}

    def point(self, idx) -> complex:
        return complex(self.points[self.index[_normalize_index(self.family, idx)]])

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(np.column_stack([self.points.real, self.points.imag]))

    def to_rows(self) -> list[dict]:
        """Rows for the CSV dump (index columns, re, im, delta, theta)."""
        rows = []
        for pos, key in enumerate(self.indices):
            if self.family.family is Family.LATTICE:
                row = {"index_m": key[0], "index_n": key[1]}
            else:
                row = {"axis": key[0], "sign": key[1], "n": key[2]}
            row.update(re=float(self.points[pos].real), im=float(self.points[pos].imag),
                       delta=float(self.delta[pos]), theta=float(self.theta[pos]))
            rows.append(row)
        return rows


def _assemble(family: FamilySpec, columns: dict, perturbation: PerturbationSpec,
              window: float, coverage: float) -> PointSequence:
    gamma = reference_points(family, columns)
    lam = perturbation.moved_points(family, columns, gamma)
    order = _order(lam)
    columns = {k: _readonly(v[order]) for k, v in columns.items()}
    gamma, lam = gamma[order], lam[order]
    ratio = np.ones_like(lam)
    nz = gamma != 0
    ratio[nz] = lam[nz] / gamma[nz]
    with np.errstate(divide="ignore"):
        delta = np.log(np.abs(ratio))
    theta = np.angle(ratio)
    if perturbation.kind is PerturbationKind.ANGULAR_POWER:
        theta = angular_theta(perturbation, family, columns)
    if perturbation.kind is PerturbationKind.FULL_BETA:
        delta = perturbation.beta / np.abs(gamma) ** 2
    if perturbation.kind is PerturbationKind.NONE:
        delta = np.zeros(lam.size)
        theta = np.zeros(lam.size)
    if perturbation.kind is PerturbationKind.TABULATED:
        table = perturbation.table_map(family)
        keys = _index_tuples(family, columns)
        delta = np.array([table.get(k, (0.0, 0.0))[0] for k in keys], dtype=float)
        theta = np.array([table.get(k, (0.0, 0.0))[1] for k in keys], dtype=float)
    if lam.size > 1:
        tree = cKDTree(np.column_stack([lam.real, lam.imag]))
        d, _ = tree.query(np.column_stack([lam.real, lam.imag]), k=2)
        if np.any(d[:, 1] == 0.0):
            raise ValueError("perturbation produces duplicate points")
    return PointSequence(
        points=_readonly(lam), reference=_readonly(gamma), columns=columns, family=family,
        perturbation=perturbation, window=float(window), coverage=float(coverage),
        delta=_readonly(np.asarray(delta, dtype=float)), theta=_readonly(np.asarray(theta, dtype=float)),
    )


def build_sequence(spec: FamilySpec, window: float) -> PointSequence:
    """All unperturbed family points with modulus <= window."""
    if not window > 0:
        raise ValueError("window must be positive")
    cols = _window_columns(spec, float(window))
    return _assemble(spec, cols, PerturbationSpec.none(), window, window)


def _coverage(p: PerturbationSpec, family: FamilySpec, window: float) -> float:
    """Radius below which no omitted (|gamma| > window) point can land."""
    kind = p.kind
    if kind in (PerturbationKind.NONE, PerturbationKind.ANGULAR_POWER):
        return window
    if kind is PerturbationKind.STRIP_BETA:
        return max(window - abs(p.beta) / p.strip_height, 0.0)
    if kind is PerturbationKind.FULL_BETA:
        if p.beta >= 0:
            return window
        if window * window <= 2.0 * abs(p.beta):
            return 0.0
        return window * math.exp(p.beta / window ** 2)
    if kind is PerturbationKind.ALS_BETA:
        if p.beta >= 0:
            return window
        return math.sqrt(max(window * window + 4.0 * p.beta, 0.0))
    # tabulated: moved points outside the window may land inside it
    table = p.table_map(family)
    outside = [k for k in table]
    if not outside:
        return window
    cols = _columns_from_indices(family, outside)
    gam = reference_points(family, cols)
    lam = p.moved_points(family, cols, gam)
    far = np.abs(gam) > window
    if not np.any(far):
        return window
    return float(min(window, np.min(np.abs(lam[far]))))


def perturb(seq: PointSequence, p: PerturbationSpec) -> PointSequence:
    """Replace every point gamma by gamma*exp(delta)*exp(i theta); indices are kept."""
    p.check_family(seq.family)
    if seq.perturbation.kind is not PerturbationKind.NONE:
        raise ValueError("perturb expects an unperturbed sequence")
    if p.kind is PerturbationKind.STRIP_BETA and seq.family.strip_height not in (None, p.strip_height):
        raise ValueError("strip height of the perturbation differs from the family's")
    cols = {k: np.array(v) for k, v in seq.columns.items()}
    return _assemble(seq.family, cols, p, seq.window, _coverage(p, seq.family, seq.window))


def make_sequence(family: FamilySpec, p: PerturbationSpec | None, window: float) -> PointSequence:
    """Convenience: build and perturb in one call."""
    base = build_sequence(family, window)
    if p is None or p.kind is PerturbationKind.NONE:
        return base
    return perturb(base, p)


# ---------------------------------------------------------------------------
# distances and separation


def dist_many(z, seq: PointSequence, guard: float = 1.0) -> np.ndarray:
    """Distances from each z to the full sequence, certified against the window."""
    if guard < 1.0:
        raise ValueError("guard must be >= 1")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.size == 0:
        return np.zeros(0)
    mod = np.abs(z)
    worst = float(np.max(mod))
    if seq.coverage < worst + guard:
        raise WindowError(
            f"sequence coverage {seq.coverage:.6g} is below |z| + guard = {worst + guard:.6g}; "
            "build a larger window")
    if len(seq) == 0:
        raise WindowError("empty sequence cannot certify a distance")
    d, _ = seq._tree.query(np.column_stack([z.real, z.imag]), k=1)
    bad = d > seq.coverage - mod
    if np.any(bad):
        need = float(np.max(d[bad] + mod[bad]))
        raise WindowError(
            f"nearest retained point lies beyond the certified radius; need coverage > {need:.6g}")
    return d


def dist(z: complex, seq: PointSequence, guard: float = 1.0) -> float:
    """Exact Euclidean distance from z to the nearest point of the full sequence."""
    return float(dist_many(np.array([z]), seq, guard)[0])


class SeparationMode(str, enum.Enum):
    ABSOLUTE = "absolute"
    ALS_SCALED = "als_scaled"


def separation_margin(seq: PointSequence, mode: SeparationMode | str = SeparationMode.ABSOLUTE) -> float:
    """Minimum pairwise distance, or min |l - l'| * min(|l|, |l'|) in scaled mode.

    The scaled value relates to the constant c in |l_m - l_n| >= c / min(sqrt m, sqrt n)
    through c = value / sqrt(2), since the ring radius is sqrt(2n).
    """
    mode = SeparationMode(mode)
    if len(seq) < 2:
        return math.inf
    pts = np.column_stack([seq.points.real, seq.points.imag])
    tree = seq._tree
    d, j = tree.query(pts, k=2)
    if mode is SeparationMode.ABSOLUTE:
        return float(np.min(d[:, 1]))
    if seq.family.family is not Family.ALS:
        raise ValueError("scaled separation applies to the axis family only")
    mod = np.abs(seq.points)
    best = float(np.min(d[:, 1] * np.minimum(mod, mod[j[:, 1]])))
    if best == 0.0:
        return 0.0
    # any pair beating `best` has |p - q| < best / min(|p|, |q|)
    radii = best / np.maximum(mod, 1e-300)
    for i, nbrs in enumerate(tree.query_ball_point(pts, radii)):
        for k in nbrs:
            if k == i:
                continue
            v = abs(seq.points[i] - seq.points[k]) * min(mod[i], mod[k])
            if v < best:
                best = float(v)
    return best


# ---------------------------------------------------------------------------
# density functionals


@dataclass(frozen=True)
class DensityReport:
    delta_sup: float
    delta_inf: float
    cutoff: float
    partial_sums: list
    ring_sums: list
    avdonin_sup: float | None = None
    avdonin_window: int | None = None
    variant: str = ""
    claimed: float | None = None

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "delta_sup": self.delta_sup, "delta_inf": self.delta_inf,
            "cutoff": self.cutoff, "partial_sums": [list(p) for p in self.partial_sums],
            "ring_sums": list(self.ring_sums), "avdonin_sup": self.avdonin_sup,
            "avdonin_window": self.avdonin_window, "claimed": self.claimed,
        }


def _strip_partial_sums(p: PerturbationSpec, family: FamilySpec, cutoffs: np.ndarray) -> np.ndarray:
    height = p.strip_height or family.strip_height
    if height is None:
        raise ValueError("strip functional needs a strip height")
    kmax = int(math.floor(cutoffs.max()))
    if (2 * kmax + 1) * height > MAX_DENSITY_POINTS:
        raise NumericResourceError("strip density cutoff too large", required=kmax)
    ks = np.arange(0, kmax + 1)
    total = np.zeros(kmax + 1)
    for row in range(1, height + 1):
        acc = np.zeros(kmax + 1)
        for sgn in (1, -1):
            m = sgn * ks
            cols = {"m": m, "n": np.full(m.size, row)}
            gam = reference_points(family, cols)
            lam = p.moved_points(family, cols, gam)
            d = _delta_of(p, gam, lam)
            if sgn == -1:
                d[0] = 0.0  # k = 0 counted once
            acc += d
        total += np.cumsum(acc)
    return total[np.floor(cutoffs).astype(int)]


def _delta_of(p: PerturbationSpec, gam: np.ndarray, lam: np.ndarray) -> np.ndarray:
    if p.kind is PerturbationKind.FULL_BETA:
        return p.beta / np.abs(gam) ** 2
    return np.log(np.abs(lam) / np.abs(gam))


def _plane_partial_sums(p: PerturbationSpec, family: FamilySpec, cutoffs: np.ndarray) -> np.ndarray:
    rmax = float(cutoffs.max())
    if p.kind is PerturbationKind.TABULATED:
        table = p.table_map(family)
        keys = list(table)
        if not keys:
            return np.zeros(cutoffs.size)
        cols = _columns_from_indices(family, keys)
        mods = np.abs(reference_points(family, cols))
        vals = np.array([table[k][0] for k in keys])
    else:
        if math.pi * rmax * rmax > MAX_DENSITY_POINTS:
            raise NumericResourceError(
                f"plane density at cutoff {rmax:g} needs ~{math.pi * rmax * rmax:.3g} points",
                required=rmax)
        mods_l, vals_l = [], []
        k = int(math.floor(rmax)) + 1
        for n in range(-k, k + 1):
            half = math.sqrt(max(rmax * rmax - n * n, 0.0)) + 1
            m = np.arange(-int(half) - 1, int(half) + 2)
            cols = {"m": m, "n": np.full(m.size, n)}
            gam = reference_points(family, cols)
            keep = np.abs(gam) <= rmax
            cols = {"m": m[keep], "n": cols["n"][keep]}
            gam = gam[keep]
            lam = p.moved_points(family, cols, gam)
            mods_l.append(np.abs(gam))
            vals_l.append(_delta_of(p, gam, lam))
        mods, vals = np.concatenate(mods_l), np.concatenate(vals_l)
    order = np.argsort(mods, kind="stable")
    mods, csum = mods[order], np.cumsum(vals[order])
    pos = np.searchsorted(mods, cutoffs, side="right")
    return np.where(pos > 0, csum[np.maximum(pos - 1, 0)], 0.0)


def _als_ring_deltas(p: PerturbationSpec, family: FamilySpec, nmax: int) -> np.ndarray:
    """Delta_n = sum of delta over the four points of ring n, n = 1..nmax."""
    if 4 * nmax > MAX_DENSITY_POINTS:
        raise NumericResourceError("axis density cutoff too large", required=nmax)
    ns = np.arange(1, nmax + 1)
    total = np.zeros(nmax)
    if p.kind is PerturbationKind.TABULATED:
        for (axis, sign, n), (d, _) in p.table_map(family).items():
            if 1 <= n <= nmax:
                total[n - 1] += d
        return total
    for ax in (0, 1):
        for sg in (1, -1):
            cols = {"axis": np.full(nmax, ax), "sign": np.full(nmax, sg), "n": ns}
            gam = reference_points(family, cols)
            lam = p.moved_points(family, cols, gam)
            total += np.log(np.abs(lam) / np.abs(gam))
    if p.kind is PerturbationKind.ALS_BETA:
        # closed form on the moved branch avoids cancellation in log|lam/gam|
        moved = ns >= (-2.0 * p.beta if p.beta < 0 else 0)
        total = np.where(moved, 0.5 * np.log1p(2.0 * p.beta / ns), 0.0)
    return total


def _top_half(values: np.ndarray) -> np.ndarray:
    k = max(1, values.size // 2)
    return values[-k:]


def density_functionals(seq: PointSequence, cutoffs: Sequence[float], avdonin_window: int | None = None
                        ) -> DensityReport:
    """Finite-cutoff estimates of the log-averaged perturbation functionals.

    Strip families (strip perturbation or a family with a strip height) use
    the signed sum over rows 1..N and |k| <= m divided by log m.  Other
    lattice perturbations use the signed sum over |gamma| <= R divided by
    log R.  The axis family uses |sum_{k<=n} Delta_k| / log n with Delta_n the
    ring sums (which reduce to delta_n for half-axis perturbations).
    """
    cut = np.asarray(list(cutoffs), dtype=float)
    if cut.size == 0 or np.any(cut < 2) or np.any(np.diff(cut) <= 0):
        raise ValueError("cutoffs must be increasing and >= 2")
    p, fam = seq.perturbation, seq.family
    ring_sums: list = []
    claimed = None
    if p.kind is PerturbationKind.NONE or p.kind is PerturbationKind.ANGULAR_POWER:
        sums = np.zeros(cut.size)
        variant = "zero"
    elif fam.family is Family.LATTICE:
        strip = p.kind is PerturbationKind.STRIP_BETA or (
            p.kind is PerturbationKind.TABULATED and fam.strip_height is not None)
        if strip:
            if p.kind is PerturbationKind.TABULATED:
                sums = _tabulated_strip_sums(p, fam, cut)
            else:
                sums = _strip_partial_sums(p, fam, cut)
            variant = "strip"
        else:
            sums = _plane_partial_sums(p, fam, cut)
            variant = "plane"
        if p.kind in (PerturbationKind.STRIP_BETA, PerturbationKind.FULL_BETA):
            claimed = abs(p.beta)
    else:
        nmax = int(math.floor(cut.max()))
        rings = _als_ring_deltas(p, fam, nmax)
        csum = np.cumsum(rings)
        sums = csum[np.floor(cut).astype(int) - 1]
        ring_sums = rings[: min(nmax, 64)].tolist()
        variant = "axis"
        if p.kind is PerturbationKind.ALS_BETA:
            claimed = abs(p.beta)
    if variant == "axis":
        vals = np.abs(sums) / np.log(cut)
    else:
        vals = sums / np.log(cut)
    top = _top_half(vals)
    av = None
    if avdonin_window is not None and variant == "axis":
        nmax = int(math.floor(cut.max()))
        av = avdonin_windowed_sup(rings, avdonin_window, nmax - avdonin_window)
    return DensityReport(
        delta_sup=float(np.max(top)), delta_inf=float(np.min(top)), cutoff=float(cut[-1]),
        partial_sums=[(float(c), float(s)) for c, s in zip(cut, sums)], ring_sums=ring_sums,
        avdonin_sup=av, avdonin_window=avdonin_window, variant=variant, claimed=claimed,
    )


def _tabulated_strip_sums(p: PerturbationSpec, fam: FamilySpec, cut: np.ndarray) -> np.ndarray:
    out = np.zeros(cut.size)
    for (m, n), (d, _) in p.table_map(fam).items():
        if 1 <= n <= fam.strip_height:
            out += np.where(abs(m) <= np.floor(cut), d, 0.0)
    return out


def avdonin_windowed_sup(delta_seq, M: int, n_max: int) -> float:
    """sup over 0 <= n <= n_max of (n+1)/M * |delta_{n+1} + ... + delta_{n+M}|.

    ``delta_seq[k-1]`` holds delta_k.
    """
    M = int(M)
    if M < 1:
        raise ValueError("window M must be >= 1")
    d = np.asarray(delta_seq, dtype=float)
    if n_max < M:
        raise ValueError("n_max must be >= M")
    if d.size < n_max + M:
        raise ValueError(f"need delta_k for k <= {n_max + M}, got {d.size}")
    c = np.concatenate([[0.0], np.cumsum(d[: n_max + M])])
    n = np.arange(0, n_max + 1)
    window = c[n + M] - c[n]
    return float(np.max((n + 1) / M * np.abs(window)))


def counterexample_delta(n_max: int) -> np.ndarray:
    """delta_n = (-1)^k / 2^k for 2^k <= n < 2^(k+1), for n = 1..n_max."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    n = np.arange(1, n_max + 1)
    k = np.array([int(v).bit_length() - 1 for v in n.tolist()])
    return np.where(k % 2 == 0, 1.0, -1.0) * np.ldexp(1.0, -k)
