"""Closed-form pieces and Hurwitz-zeta tail series used by the product evaluators.

Every tail routine returns ``(value, bound)``: the summed series and a
majorant for the part of the series that was not summed.  The tails are
sums over n > N of log-ratios of elementary factors; they are expanded in
powers of z and of the perturbation and resummed with ``scipy.special.zeta``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import binom, loggamma, polygamma, psi, zeta

EULER_GAMMA = 0.57721566490153286061
EPS = np.finfo(float).eps
_TINY = 1e-18


def wrap_phase(phase):
    """Map angles to (-pi, pi]."""
    p = np.mod(np.asarray(phase, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    p = np.where(p == -math.pi, math.pi, p)
    return float(p) if np.ndim(p) == 0 else p


def log_sin(w):
    """log(sin w) (mod 2 pi i), stable for large |Im w|."""
    w = np.asarray(w, dtype=complex)
    upper = w.imag >= 0
    ww = np.where(upper, w, -w)  # sin(-w) = -sin(w)
    # sin w = e^{-iw} (1 - e^{2iw}) * (i/2) for Im w >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.exp(2j * ww)
        out = -1j * ww + np.log1p(-e) + np.log(0.5j)
    out = np.where(upper, out, out + 1j * math.pi)
    return out


def hurwitz(s: float, q: float) -> float:
    return float(zeta(s, q))


def _zeta_majorant(a: float, q: float) -> float:
    """Upper bound for zeta(a, q) with a > 1, q >= 1."""
    return q ** (-a) * (1.0 + q / (a - 1.0))


# ---------------------------------------------------------------------------
# lattice rows


def inv_sinh2(x):
    """1 / sinh(x)^2 without overflow, x > 0."""
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 - e) ** 2


def coth(x):
    e = np.exp(-2.0 * np.abs(x))
    return np.sign(x) * (1.0 + e) / (1.0 - e)


def lattice_row_log(z, n: int, shift: float = 0.0):
    """Sum over m of log[(1 - z/lambda_m) exp(z/gamma_m + z^2/(2 gamma_m^2))] on row n != 0.

    gamma_m = m + i n, lambda_m = m + sign(m)*shift + i n.  Returns the
    complex log (mod 2 pi i) and the sum of the magnitudes of the pieces
    (for rounding allowances).
    """
    z = np.asarray(z, dtype=complex)
    cp = 1j * n + shift
    cm = 1j * n - shift
    pieces = (
        np.log1p(-z / (1j * n)),
        loggamma(1.0 + cp) - loggamma(1.0 + cp - z),
        loggamma(1.0 - cm) - loggamma(1.0 - cm + z),
        -1j * math.pi * z * coth(math.pi * n),
        -(math.pi ** 2) * z * z * inv_sinh2(math.pi * n) / 2.0,
    )
    total = sum(pieces)
    mag = (np.abs(pieces[0]) + np.abs(loggamma(1.0 + cp - z)) + np.abs(loggamma(1.0 - cm + z))
           + 2 * abs(loggamma(1.0 + cp)) + np.abs(pieces[3]) + np.abs(pieces[4]))
    return total, mag


def lattice_row_tail_bound(z, n_cut: int):
    """Bound on the sum over |n| > n_cut of the unperturbed row logs."""
    z = np.asarray(z, dtype=complex)
    az = np.abs(z)
    out = np.zeros(z.shape)
    for sgn in (1, -1):
        n = np.arange(n_cut + 1, n_cut + 200, dtype=float)[:, None]
        q = np.exp(-2.0 * math.pi * n)
        t = np.exp(-2.0 * math.pi * (n - sgn * z.imag[None, ...]))
        with np.errstate(over="ignore"):
            term = (t / np.maximum(1.0 - t, 1e-300) + q / (1.0 - q)
                    + 2.0 * math.pi * az * q / (1.0 - q)
                    + 2.0 * math.pi ** 2 * az ** 2 * q / (1.0 - q) ** 2)
        term = np.where(t < 0.5, term, np.inf)
        out = out + term.sum(axis=0)
    return out


def lattice_row0_log(z, nu: float):
    """Row 0 of the shifted lattice without the leading factor (z - nu).

    Positive side: zeros m + nu for m >= 1 with convergence factors built on
    the integer point m.  Negative side: points -k, k >= 1.
    """
    z = np.asarray(z, dtype=complex)
    pos = (loggamma(1.0 + nu) - loggamma(1.0 + nu - z) - z * psi(1.0 + nu)
           + 0.5 * z * z * polygamma(1, 1.0 + nu))
    # switch the convergence factors from m + nu to m
    pos = pos + z * (psi(1.0 + nu) + EULER_GAMMA) + 0.5 * z * z * (math.pi ** 2 / 6.0 - polygamma(1, 1.0 + nu))
    neg = -loggamma(1.0 + z) - EULER_GAMMA * z + (math.pi ** 2) * z * z / 12.0
    mag = (np.abs(loggamma(1.0 + nu - z)) + np.abs(loggamma(1.0 + z)) + np.abs(z) * (2 + abs(psi(1 + nu)))
           + np.abs(z) ** 2 * 2.0)
    return pos + neg, mag


# ---------------------------------------------------------------------------
# axis-sequence tails (sums over n > N)


def als_even_tail(z: complex, N: int, tol: float = 1e-17):
    """sum_{n>N} log(1 - z^4/(4 n^2)) = -sum_j (z^4/4)^j / j * zeta(2j, N+1)."""
    z4 = complex(z) ** 4 / 4.0
    q = N + 1.0
    rho = abs(z4) / q ** 2
    if rho >= 0.5:
        raise ValueError("even tail needs N + 1 > |z|^2")
    total = 0j
    j = 1
    while True:
        total -= z4 ** j / j * zeta(2.0 * j, q)
        rem = (q + 2.0) * rho ** (j + 1) / (1.0 - rho)
        if rem < tol or j > 200:
            return total, rem
        j += 1


def _exp_remainder(a: float, j: int) -> float:
    """Bound for sum_{i>j} a^i / i!  (a >= 0)."""
    return math.exp(a - math.lgamma(j + 2.0) + (j + 1.0) * math.log(a)) if a > 0 else 0.0


def als_beta_tail(z: complex, N: int, beta: float, tol: float = 1e-17):
    """sum_{n>N} [log(1 - z/sqrt(2n+4beta)) - log(1 - z/sqrt(2n))].

    (2n + 4 beta)^{-k/2} = (2n)^{-k/2} sum_j binom(-k/2, j) (2 beta/n)^j.
    """
    z = complex(z)
    q = N + 1.0
    x = 2.0 * abs(beta) / q
    rho = abs(z) / math.sqrt(2.0 * q)
    if x >= 0.5 or rho >= 0.5:
        raise ValueError("beta tail needs N large compared with |z|^2 and |beta|")
    rho_eff = rho / math.sqrt(1.0 - x)
    if rho_eff >= 0.75:
        raise ValueError("beta tail needs a larger cutoff")
    fac = 1.0 + 2.0 * q  # zeta(a, q) <= q^-a (1 + q/(a-1)) with a >= 3/2
    total = 0j
    bound = 0.0
    k = 1
    while True:
        a = k / 2.0
        coef = z ** k / k * 2.0 ** (-a)
        inner = 0j
        c = 1.0
        j = 1
        while True:
            c *= -(a + j - 1.0) / j
            inner += c * (2.0 * beta) ** j * zeta(a + j, q)
            # remaining binomial terms decay at least geometrically
            r = x * max(1.0, (a + j + 1.0) / (j + 2.0))
            nxt = abs(c) * (a + j) / (j + 1.0) * x ** (j + 1)
            rest = nxt / (1.0 - r) if r < 1.0 else math.inf
            if fac * rho ** k * rest < tol * 1e-2 or j > 400:
                break
            j += 1
        total -= coef * inner
        bound += fac * rho ** k * rest / k
        rem = fac * rho_eff ** (k + 1) / (1.0 - rho_eff)
        if rem < tol or k > 400:
            return total, bound + rem
        k += 1


def _rotation_tail(z: complex, q: float, s: float, base_pow: float, scale: float,
                   branch_weight, tol: float):
    """-sum_k sum_j (z^k/k) scale^k w_k ((-i k pi)^j / j!) zeta(base_pow*k + j*s, q).

    Expansion of sum_{n>=q} [log(1 - z/(a_n e^{i theta_n})) - log(1 - z/a_n)]
    with a_n = n^base_pow / scale and theta_n = pi / n^s.
    """
    z = complex(z)
    y = q ** (-s)
    rho = abs(z) * scale * q ** (-base_pow)
    grow = rho * math.exp(math.pi * y)
    if grow >= 0.5:
        raise ValueError("rotation tail needs a larger cutoff")
    amin = base_pow + s
    if amin <= 1.0:
        raise ValueError("rotation tail diverges for this exponent")
    fac = 1.0 + q / (amin - 1.0)
    total = 0j
    bound = 0.0
    k = 1
    while True:
        w = branch_weight(k)
        if w != 0:
            coef = z ** k / k * scale ** k * w
            inner = 0j
            pref = 1.0 + 0j
            j = 1
            while True:
                pref *= -1j * k * math.pi / j
                inner += pref * zeta(base_pow * k + j * s, q)
                rest = _exp_remainder(k * math.pi * y, j)
                if fac * rho ** k * abs(w) * rest < tol * 1e-2 or j > 300:
                    break
                j += 1
            total -= coef * inner
            bound += fac * rho ** k * abs(w) * rest / k
        rem = 2.0 * fac * grow ** (k + 1) / (1.0 - grow)
        if rem < tol or k > 400:
            return total, bound + rem
        k += 1


def als_rotation_tail(z: complex, N: int, s: float, symmetric: bool = False, tol: float = 1e-17):
    """sum_{n>N} [log(1 - z/(sqrt(2n) e^{i pi/n^s})) - log(1 - z/sqrt(2n))] (and the mirrored branch)."""
    if symmetric:
        weight = lambda k: 1.0 + (-1.0) ** k  # noqa: E731
    else:
        weight = lambda k: 1.0  # noqa: E731
    return _rotation_tail(z, N + 1.0, s, 0.5, 2.0 ** -0.5, weight, tol)


def phi_tail(z: complex, N: int, s: float, tol: float = 1e-17):
    """sum_{n>N} log[(1 - z/(n e^{i pi/n^s})) / (1 - z/n)]."""
    return _rotation_tail(z, N + 1.0, s, 1.0, 1.0, lambda k: 1.0, tol)


def row1_rotation_tail(z: complex, M: int, s: float, tol: float = 1e-17):
    """sum_{m>M} [log(1 - z/((m+i) e^{i pi/m^s})) - log(1 - z/(m+i))].

    Uses (m+i)^{-k} = sum_l binom(-k, l) i^l m^{-k-l}.
    """
    z = complex(z)
    q = M + 1.0
    y = q ** (-s)
    base = abs(z) / q / (1.0 - 1.0 / q)
    grow = base * math.exp(math.pi * y)
    if grow >= 0.5:
        raise ValueError("row rotation tail needs a larger cutoff")
    fac = 1.0 + q / s
    total = 0j
    bound = 0.0
    k = 1
    while True:
        coef = z ** k / k
        # binomial coefficients binom(-k, l) i^l, truncated where the majorant is negligible
        cl = [1.0 + 0j]
        mags = [1.0]
        while True:
            l_ = len(cl)
            nxt = mags[-1] * (k + l_ - 1.0) / l_ / q
            if nxt * (1.0 - 1.0 / q) ** -k < tol * 1e-3 or l_ > 400:
                break
            cl.append(cl[-1] * (-(k + l_ - 1.0) / l_) * 1j)
            mags.append(nxt)
        lrest = max((1.0 - 1.0 / q) ** (-k) - sum(mags), 0.0)
        lrest = max(lrest, mags[-1] * (k + len(mags) - 1.0) / len(mags) / q / (1.0 - 1.0 / q) ** (k + 1))
        inner = 0j
        pref = 1.0 + 0j
        j = 1
        while True:
            pref *= -1j * k * math.pi / j
            for l_, c in enumerate(cl):
                inner += pref * c * zeta(k + l_ + j * s, q)
            rest = _exp_remainder(k * math.pi * y, j)
            if fac * (abs(z) / q) ** k * rest * (1 - 1 / q) ** -k < tol * 1e-2 or j > 300:
                break
            j += 1
        total -= coef * inner
        bound += fac * (abs(z) / q) ** k * (rest * (1 - 1 / q) ** -k
                                            + math.expm1(k * math.pi * y) * lrest) / k
        rem = 2.0 * fac * grow ** (k + 1) / (1.0 - grow)
        if rem < tol or k > 400:
            return total, bound + rem
        k += 1


def radial_tail_1d(z: complex, q: float, beta: float, tol: float = 1e-17):
    """sum_{m>=0} f(m + q), f(x) = log(1 - z e^{-beta/x^2}/x) - log(1 - z/x), q >= 2|z|."""
    z = complex(z)
    rho = abs(z) / q
    x = abs(beta) / q ** 2
    grow = rho * math.exp(x)
    if grow >= 0.5:
        raise ValueError("radial 1d tail needs q >= 2|z|")
    fac = 1.0 + q  # zeta(a, q) <= q^-a (1 + q/(a-1)), a >= 3
    total = 0j
    bound = 0.0
    k = 1
    while True:
        coef = z ** k / k
        inner = 0j
        pref = 1.0
        j = 1
        while True:
            pref *= -k * beta / j
            inner += pref * zeta(k + 2.0 * j, q)
            rest = _exp_remainder(k * x, j)
            if fac * rho ** k * rest < tol * 1e-2 or j > 300:
                break
            j += 1
        total -= coef * inner
        bound += fac * rho ** k * rest / k
        rem = 2.0 * fac * grow ** (k + 1) / (1.0 - grow)
        if rem < tol or k > 400:
            return total, bound + rem
        k += 1
