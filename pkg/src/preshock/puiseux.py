"""Fractional-series inversion of the degenerate flow map.

Computes the coefficient sequence c^n_m of the series ybar_n inverting
-x + y^(2n+1) + y^(2n+2) = 0, estimates its radius of convergence and the
circle maximum used in truncation certificates, and inverts the two-term
model y = a_hi x^(2n+1) + a_lo x^(2n+2) with a certified error bound.

Coefficients are computed in exact rational arithmetic (the recursion is
cancellation-prone) and cached per (n, M).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import OutsideConvergenceBall


@lru_cache(maxsize=None)
def _coefficients_exact(n: int, M: int) -> tuple[Fraction, ...]:
    """c^n_0..c^n_M by the defining recursion, via convolution powers.

    c_m = [prefix^(2n+2)]_{m-1} - [prefix^(2n+1)]_m / (2n+1), where prefix
    is the polynomial with the already-known coefficients c_0..c_{m-1}; the
    index restriction j_i <= m-1 in the second sum is exactly the use of
    the prefix polynomial.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    c: list[Fraction] = [Fraction(1)]
    p_hi = 2 * n + 2
    for m in range(1, M + 1):
        prefix = c  # length m: degrees 0..m-1
        # powers of the prefix polynomial, truncated at degree m
        conv = list(prefix)
        a_coeff = None
        for p in range(2, p_hi + 1):
            conv = _poly_mul_trunc(conv, prefix, m)
            if p == p_hi - 1:
                a_coeff = conv[m] if len(conv) > m else Fraction(0)
        first = conv[m - 1] if len(conv) > m - 1 else Fraction(0)
        second = a_coeff if a_coeff is not None else Fraction(0)
        c.append(first - second / (2 * n + 1))
    return tuple(c)


def _poly_mul_trunc(a: list[Fraction], b: list[Fraction], deg: int) -> list[Fraction]:
    out = [Fraction(0)] * (min(len(a) + len(b) - 1, deg + 1))
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        jmax = min(len(b), len(out) - i)
        for j in range(jmax):
            out[i + j] += ai * b[j]
    return out


def coefficients(n: int, M: int) -> list[float]:
    """c^n_0..c^n_M as floats (exact rationals internally)."""
    if M > 64:
        raise ValueError("coefficient table capped at M = 64")
    return [float(v) for v in _coefficients_exact(n, M)]


def coefficients_exact(n: int, M: int) -> list[Fraction]:
    if M > 64:
        raise ValueError("coefficient table capped at M = 64")
    return list(_coefficients_exact(n, M))


def ybar(n: int, z, M: int = 48):
    """Truncated ybar_n(z) = sum_j (-1)^j c_j z^j / (2n+1)^j."""
    c = coefficients(n, M)
    z = np.asarray(z)
    acc = np.zeros_like(z, dtype=complex if np.iscomplexobj(z) else float)
    for j in range(M, -1, -1):
        acc = acc * (-z / (2 * n + 1)) + c[j]
    return acc


@dataclass(frozen=True)
class RadiusEstimate:
    R_n_est: float
    M_n_est: float
    settled: bool


def radius_and_M(n: int, M: int = 48) -> RadiusEstimate:
    """Estimate the convergence radius R_n and circle maximum M_n.

    R_n comes from the root test on the computed coefficients (geometric
    mean of |c_j|^(1/j) over the last quarter of the table); M_n evaluates
    the truncated ybar_n on 64 points of |z| = 3R/4 and inflates by a
    geometric tail bound.  An unsettled root test (spread above 20%) emits
    a RadiusUnsettled warning and returns conservative values.
    """
    if M < 32:
        raise ValueError("radius estimation needs M >= 32")
    c = np.abs(np.array(coefficients(n, M), dtype=float))
    js = np.arange(M // 4 * 3, M + 1)
    roots = c[js] ** (1.0 / js)
    gm = float(np.exp(np.mean(np.log(roots))))
    R = (2 * n + 1) / gm
    spread = float(roots.max() / roots.min()) - 1.0
    settled = spread <= 0.20
    if not settled:
        warnings.warn(f"RadiusUnsettled: root test spread {spread:.2%} for n={n}",
                      stacklevel=2)
        R = (2 * n + 1) / float(roots.max())  # conservative: smaller radius
    theta = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    zs = 0.75 * R * np.exp(1j * theta)
    vals = np.abs(ybar(n, zs, M))
    # |c_j (3R/4 / (2n+1))^j| ~ (3/4)^j for j large: geometric tail
    tail_last = c[M] * (0.75 * R / (2 * n + 1)) ** M
    tail = 3.0 * tail_last  # sum of (3/4)^k beyond the truncation
    Mn = float(vals.max() + tail)
    if not settled:
        Mn *= 2.0
    return RadiusEstimate(R_n_est=R, M_n_est=Mn, settled=settled)


@dataclass(frozen=True)
class PuiseuxSeries:
    """Coefficient table with radius/maximum estimates for one n."""

    n: int
    coeffs: tuple[float, ...]
    R_n_est: float
    M_n_est: float
    settled: bool

    @classmethod
    def build(cls, n: int, M: int = 48) -> "PuiseuxSeries":
        est = radius_and_M(n, M)
        return cls(n=n, coeffs=tuple(coefficients(n, M)),
                   R_n_est=est.R_n_est, M_n_est=est.M_n_est, settled=est.settled)


@lru_cache(maxsize=None)
def series(n: int, M: int = 48) -> PuiseuxSeries:
    return PuiseuxSeries.build(n, M)


def invert(a_hi: float, a_lo: float, y_shift, N_terms: int = 8,
           n: int = 1, table: PuiseuxSeries | None = None):
    """Invert y_shift = a_hi dx^(2n+1) + a_lo dx^(2n+2) for dx.

    Returns (dx, certified_bound).  Negative y_shift is handled by the odd
    root convention.  Outside the certified domain
    |a_lo|^(2n+1) |y| < a_hi^(2n+2) (R/2)^(2n+1) raises
    OutsideConvergenceBall.
    """
    if a_hi <= 0.0:
        raise ValueError("a_hi must be positive")
    t = table if table is not None else series(n)
    if N_terms > len(t.coeffs) - 1:
        raise ValueError("N_terms exceeds the coefficient table")
    p = 2 * n + 1
    R = t.R_n_est
    y = np.asarray(y_shift, dtype=float)
    dom_ok = np.abs(a_lo) ** p * np.abs(y) < a_hi ** (p + 1) * (R / 2.0) ** p
    if not np.all(dom_ok):
        raise OutsideConvergenceBall(
            "y_shift outside the certified inversion domain")
    xi = np.sign(y) * np.abs(y / a_hi) ** (1.0 / p)
    ratio = -a_lo / (p * a_hi)
    acc = np.zeros_like(xi)
    for j in range(N_terms, -1, -1):
        acc = acc * (ratio * xi) + t.coeffs[j]
    val = xi * acc
    bound = (3.0 * t.M_n_est
             * np.abs(4.0 * a_lo / (3.0 * a_hi * R)) ** (N_terms + 1)
             * np.abs(y / a_hi) ** ((N_terms + 2) / p))
    if val.shape:
        return val, bound
    return float(val), float(bound)


def export_coefficients(path, n_values=(1, 2, 3, 4), M: int = 48) -> None:
    """Write the (n, m, c_m) table as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "m", "c_m"])
        for n in n_values:
            for m, cm in enumerate(coefficients(n, M)):
                writer.writerow([n, m, repr(cm)])
