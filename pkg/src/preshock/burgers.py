"""Exact inviscid-Burgers reference solutions via characteristics.

This is the analytic oracle for the Euler solver's isentropic u = sigma
reduction: w_t + c w w_y = 0 solved by freezing w along straight
characteristics eta(x, t) = x + c t w0(x).  The prototypical profile
w0(x) = -x + x^(2n+1)/(2n+1) is treated on the real line near 0, where its
cusp at blowup has the closed form used throughout the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import bracketed_root
from .errors import NoBlowup, PastBlowup, InversionFailed


@dataclass(frozen=True)
class BurgersProblem:
    """Initial profile with derivative, wave-speed factor, and search domain.

    domain is the x-interval scanned for minima and characteristic roots;
    periodic=True declares a torus profile (the flow map then lifts to a
    monotone map commuting with integer shifts).
    """

    w0: Callable[[np.ndarray], np.ndarray]
    w0_prime: Callable[[np.ndarray], np.ndarray]
    c: float = 1.0
    domain: tuple[float, float] = (-2.0, 2.0)
    periodic: bool = False
    scan_resolution: float = field(default=1.0 / (8 * 4096))


def prototype_problem(n: int, c: float = 1.0) -> BurgersProblem:
    """The order-2n flat profile w0 = -x + x^(2n+1)/(2n+1) on the line."""
    p = 2 * n + 1

    def w0(x):
        x = np.asarray(x, dtype=float)
        return -x + x**p / p

    def w0p(x):
        x = np.asarray(x, dtype=float)
        return -1.0 + x ** (p - 1)

    return BurgersProblem(w0=w0, w0_prime=w0p, c=c)


def characteristic(x, t: float, problem: BurgersProblem):
    """Straight-line flow map y = x + c t w0(x)."""
    x = np.asarray(x, dtype=float)
    y = x + problem.c * t * problem.w0(x)
    return y if y.shape else float(y)


def blowup_time(problem: BurgersProblem) -> float:
    """T* = -1/(c inf w0'), the first time the flow map degenerates.

    The infimum is located by dense sampling of w0' over the domain followed
    by a parabolic refinement around the best sample; the result is cached
    per problem.
    """
    return _blowup_time_cached(problem)


@lru_cache(maxsize=64)
def _blowup_time_cached(problem: BurgersProblem) -> float:
    lo, hi = problem.domain
    m = max(64, int(np.ceil((hi - lo) / problem.scan_resolution)))
    xs = np.linspace(lo, hi, m + 1)
    vals = problem.w0_prime(xs)
    j = int(np.argmin(vals))
    xbest, vbest = xs[j], vals[j]
    if 0 < j < m:
        fm, f0, fp = vals[j - 1], vals[j], vals[j + 1]
        denom = fm - 2.0 * f0 + fp
        if denom > 0:
            h = xs[1] - xs[0]
            off = 0.5 * (fm - fp) / denom
            xr = xbest + np.clip(off, -1, 1) * h
            vr = float(problem.w0_prime(np.array([xr]))[0])
            if vr < vbest:
                xbest, vbest = xr, vr
    if vbest >= 0.0:
        raise NoBlowup("w0' has no negative infimum; characteristics never cross")
    return -1.0 / (problem.c * vbest)


def evaluate(y: float, t: float, problem: BurgersProblem,
             exclusion_radius: float = 0.0, tol: float = 1e-13) -> float:
    """w(y, t) obtained by inverting the characteristic map.

    Pre-blowup the map x -> x + c t w0(x) is strictly increasing, so a
    sign-change scan at the configured resolution yields a single bracket
    which is polished by bisection-safeguarded secant.
    """
    tstar = blowup_time(problem)
    if t > tstar * (1.0 + 1e-12):
        raise PastBlowup(f"t={t} exceeds the blowup time {tstar}")
    lo, hi = problem.domain
    if problem.periodic:
        # lift the torus map: eta(x + period) = eta(x) + period
        span = characteristic(hi, t, problem) - characteristic(lo, t, problem)
        y = y - np.floor((y - characteristic(lo, t, problem)) / span) * span

    def fn(x):
        return x + problem.c * t * problem.w0(np.asarray(x, dtype=float)) - y

    if abs(t - tstar) <= 1e-12 * tstar and exclusion_radius > 0.0:
        ystar = characteristic(_argmin_x(problem), tstar, problem)
        if abs(y - ystar) <= exclusion_radius:
            raise InversionFailed("y inside the exclusion radius at the blowup time")

    # two-stage sign-change scan: coarse pass, then the target resolution
    # inside the located cell
    span = hi - lo
    target = max(64, int(np.ceil(span / problem.scan_resolution)))
    a, b = lo, hi
    m = min(target, 4096)
    while True:
        xs = np.linspace(a, b, m + 1)
        fs = xs + problem.c * t * problem.w0(xs) - y
        sign = np.signbit(fs)
        hits = np.nonzero(sign[:-1] != sign[1:])[0]
        if hits.size == 0:
            exact = np.nonzero(fs == 0.0)[0]
            if exact.size:
                return float(np.asarray(problem.w0(xs[exact[0]])).reshape(()))
            raise InversionFailed(
                "no sign change of the characteristic equation in the domain")
        j = int(hits[0])
        cell = (b - a) / m
        if cell <= problem.scan_resolution or m >= target:
            break
        a, b = xs[j], xs[j + 1]
        m = min(max(64, int(np.ceil((b - a) / problem.scan_resolution))), 4096)
    root = bracketed_root(fn, xs[j], xs[j + 1], fs[j], fs[j + 1], tol=tol)
    return float(np.asarray(problem.w0(np.asarray(root))).reshape(()))


@lru_cache(maxsize=64)
def _argmin_x(problem: BurgersProblem) -> float:
    lo, hi = problem.domain
    m = max(64, int(np.ceil((hi - lo) / problem.scan_resolution)))
    xs = np.linspace(lo, hi, m + 1)
    return float(xs[int(np.argmin(problem.w0_prime(xs)))])


def exact_cusp(n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form pre-shock profile of the prototypical data at T* = 1:
    w(y, 1) = -(2n+1)^(1/(2n+1)) y^(1/(2n+1)) + y, odd-root convention."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = 2 * n + 1
    amp = p ** (1.0 / p)

    def cusp(y):
        y = np.asarray(y, dtype=float)
        out = -amp * np.sign(y) * np.abs(y) ** (1.0 / p) + y
        return out if out.shape else float(out)

    return cusp
