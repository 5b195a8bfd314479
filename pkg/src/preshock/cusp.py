"""Eulerian reconstruction at the blowup time and cusp measurement.

The solver stops strictly before the singular time; the profile at T* is
reached by a guarded Taylor advance of the pointwise transport laws over
the remaining sliver (the quotient fields are frozen there, which costs
O(epsilon * sliver^2) and avoids the division by the vanishing eta_x).
The dominant Riemann variable is then sampled as (y, w) pairs, fitted over
the fractional basis {1, s, s^2} with s = sign(y-y*)|y-y*|^(1/(2n+1)), and
cross-checked against the model-based inversion of the flow map.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .core import FourierEval
from .errors import FitDegenerate, InconsistentTimes
from .puiseux import invert as puiseux_invert, series as puiseux_series
from .singularity import BlowupReport, LocalModel
from .solver import LagrangianState


@dataclass(frozen=True)
class EulerianProfile:
    """Nonuniform (y, w, z, k) samples at the blowup time."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    z: np.ndarray
    k: np.ndarray
    dy_z: np.ndarray   # d_y z o eta (finite at the pre-shock)
    dy_k: np.ndarray
    y_star: float
    x_star: float
    T_star: float
    n: int
    C0: float
    dx: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["y", "w", "z", "k"])
            for row in zip(self.y, self.w, self.z, self.k):
                writer.writerow([repr(float(v)) for v in row])


def eulerian_profile(state: LagrangianState, report: BlowupReport,
                     dt_min: float = 1e-12) -> EulerianProfile:
    """Advance the pointwise fields over the final sliver and change variables.

    The sliver advance freezes Zring and Kring (their transport law divides
    by eta_x, which vanishes at the pre-shock); every other field obeys a
    pointwise ODE whose coefficients drift at O(epsilon), so a first-order
    Taylor step is accurate to O(epsilon * sliver^2).
    """
    p = state.params
    sliver = report.T_star - state.t
    if sliver < -1e-9:
        raise InconsistentTimes(
            f"T* = {report.T_star} precedes the snapshot time {state.t}")
    sliver = max(sliver, 0.0)
    a = p.alpha
    c1, c2 = 0.5 * (1 + a), 0.5 * (1 - a)
    g2 = 0.5 / p.gamma
    S, Z, K = state.Sigma, state.Zring, state.Kring
    if sliver < dt_min:
        sliver = 0.0
    eta_t = c1 * state.Wcomp + c2 * state.Zcomp
    w_t = (a / p.gamma) * 0.5 * S * S * K
    y = state.eta + sliver * eta_t
    w = state.Wcomp + sliver * w_t
    z = state.Zcomp + sliver * (2 * a * S * Z - w_t)
    k = state.Kcomp + sliver * (a * S * K)
    y_star = float(FourierEval(y - state.grid.nodes)(np.array(report.x_star))
                   + report.x_star)
    dy_z = Z - g2 * S * K
    dy_k = K
    return EulerianProfile(x=state.grid.nodes, y=y, w=w, z=z, k=k,
                           dy_z=dy_z, dy_k=dy_k, y_star=y_star,
                           x_star=report.x_star, T_star=report.T_star,
                           n=p.n, C0=p.C0, dx=state.grid.dx)


def theorem_window(n: int, C0: float) -> float:
    """Outer radius of the validated cusp expansion."""
    return 1.0 / ((2 * n + 2) * (2 * n + 1) * 2 ** (2 * n + 2) * C0 ** (2 * n + 1))


def default_window(profile: EulerianProfile) -> tuple[float, float]:
    """(delta_in, delta_out) for fitting.

    delta_out is the theorem window; delta_in excludes the few nodes around
    the pre-shock (where the finite stop threshold and interpolation smear
    the gradient) and the subtractive rounding floor of y - y*.
    """
    d_out = theorem_window(profile.n, profile.C0)
    dy = np.abs(profile.y - profile.y_star)
    near = np.abs(profile.x - profile.x_star) <= 2.1 * profile.dx
    smear = float(np.max(dy[near])) if np.any(near) else 0.0
    noise_floor = 2e-12 * (1.0 + abs(profile.y_star))
    return max(4.0 * smear, noise_floor), d_out


@dataclass(frozen=True)
class CuspFit:
    b0: float
    b1: float
    b2: float
    holder_exponent_fit: float
    delta_in: float
    delta_out: float
    residual: float
    n_samples: int
    one_sided: dict

    def to_json(self) -> str:
        doc = {"b0": self.b0, "b1": self.b1, "b2": self.b2,
               "exponent": self.holder_exponent_fit,
               "window": [self.delta_in, self.delta_out],
               "residual": self.residual, "n_samples": self.n_samples,
               "one_sided": self.one_sided}
        return json.dumps(doc, sort_keys=True)


def _window_mask(profile: EulerianProfile, window):
    d_in, d_out = window
    dy = profile.y - profile.y_star
    return (np.abs(dy) >= d_in) & (np.abs(dy) <= d_out), dy


def fit_cusp(profile: EulerianProfile, n: int | None = None,
             window: tuple[float, float] | None = None,
             min_side: int = 50) -> CuspFit:
    """Weighted least squares of w over {1, s, s^2}.

    The s^2 term absorbs the next order of the fractional expansion, so b1
    is unbiased through the first correction; the plain linear y term of
    the profile folds into the residual, which the window keeps small.
    """
    n = profile.n if n is None else n
    if window is None:
        window = default_window(profile)
    mask, dy = _window_mask(profile, window)
    pos = int(np.sum(mask & (dy > 0)))
    neg = int(np.sum(mask & (dy < 0)))
    if pos < min_side or neg < min_side:
        raise FitDegenerate(
            f"window holds {neg}/{pos} samples (need {min_side} per side)")
    s = np.sign(dy[mask]) * np.abs(dy[mask]) ** (1.0 / (2 * n + 1))
    wv = profile.w[mask]
    A = np.stack([np.ones_like(s), s, s * s], axis=1)
    coeff, *_ = np.linalg.lstsq(A, wv, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coeff - wv) ** 2)))

    one_sided = {}
    for name, side in (("left", dy[mask] < 0), ("right", dy[mask] > 0)):
        As, ws = A[side], wv[side]
        cs, *_ = np.linalg.lstsq(As, ws, rcond=None)
        one_sided[name] = {"b0": float(cs[0]), "b1": float(cs[1])}

    expo = holder_exponent(profile, n, window=window, b0=float(coeff[0]))
    return CuspFit(b0=float(coeff[0]), b1=float(coeff[1]), b2=float(coeff[2]),
                   holder_exponent_fit=expo, delta_in=window[0],
                   delta_out=window[1], residual=resid,
                   n_samples=pos + neg, one_sided=one_sided)


def holder_exponent(profile: EulerianProfile, n: int | None = None,
                    window: tuple[float, float] | None = None,
                    b0: float | None = None) -> float:
    """Slope of log|w - b0| against log|y - y*| over dyadic shells.

    Robust (median of inter-shell slopes) so isolated noisy shells near the
    subtraction floor cannot steer the estimate.
    """
    n = profile.n if n is None else n
    if window is None:
        window = default_window(profile)
    if b0 is None:
        # centre from the samples nearest y* on both sides
        mask, dy = _window_mask(profile, window)
        if not np.any(mask):
            raise FitDegenerate("empty window")
        j = np.argmin(np.abs(dy) + np.where(mask, 0.0, np.inf))
        b0 = float(profile.w[j])
    mask, dy = _window_mask(profile, window)
    ady = np.abs(dy[mask])
    aw = np.abs(profile.w[mask] - b0)
    good = (ady > 0) & (aw > 0)
    ady, aw = ady[good], aw[good]
    if ady.size < 8:
        raise FitDegenerate("too few samples for the exponent fit")
    lo, hi = np.log2(window[0]), np.log2(window[1])
    nshell = max(4, int(hi - lo))
    edges = np.linspace(lo, hi, nshell + 1)
    idx = np.clip(np.digitize(np.log2(ady), edges) - 1, 0, nshell - 1)
    ly = np.log(ady)
    lw = np.log(aw)
    centers, means = [], []
    for sh in range(nshell):
        m = idx == sh
        if np.sum(m) >= 2:
            centers.append(np.mean(ly[m]))
            means.append(np.mean(lw[m]))
    if len(centers) < 3:
        raise FitDegenerate("too few populated shells for the exponent fit")
    centers = np.array(centers)
    means = np.array(means)
    slopes = np.diff(means) / np.diff(centers)
    return float(np.median(slopes))


def puiseux_reconstruct(report: BlowupReport, y_shift,
                        state: LagrangianState, N_terms: int = 8):
    """Model-based cusp prediction from the Taylor data (no fitting).

    Inverts y - y* = a_hi dx^(2n+1) + a_lo dx^(2n+2) with the certified
    series, then composes with the local Taylor model of w o eta at the
    pre-shock.  Returns (x_shift, w_predicted, certified_bound).
    """
    n = report.n
    table = puiseux_series(n)
    dxs, bound = puiseux_invert(report.a_hi, report.a_lo, y_shift,
                                N_terms=N_terms, n=n, table=table)
    # local Taylor model of the advanced w o eta around x*
    p = state.params
    sliver = max(report.T_star - state.t, 0.0)
    w_adv = state.Wcomp + sliver * (0.5 * p.alpha / p.gamma) \
        * state.Sigma * state.Sigma * state.Kring
    model = LocalModel(state.grid.nodes, w_adv, 0.75 / p.C0, 2 * n + 4)
    x0 = report.x_star
    w_pred = (model.deriv(x0 + dxs, 0))
    return dxs, w_pred, bound


def reconstructed_b1(report: BlowupReport, state: LagrangianState) -> float:
    """Leading cusp coefficient from the Taylor route:
    b1 = d_x(w o eta)(x*, T*) * a_hi^(-1/(2n+1))."""
    p = state.params
    n = report.n
    sliver = max(report.T_star - state.t, 0.0)
    w_adv = state.Wcomp + sliver * (0.5 * p.alpha / p.gamma) \
        * state.Sigma * state.Sigma * state.Kring
    model = LocalModel(state.grid.nodes, w_adv, 0.75 / p.C0, 2 * n + 4)
    B1 = model.deriv(report.x_star, 1)
    return float(B1 * report.a_hi ** (-1.0 / (2 * n + 1)))
