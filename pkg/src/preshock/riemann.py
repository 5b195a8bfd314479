"""Conversions between physical variables, Riemann variables, and their
entropy-corrected derivatives, plus the three wave speeds.

Conventions: w = u + sigma, z = u - sigma, k = S, with sigma the rescaled
sound speed.  Constant shifts of the entropy k are a symmetry of the system
and are never normalized away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, Params, periodic_derivative
from .errors import VacuumState


@dataclass(frozen=True)
class PhysicalState:
    u: Field
    sigma: Field
    S: Field

    def __post_init__(self):
        if np.any(self.sigma.values <= 0.0):
            raise VacuumState("sigma must be positive everywhere")


@dataclass(frozen=True)
class RiemannState:
    w: Field
    z: Field
    k: Field

    def __post_init__(self):
        if np.any(self.w.values - self.z.values <= 0.0):
            raise VacuumState("w - z must be positive everywhere")

    @property
    def sigma_values(self) -> np.ndarray:
        return 0.5 * (self.w.values - self.z.values)


@dataclass(frozen=True)
class DiffRiemannState:
    """Differentiated Riemann variables (wring, zring, kring).

    By construction wring + zring equals d/dy (w + z): the entropy
    corrections cancel.
    """

    wring: Field
    zring: Field
    kring: Field


def to_riemann(p: PhysicalState) -> RiemannState:
    g = p.u.grid
    return RiemannState(
        w=Field(g, p.u.values + p.sigma.values),
        z=Field(g, p.u.values - p.sigma.values),
        k=Field(g, p.S.values),
    )


def to_physical(r: RiemannState) -> PhysicalState:
    g = r.w.grid
    return PhysicalState(
        u=Field(g, 0.5 * (r.w.values + r.z.values)),
        sigma=Field(g, 0.5 * (r.w.values - r.z.values)),
        S=Field(g, r.k.values),
    )


def wave_speeds(w, z, alpha: float):
    """(lambda1, lambda2, lambda3): slow acoustic, material, fast acoustic."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    lam1 = 0.5 * (1.0 - alpha) * w + 0.5 * (1.0 + alpha) * z
    lam2 = 0.5 * (w + z)
    lam3 = 0.5 * (1.0 + alpha) * w + 0.5 * (1.0 - alpha) * z
    return lam1, lam2, lam3


def differentiate_riemann(r: RiemannState, params: Params,
                          method: str = "spectral") -> DiffRiemannState:
    """wring = w_y - sigma k_y / (2 gamma), zring = z_y + sigma k_y / (2 gamma),
    kring = k_y, with sigma = (w - z)/2."""
    g = r.w.grid
    sigma = r.sigma_values
    if np.any(sigma <= 0.0):
        raise VacuumState("w - z must be positive everywhere")
    wy = periodic_derivative(r.w, 1, method).values
    zy = periodic_derivative(r.z, 1, method).values
    ky = periodic_derivative(r.k, 1, method).values
    corr = sigma * ky / (2.0 * params.gamma)
    return DiffRiemannState(
        wring=Field(g, wy - corr),
        zring=Field(g, zy + corr),
        kring=Field(g, ky),
    )
