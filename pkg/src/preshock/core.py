"""Shared parameter, grid, and field types plus periodic numerical utilities.

The spatial domain is always the unit torus identified with [-1/2, 1/2);
grids are uniform with N a power of two, and the default differentiation
method is spectral (fields handled here stay smooth in the characteristic
coordinates, so spectral accuracy is the right default).  Everything in
this module is a pure function of immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteField, InversionFailed


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Params:
    """Physical and structural constants governing a run.

    alpha is the rescaled adiabatic exponent (gamma - 1)/2; exactly one of
    gamma/alpha is stored and the other derived, so the identity
    alpha = (gamma - 1)/2 holds to the last bit.
    """

    gamma: float
    n: int
    epsilon: float
    C0: float = 16.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError("n must be a positive integer")
        if not (0.0 <= self.epsilon < 0.25):
            raise ValueError("epsilon must lie in [0, 1/4)")
        if self.C0 < 3.0:
            raise ValueError("C0 must be at least 3")

    @property
    def alpha(self) -> float:
        return (self.gamma - 1.0) / 2.0

    @classmethod
    def from_alpha(cls, alpha: float, n: int, epsilon: float, C0: float = 16.0) -> "Params":
        return cls(gamma=2.0 * alpha + 1.0, n=n, epsilon=epsilon, C0=C0)

    @property
    def burgers_time(self) -> float:
        """Reference blowup time 2/(1+alpha) of the unperturbed profile."""
        return 2.0 / (1.0 + self.alpha)


# ---------------------------------------------------------------------------
# grid and fields


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the torus [-1/2, 1/2), N a power of two."""

    N: int

    def __post_init__(self):
        if self.N < 8 or (self.N & (self.N - 1)) != 0:
            raise ValueError("N must be a power of two, at least 8")

    @property
    def dx(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return -0.5 + np.arange(self.N) / self.N

    def wavenumbers(self) -> np.ndarray:
        """2*pi*i*k multipliers for the rfft layout."""
        return 2j * np.pi * np.fft.rfftfreq(self.N, d=self.dx)


def _frozen(values: np.ndarray) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Field:
    """Real samples on a grid; immutable after construction."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.grid.N,):
            raise ValueError("field length must equal grid size")

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, fn(grid.nodes))

    def require_finite(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteField("field contains non-finite samples")


# ---------------------------------------------------------------------------
# differentiation

_FD4_FIRST = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD4_SECOND = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


_NOISE_FLOOR = 16.0 * np.finfo(float).eps


def _truncate_noise(fk: np.ndarray) -> np.ndarray:
    """Zero coefficients below the relative rounding floor.

    Derivatives of order m amplify coefficient noise by (2 pi k)^m, so the
    modes that carry only rounding error must not participate; for smooth
    fields the dropped modes are below 16 eps of the leading coefficient.
    """
    mag = np.abs(fk)
    floor = _NOISE_FLOOR * np.max(mag, axis=-1, keepdims=True)
    return np.where(mag >= floor, fk, 0.0)


def _spectral_derivative(values: np.ndarray, order: int, dx: float) -> np.ndarray:
    n = values.shape[-1]
    fk = _truncate_noise(np.fft.rfft(values, axis=-1))
    ik = 2j * np.pi * np.fft.rfftfreq(n, d=dx)
    mult = ik**order
    if order % 2 == 1:
        # Nyquist mode has no well-defined odd derivative on a real grid
        mult[-1] = 0.0
    return np.fft.irfft(fk * mult, n=n, axis=-1)


def _fd_derivative(values: np.ndarray, order: int, dx: float) -> np.ndarray:
    out = values
    rem = order
    while rem >= 2:
        acc = np.zeros_like(out)
        for shift, c in zip(range(-2, 3), _FD4_SECOND):
            acc += c * np.roll(out, -shift)
        out = acc / dx**2
        rem -= 2
    if rem == 1:
        acc = np.zeros_like(out)
        for shift, c in zip(range(-2, 3), _FD4_FIRST):
            acc += c * np.roll(out, -shift)
        out = acc / dx
    return out


def periodic_derivative(f: Field, order: int = 1, method: str = "spectral") -> Field:
    """Discrete d^order/dx^order of a periodic field.

    method="spectral" differentiates through the periodic transform;
    method="central_fd" uses fourth-order centered stencils (second
    derivatives chained, one first-derivative pass for odd orders).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    f.require_finite()
    if method == "spectral":
        vals = _spectral_derivative(f.values, order, f.grid.dx)
    elif method == "central_fd":
        vals = _fd_derivative(f.values, order, f.grid.dx)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Field(f.grid, vals)


def periodic_mean(f: Field) -> float:
    """Rectangle-rule mean; spectrally accurate on the torus."""
    f.require_finite()
    return float(np.mean(f.values))


# ---------------------------------------------------------------------------
# minima


def min_with_location(f: Field) -> tuple[float, float]:
    """Global minimum over nodes and a parabola-refined sub-grid location.

    Ties break to the smallest node index.  The returned value is the node
    minimum; the location is refined by a 3-point parabola through the
    minimizing node and its periodic neighbours.
    """
    f.require_finite()
    v = f.values
    j = int(np.argmin(v))
    x = f.grid.nodes
    fm, f0, fp = v[j - 1], v[j], v[(j + 1) % f.grid.N]
    denom = fm - 2.0 * f0 + fp
    offset = 0.0
    if denom > 0.0:
        offset = 0.5 * (fm - fp) / denom
        offset = float(np.clip(offset, -0.5, 0.5))
    loc = x[j] + offset * f.grid.dx
    loc = (loc + 0.5) % 1.0 - 0.5
    return float(f0), float(loc)


# ---------------------------------------------------------------------------
# trigonometric interpolation off the grid


class FourierEval:
    """Evaluate a gridded periodic field and its x-derivatives anywhere.

    Wraps the rfft coefficients of the samples; evaluation sums the
    interpolating trigonometric polynomial directly, consistent with the
    spectral differentiation used on the grid.
    """

    def __init__(self, values: np.ndarray, denoise: bool = True):
        values = np.asarray(values, dtype=float)
        self.N = values.shape[0]
        coeff = np.fft.rfft(values) / self.N
        if denoise:
            coeff = _truncate_noise(coeff)
        # grid starts at x = -1/2: shift so coefficients refer to exp(2*pi*i*k*x)
        k = np.arange(coeff.shape[0])
        coeff = coeff * np.exp(1j * np.pi * k)
        if self.N % 2 == 0:
            coeff[-1] *= 0.5  # Nyquist mode appears once in the rfft layout
        self.coeff = coeff
        self.ik = 2j * np.pi * k

    def deriv(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        mult = self.ik**order if order else np.ones_like(self.ik)
        c = self.coeff * mult
        if order % 2 == 1:
            c = c.copy()
            c[-1] = 0.0
        phase = np.exp(np.multiply.outer(x, self.ik))
        total = phase @ c + np.conj(phase[..., 1:] @ c[1:])
        return total.real if x.shape else float(total.real)

    def __call__(self, x):
        return self.deriv(x, 0)


def spectral_antiderivative(values: np.ndarray, dx: float) -> np.ndarray:
    """Periodic antiderivative of a zero-mean sampled field (mean set to 0)."""
    n = values.shape[0]
    fk = np.fft.rfft(values)
    ik = 2j * np.pi * np.fft.rfftfreq(n, d=dx)
    out = np.zeros_like(fk)
    out[1:] = fk[1:] / ik[1:]
    return np.fft.irfft(out, n=n)


# ---------------------------------------------------------------------------
# root bracketing

def bracketed_root(fn, lo: float, hi: float, flo: float | None = None,
                   fhi: float | None = None, tol: float = 1e-13,
                   max_iter: int = 200) -> float:
    """Root of fn on [lo, hi] by bisection-safeguarded secant.

    Requires a sign change on the bracket.  The secant step is accepted only
    while it stays inside the current bracket; otherwise the step is a
    bisection, so convergence is guaranteed.
    """
    a, b = float(lo), float(hi)
    fa = fn(a) if flo is None else flo
    fb = fn(b) if fhi is None else fhi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise InversionFailed(f"no sign change on bracket [{a}, {b}]")
    for it in range(max_iter):
        width = abs(b - a)
        if width < tol:
            return 0.5 * (a + b)
        use_secant = (it % 2 == 0) and fb != fa
        if use_secant:
            c = b - fb * (b - a) / (fb - fa)
            # keep the iterate well inside the bracket or fall back to bisection
            pad = 0.01 * width
            if not (min(a, b) + pad < c < max(a, b) - pad):
                c = 0.5 * (a + b)
        else:
            c = 0.5 * (a + b)
        fc = fn(c)
        if fc == 0.0:
            return c
        if fa * fc < 0.0:
            b, fb = c, fc
        else:
            a, fa = c, fc
    return 0.5 * (a + b)
