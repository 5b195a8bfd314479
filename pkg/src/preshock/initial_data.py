"""Construction and validation of admissible initial data.

Builds the base profile wbar0 (exact core 5/2 - x + x^(2n+1)/(2n+1), smooth
blend outside), the monomial perturbation basis wtilde^n_j, and assembled
triples (w0, z0, k0) with full membership validation against the open data
classes used by the solver and the manifold search.

Bump functions are the standard exp(-1/u)-based mollified plateaus; their
derivatives are evaluated exactly through truncated-Taylor (jet) recurrences
rather than finite differences, since the membership bounds are checked up
to order 2n+2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import Field, FourierEval, Grid, Params, spectral_antiderivative
from .errors import NoBasisNeeded, NotInAdmissibleSet, ProfileConstructionFailed

_QUAD_N = 1 << 15  # fixed quadrature grid so the blend amplitude is N-independent
_CORE_OUTER = 3.0  # chi(C0 x) transition occupies 1/C0 <= |x| <= 3/C0
_PSI_START = 1.1   # outer hump starts at 1.1/C0
# width fractions searched by build_wbar (fraction of the half-torus left of
# the hump start used for the rise)
_PSI_CANDIDATES = (0.72, 0.76, 0.80, 0.68, 0.62, 0.55, 0.50)


# ---------------------------------------------------------------------------
# truncated Taylor jets


class Jets:
    """Order-K truncated Taylor coefficients, vectorized over sample points.

    coeffs[k] is the k-th Taylor coefficient; the k-th derivative is
    k! * coeffs[k].
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: np.ndarray):
        self.coeffs = coeffs

    @classmethod
    def variable(cls, x: np.ndarray, K: int) -> "Jets":
        c = np.zeros((K + 1,) + np.shape(x))
        c[0] = x
        if K >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, K: int, shape) -> "Jets":
        c = np.zeros((K + 1,) + tuple(shape))
        c[0] = value
        return cls(c)

    @property
    def K(self) -> int:
        return self.coeffs.shape[0] - 1

    def __add__(self, other):
        if isinstance(other, Jets):
            return Jets(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += other
        return Jets(c)

    def __rmul__(self, scalar):
        return Jets(scalar * self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jets):
            return Jets(self.coeffs * other)
        K = self.K
        a, b = self.coeffs, other.coeffs
        out = np.zeros_like(a)
        for k in range(K + 1):
            for i in range(k + 1):
                out[k] += a[i] * b[k - i]
        return Jets(out)

    def __neg__(self):
        return Jets(-self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Jets):
            return Jets(self.coeffs - other.coeffs)
        c = self.coeffs.copy()
        c[0] -= other
        return Jets(c)

    def reciprocal(self) -> "Jets":
        a = self.coeffs
        out = np.zeros_like(a)
        out[0] = 1.0 / a[0]
        for k in range(1, self.K + 1):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc += a[j] * out[k - j]
            out[k] = -out[0] * acc
        return Jets(out)

    def exp(self) -> "Jets":
        a = self.coeffs
        out = np.zeros_like(a)
        out[0] = np.exp(a[0])
        for k in range(1, self.K + 1):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc += j * a[j] * out[k - j]
            out[k] = acc / k
        return Jets(out)

    def derivative(self, order: int) -> np.ndarray:
        from math import factorial
        return factorial(order) * self.coeffs[order]


def _smoothstep_jets(u: np.ndarray, K: int) -> np.ndarray:
    """Jet coefficients of S(u) = f(u)/(f(u)+f(1-u)), f = exp(-1/t).

    S is 0 for u <= 0 and 1 for u >= 1 with all derivatives vanishing at the
    ends; values within 1e-3 of the ends are clamped (the true values there
    are below double precision anyway).
    """
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.zeros((K + 1,) + u.shape)
    lowcut, highcut = 1e-3, 1.0 - 1e-3
    mid = (u > lowcut) & (u < highcut)
    out[0][u >= highcut] = 1.0
    if np.any(mid):
        um = Jets.variable(u[mid], K)
        f1 = (-um.reciprocal()).exp()
        f2 = (-(um.__neg__() + 1.0).reciprocal()).exp()
        s = f1 * (f1 + f2).reciprocal()
        out[:, mid] = s.coeffs
    return out.reshape((K + 1,) + shape)


def _affine_rescale(step_coeffs: np.ndarray, slope) -> np.ndarray:
    """Jets of S(a + slope*x) given jets of S in its own variable."""
    K = step_coeffs.shape[0] - 1
    out = step_coeffs.copy()
    slope = np.asarray(slope, dtype=float)
    fac = np.ones_like(slope)
    for k in range(1, K + 1):
        fac = fac * slope
        out[k] = out[k] * fac
    return out


def plateau_jets(s: np.ndarray, outer: float, K: int) -> np.ndarray:
    """Jets of the mollified plateau chi(s): 1 on [-1, 1], 0 beyond |s|=outer."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    u = (outer - a) / (outer - 1.0)
    cj = _smoothstep_jets(u, K)
    slope = -np.sign(s) / (outer - 1.0)
    return _affine_rescale(cj, slope)


def rising_jets(x: np.ndarray, x0: float, width: float, K: int) -> np.ndarray:
    """Jets of the even profile psi(x): 0 for |x|<=x0, 1 for |x|>=x0+width.

    Built on the same exp-based smoothstep as the plateau bumps: the
    quasi-analytic spectral decay is required downstream, where the solver
    differentiates the evolved profile spectrally up to order 2n+2.
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    u = (a - x0) / width
    cj = _smoothstep_jets(u, K)
    slope = np.sign(x) / width
    return _affine_rescale(cj, slope)


def _poly_jets(x: np.ndarray, power: int, K: int) -> Jets:
    """Jets of x**power."""
    from math import comb
    x = np.asarray(x, dtype=float)
    c = np.zeros((K + 1,) + x.shape)
    for k in range(min(K, power) + 1):
        c[k] = comb(power, k) * x ** (power - k)
    return Jets(c)


# ---------------------------------------------------------------------------
# base profile


@dataclass(frozen=True)
class BaseProfile:
    """The flat-minimum profile: exact polynomial core, blended outer hump.

    wbar0'(x) = -1 + x^(2n) chi(C0 x) + C0^(-2n) (1 - chi(C0 x)) + A psi(x)
    with chi the core plateau (1 on |x| <= 1/C0) and psi an even outer
    plateau; A makes wbar0' integrate to zero so wbar0 is periodic.
    """

    n: int
    C0: float
    grid: Grid
    amplitude: float
    psi_x0: float
    psi_width: float
    wbar0: Field
    wbar0_prime: Field

    @property
    def core_radius(self) -> float:
        return 1.0 / self.C0

    def core_value(self, x):
        x = np.asarray(x, dtype=float)
        p = 2 * self.n + 1
        return 2.5 - x + x**p / p

    def prime_derivatives(self, x, K: int) -> np.ndarray:
        """Exact derivatives [d^k wbar0'/dx^k](x) for k = 0..K."""
        return _wbar_prime_jets(x, self.n, self.C0, self.amplitude,
                                self.psi_x0, self.psi_width, K)

    def value(self, x):
        """wbar0 off the grid (trig interpolation of the stored samples)."""
        return FourierEval(self.wbar0.values)(x)


def _wbar_prime_jets(x, n: int, C0: float, A: float, x0: float, width: float,
                     K: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    chi = Jets(plateau_jets(C0 * x, _CORE_OUTER, K) * 1.0)
    # chi was computed in s = C0 x: rescale to x derivatives
    fac = 1.0
    for k in range(1, K + 1):
        fac *= C0
        chi.coeffs[k] *= fac
    core = _poly_jets(x, 2 * n, K)
    floor = C0 ** (-2 * n)
    one_minus_chi = -chi + 1.0
    psi = Jets(rising_jets(x, x0, width, K))
    total = core * chi + floor * one_minus_chi + A * psi
    out = total.coeffs.copy()
    out[0] -= 1.0
    from math import factorial
    for k in range(K + 1):
        out[k] *= factorial(k)
    return out


def _try_wbar(n: int, C0: float, grid: Grid, width_fraction: float):
    """One construction attempt; returns (profile, None) or (None, reason)."""
    x0 = _PSI_START / C0
    width = width_fraction * (0.5 - x0)

    # amplitude from the zero-mean condition, on a fixed fine quadrature grid
    xq = -0.5 + np.arange(_QUAD_N) / _QUAD_N
    chi_q = plateau_jets(C0 * xq, _CORE_OUTER, 0)[0]
    psi_q = rising_jets(xq, x0, width, 0)[0]
    floor = C0 ** (-2 * n)
    base_q = xq ** (2 * n) * chi_q + floor * (1.0 - chi_q)
    A = (1.0 - float(np.mean(base_q))) / float(np.mean(psi_q))

    if _QUAD_N % grid.N == 0:
        step = _QUAD_N // grid.N
        prime_vals = -1.0 + base_q[::step] + A * psi_q[::step]
    else:
        xg = grid.nodes
        chi_g = plateau_jets(C0 * xg, _CORE_OUTER, 0)[0]
        psi_g = rising_jets(xg, x0, width, 0)[0]
        prime_vals = -1.0 + xg ** (2 * n) * chi_g + floor * (1.0 - chi_g) + A * psi_g
    wbar_prime = Field(grid, prime_vals)

    anti = spectral_antiderivative(wbar_prime.values, grid.dx)
    anti = anti - anti[grid.N // 2] + 2.5  # wbar0(0) = 5/2 exactly at the x=0 node
    profile = BaseProfile(n=n, C0=C0, grid=grid, amplitude=A, psi_x0=x0,
                          psi_width=width, wbar0=Field(grid, anti),
                          wbar0_prime=wbar_prime)
    reason = _check_wbar(profile)
    return (profile, None) if reason is None else (None, reason)


def build_wbar(n: int, C0: float, grid: Grid) -> BaseProfile:
    """Construct and validate the base profile for the given flatness index.

    The outer hump's width is searched over a small fixed candidate list;
    the first candidate satisfying every profile bound on a fine grid wins,
    so the construction is deterministic.  Raises
    ProfileConstructionFailed naming a violated bound when no candidate
    works; for small C0 the constraint set is genuinely empty (the core
    occupies 2/C0 of the torus at slope -1, so a periodic profile with
    |wbar0'| <= 1 needs the outer hump to carry mass ~2/C0 at bounded
    height and slope, impossible below C0 around 10).
    """
    if C0 < 3.0:
        raise ValueError("C0 must be at least 3")
    if grid.N < 64 * C0:
        raise ProfileConstructionFailed(
            f"grid too coarse: N={grid.N} does not resolve 1/C0 with 64 points")
    n = int(n)
    reasons = []
    for frac in _PSI_CANDIDATES:
        profile, reason = _try_wbar(n, C0, grid, frac)
        if profile is not None:
            return profile
        reasons.append(reason)
    raise ProfileConstructionFailed(
        f"no admissible blend found for n={n}, C0={C0}; last failure: {reasons[-1]}")


def _check_wbar(p: BaseProfile):
    """Verify every BaseProfile invariant on a fine grid; None if all hold."""
    from math import factorial
    n, C0 = p.n, p.C0
    fine = Grid(max(8 * p.grid.N, 1 << 14))
    x = fine.nodes
    K = 2 * n + 1
    derivs = p.prime_derivatives(x, K)
    vals = derivs[0]

    core = np.abs(x) <= 1.0 / C0
    core_exact = -1.0 + x[core] ** (2 * n)
    if np.max(np.abs(vals[core] - core_exact)) > 1e-12:
        return "core formula not exact on |x| <= 1/C0"

    floor = -1.0 + C0 ** (-2 * n)
    if np.min(vals[~core]) < floor - 1e-12:
        return (f"wbar0' dips below -1 + C0^(-2n) outside the core "
                f"(min {np.min(vals[~core]):.6f} < {floor:.6f})")

    for i in range(K + 1):
        bound = factorial(i) * C0**i
        got = float(np.max(np.abs(derivs[i])))
        if got > bound * (1.0 + 1e-9):
            return (f"derivative bound violated at order {i + 1}: "
                    f"max |d^{i + 1} wbar0| = {got:.4g} > {i}! C0^{i} = {bound:.4g}")

    mean = float(np.mean(vals))
    if abs(mean) > 1e-10:
        return f"wbar0' mean {mean:.2e} is not zero"

    vmin = float(np.min(vals))
    if abs(vmin + 1.0) > 1e-12:
        return "global minimum of wbar0' is not -1"
    # inside the core the profile is the exact polynomial -1 + x^(2n), whose
    # only minimum is x = 0 (x^(2n) underflows to 0 in double precision on a
    # small neighbourhood, so locate by set membership, not by node index);
    # the threshold must stay below the outside floor C0^(-2n)
    thr = min(1e-11, 0.4 * C0 ** (-2 * n))
    near_min = np.abs(vals - vmin) < max(thr, 4e-15)
    if np.any(np.abs(x[near_min]) > 1.0 / C0 + fine.dx):
        return "wbar0' attains its minimum outside the core"
    return None


# ---------------------------------------------------------------------------
# perturbation basis


@dataclass(frozen=True)
class PerturbationBasis:
    """Monomial bumps wtilde_j(x) = x^(j+1)/(j+1)! chi(C0 x), j = 1..2n-2."""

    n: int
    C0: float
    grid: Grid
    outer: float
    Ln: float
    fields: tuple[Field, ...]

    def derivatives(self, j: int, x, K: int) -> np.ndarray:
        """Exact derivatives of wtilde_j at points x, orders 0..K."""
        return _basis_jets(x, j, self.n, self.C0, self.outer, K)

    def evaluate(self, j: int, x):
        return _basis_jets(x, j, self.n, self.C0, self.outer, 0)[0]


def _basis_jets(x, j: int, n: int, C0: float, outer: float, K: int) -> np.ndarray:
    from math import factorial
    x = np.asarray(x, dtype=float)
    chi = Jets(plateau_jets(C0 * x, outer, K) * 1.0)
    fac = 1.0
    for k in range(1, K + 1):
        fac *= C0
        chi.coeffs[k] *= fac
    mono = _poly_jets(x, j + 1, K)
    total = mono * chi
    out = total.coeffs.copy()
    for k in range(K + 1):
        out[k] *= factorial(k) / factorial(j + 1)
    return out


def build_basis(n: int, C0: float, grid: Grid) -> PerturbationBasis:
    """Basis of 2n-2 bump monomials plus its uniform constant Ln.

    Ln = C0 (2n+2) max_k ||chi^(k)||_inf / k! over k = 0..2n+2, computed on
    a dense sample of the transition zone.
    """
    from math import factorial
    if n == 1:
        raise NoBasisNeeded("n = 1 carries an empty perturbation basis")
    outer = C0 / 2.0
    K = 2 * n + 2
    s = np.linspace(1.0, outer, 4001)
    cj = plateau_jets(s, outer, K)
    ratios = [float(np.max(np.abs(factorial(k) * cj[k]))) / factorial(k)
              for k in range(K + 1)]
    Ln = C0 * (2 * n + 2) * max(ratios)
    fields = tuple(
        Field(grid, _basis_jets(grid.nodes, j, n, C0, outer, 0)[0])
        for j in range(1, 2 * n - 1))
    return PerturbationBasis(n=n, C0=C0, grid=grid, outer=outer, Ln=Ln,
                             fields=fields)


# ---------------------------------------------------------------------------
# assembled data


@dataclass(frozen=True)
class InitialData:
    params: Params
    grid: Grid
    w0: Field
    z0: Field
    k0: Field
    wtilde0: Field
    lam: tuple[float, ...]
    wbar: BaseProfile
    basis: PerturbationBasis | None
    in_A: bool
    in_B: bool

    @property
    def sigma0(self) -> np.ndarray:
        return 0.5 * (self.w0.values - self.z0.values)

    def to_json(self) -> str:
        doc = {
            "gamma": self.params.gamma,
            "n": self.params.n,
            "epsilon": self.params.epsilon,
            "C0": self.params.C0,
            "N": self.grid.N,
            "lambda": list(self.lam),
            "w0": self.w0.values.tolist(),
            "z0": self.z0.values.tolist(),
            "k0": self.k0.values.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "InitialData":
        doc = json.loads(text)
        params = Params(gamma=doc["gamma"], n=doc["n"], epsilon=doc["epsilon"],
                        C0=doc["C0"])
        grid = Grid(doc["N"])
        lam = tuple(float(v) for v in doc["lambda"])
        wbar = build_wbar(params.n, params.C0, grid)
        basis = build_basis(params.n, params.C0, grid) if params.n >= 2 else None
        w0 = np.array(doc["w0"], dtype=float)
        wt = w0 - wbar.wbar0.values
        if basis is not None:
            for j, lj in enumerate(lam):
                wt = wt - lj * basis.fields[j].values
        return assemble(Field(grid, wt), Field(grid, np.array(doc["z0"])),
                        Field(grid, np.array(doc["k0"])), lam, params, grid,
                        wbar=wbar, basis=basis)


def _fine_spectral_derivs(values: np.ndarray, orders: int, fine_N: int) -> np.ndarray:
    """Derivatives 0..orders of a gridded field, sampled on a finer grid.

    Coefficients at the rounding floor are truncated first: the factor
    (2 pi k)^m would otherwise amplify pure FFT noise past the membership
    bounds being validated.
    """
    from .core import _truncate_noise
    N = values.shape[0]
    fk = _truncate_noise(np.fft.rfft(values))
    pad = np.zeros(fine_N // 2 + 1, dtype=complex)
    pad[: fk.shape[0]] = fk * (fine_N / N)
    ik = 2j * np.pi * np.fft.rfftfreq(fine_N, d=1.0 / fine_N)
    out = np.empty((orders + 1, fine_N))
    for m in range(orders + 1):
        mult = pad * ik**m
        if m % 2 == 1:
            mult[-1] = 0.0
        out[m] = np.fft.irfft(mult, n=fine_N)
    return out


def _is_zero(values: np.ndarray) -> bool:
    return bool(np.all(values == 0.0))


def assemble(wtilde0: Field, z0: Field, k0: Field, lam, params: Params,
             grid: Grid, wbar: BaseProfile | None = None,
             basis: PerturbationBasis | None = None,
             wtilde_radius: float | None = None,
             require_B: bool = False,
             enforce_lambda_box: bool = True) -> InitialData:
    """Assemble w0 = wbar0 + wtilde0 + sum_j lambda_j wtilde^n_j and validate.

    Validation failures raise NotInAdmissibleSet naming the first violated
    inequality; nothing is clamped.  All membership inequalities are open,
    so identically-zero perturbation fields pass their epsilon-scaled bounds
    for every epsilon.  wtilde_radius overrides the radius of the wtilde0
    box (the manifold solve guarantees contraction only on the shrunken
    epsilon^2 box; we default to epsilon and report).
    """
    from math import factorial
    n, C0, eps = params.n, params.C0, params.epsilon
    lam = tuple(float(v) for v in (lam if lam is not None else ()))
    if wbar is None:
        wbar = build_wbar(n, C0, grid)
    if basis is None and n >= 2:
        basis = build_basis(n, C0, grid)
    if n >= 2 and len(lam) != 2 * n - 2:
        raise ValueError(f"lambda must have length {2 * n - 2}")
    if n == 1 and len(lam) != 0:
        raise ValueError("lambda must be empty for n = 1")

    r = eps if wtilde_radius is None else wtilde_radius
    K = 2 * n + 1
    fine_N = max(8 * grid.N, 1 << 13)
    x = (-0.5 + np.arange(fine_N) / fine_N)

    wt_d = _fine_spectral_derivs(wtilde0.values, K + 1, fine_N)
    z_d = _fine_spectral_derivs(z0.values, K + 1, fine_N)
    k_d = _fine_spectral_derivs(k0.values, K + 1, fine_N)

    def check_box(name, d, zero_ok, sup_bound, deriv_scale):
        if zero_ok and _is_zero(d[0]):
            return
        if sup_bound is not None:
            got = float(np.max(np.abs(d[0])))
            if not got < sup_bound:
                raise NotInAdmissibleSet(
                    f"||{name}||_inf = {got:.4g} not < {sup_bound:.4g}")
        for i in range(2 * n + 2):
            got = float(np.max(np.abs(d[i + 1]))) / factorial(i)
            bound = C0**i * deriv_scale
            if not got < bound:
                raise NotInAdmissibleSet(
                    f"||d^{i + 1} {name}||/ {i}! = {got:.4g} not < C0^{i} scale = {bound:.4g}")

    # U_n box on the perturbation triple
    check_box("wtilde0", wt_d, True, r / 2.0, r / 2.0)
    check_box("z0", z_d, True, r, r)
    check_box("k0", k_d, True, r, r)

    # X_n membership: derivatives 2..2n-1 of wtilde0 vanish at x = 0
    if n >= 2 and not _is_zero(wtilde0.values):
        ev = FourierEval(wtilde0.values)
        for m in range(2, 2 * n):
            dm = abs(ev.deriv(np.array(0.0), m))
            scale = factorial(m - 1) * C0 ** (m - 1) * max(eps, 1e-8)
            if dm > 1e-6 * scale:
                raise NotInAdmissibleSet(
                    f"wtilde0 not in X_n: d^{m} wtilde0(0) = {dm:.3g}")

    if basis is not None and enforce_lambda_box and any(v != 0.0 for v in lam):
        box = basis.Ln * sum(abs(v) for v in lam)
        if not box < eps / 2.0:
            raise NotInAdmissibleSet(
                f"lambda outside Lambda_n: L_n sum|lambda| = {box:.4g} not < eps/2")

    # assemble w0 on the grid and on the fine validation grid
    w0_vals = wbar.wbar0.values + wtilde0.values
    wb_fine = wbar.prime_derivatives(x, K)  # derivatives of wbar0' (orders 0..K)
    w_fine = wt_d[1:].copy()
    w_fine += wb_fine
    dev0 = wt_d[0].copy()  # w0 - wbar0 on the fine grid
    if basis is not None:
        for j, lj in enumerate(lam):
            if lj != 0.0:
                w0_vals = w0_vals + lj * basis.fields[j].values
                bj = basis.derivatives(j + 1, x, K + 1)
                w_fine += lj * bj[1:]
                dev0 += lj * bj[0]

    # A_n membership for the assembled triple
    sigma0 = 0.5 * (w0_vals - z0.values)
    if not (np.all(sigma0 > 0.5) and np.all(sigma0 < 2.0)):
        raise NotInAdmissibleSet("sigma0 = (w0 - z0)/2 leaves (1/2, 2)")
    wmin = float(np.min(w_fine[0]))
    if eps == 0.0:
        if abs(wmin + 1.0) > 1e-10:
            raise NotInAdmissibleSet(f"min w0' = {wmin:.12f} differs from -1 at eps = 0")
    elif not (-1.0 - eps < wmin < -1.0 + eps):
        raise NotInAdmissibleSet(
            f"min w0' = {wmin:.6f} outside (-1 - eps, -1 + eps)")
    slack = 1e-12 if eps == 0.0 else 0.0  # the prototype point sits on the boundary
    for i in range(2 * n + 2):
        got = float(np.max(np.abs(w_fine[i]))) / factorial(i)
        bound = C0**i * (1.0 + eps) + slack
        if not got < bound:
            raise NotInAdmissibleSet(
                f"||d^{i + 1} w0|| / {i}! = {got:.4g} not < C0^{i}(1 + eps)")

    in_B = True
    try:
        perturbed = not (_is_zero(wtilde0.values) and not any(v != 0.0 for v in lam))
        if perturbed:
            if not float(np.max(np.abs(dev0))) < eps:
                raise NotInAdmissibleSet("||w0 - wbar0||_inf not < eps")
            dev = w_fine - wb_fine
            for i in range(2 * n + 2):
                got = float(np.max(np.abs(dev[i]))) / factorial(i)
                if not got < C0**i * eps:
                    raise NotInAdmissibleSet(
                        f"||d^{i + 1}(w0 - wbar0)||/{i}! = {got:.4g} not < C0^{i} eps")
        if not _is_zero(z0.values) and not float(np.max(np.abs(z_d[0]))) < eps:
            raise NotInAdmissibleSet("||z0||_inf not < eps")
    except NotInAdmissibleSet:
        if require_B:
            raise
        in_B = False

    return InitialData(params=params, grid=grid, w0=Field(grid, w0_vals),
                       z0=z0, k0=k0, wtilde0=wtilde0, lam=lam, wbar=wbar,
                       basis=basis, in_A=True, in_B=in_B)


def reduction_data(params: Params, grid: Grid) -> InitialData:
    """The Burgers point (wbar0, 0, 0): isentropic u = sigma reduction."""
    zeros = Field(grid, np.zeros(grid.N))
    lam = (0.0,) * (2 * params.n - 2)
    return assemble(zeros, zeros, zeros, lam, params, grid)


def project_to_Xn(values: np.ndarray, n: int, C0: float, grid: Grid,
                  basis: PerturbationBasis | None = None) -> np.ndarray:
    """Remove the monomial-bump components so derivatives 2..2n-1 vanish at 0."""
    if n == 1:
        return values.copy()
    if basis is None:
        basis = build_basis(n, C0, grid)
    ev = FourierEval(values)
    out = values.copy()
    for m in range(2, 2 * n):
        dm = float(ev.deriv(np.array(0.0), m))
        out = out - dm * _basis_jets(grid.nodes, m - 1, n, C0, basis.outer, 0)[0]
        ev = FourierEval(out)
    return out


def random_admissible(params: Params, grid: Grid, seed: int,
                      w_slope_at_zero: float = -0.5,
                      margin: float = 0.5,
                      box_epsilon: float | None = None):
    """Seeded smooth perturbation triple (wtilde0, z0, k0), scaled into the
    membership boxes with the given margin.

    The wtilde0 shape carries a deliberate first-derivative component at
    x = 0 (w_slope_at_zero, in units of epsilon) so the blowup-time shift
    is linear in epsilon with a nonzero coefficient.  box_epsilon overrides
    the box radius (the manifold solve wants seeds in the shrunken
    epsilon^2 box).
    """
    from math import factorial
    rng = np.random.default_rng(seed)
    n, C0 = params.n, params.C0
    eps = params.epsilon if box_epsilon is None else box_epsilon
    x = grid.nodes

    def shape(coeff_scale=1.0):
        out = np.zeros(grid.N)
        for k in range(1, 4):
            a, b = rng.uniform(-1, 1, 2)
            out += coeff_scale * (a * np.cos(2 * np.pi * k * x)
                                  + b * np.sin(2 * np.pi * k * x)) / k**2
        return out

    def box_ratio(vals, sup_scale, deriv_scale):
        d = _fine_spectral_derivs(vals, 2 * n + 2, max(4 * grid.N, 1 << 12))
        r = np.max(np.abs(d[0])) / sup_scale
        for i in range(2 * n + 2):
            r = max(r, np.max(np.abs(d[i + 1])) / (factorial(i) * C0**i * deriv_scale))
        return r

    z_raw = shape()
    k_raw = shape()
    w_raw = shape(0.25) + w_slope_at_zero * np.sin(2 * np.pi * x) / (2 * np.pi)
    w_raw = project_to_Xn(w_raw, n, C0, grid)

    if eps == 0.0:
        zeros = np.zeros(grid.N)
        return Field(grid, zeros), Field(grid, zeros), Field(grid, zeros)

    # box_ratio already contains the epsilon scale, so the factor below puts
    # the field at `margin` times its binding bound
    z_vals = z_raw * (margin / box_ratio(z_raw, eps, eps))
    k_vals = k_raw * (margin / box_ratio(k_raw, eps, eps))
    w_vals = w_raw * (margin / box_ratio(w_raw, eps / 2, eps / 2))
    return Field(grid, w_vals), Field(grid, z_vals), Field(grid, k_vals)
