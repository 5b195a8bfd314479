"""Time integration along the fast acoustic characteristics.

Evolves the coupled fields (Sigma, eta_x, eta_x*Wring, Zring, Kring) plus
the companion transports (eta, w o eta, z o eta, k o eta) with classical
RK4.  Only Zring and Kring carry spatial derivatives; everything else obeys
pointwise ODE laws, so the Burgers reduction (z0 = k0 = 0) integrates the
transport rows as exact zeros.

The quotient by eta_x in the Zring/Kring laws is kept explicit and guarded
by eta_floor; the time step tracks both the fast-speed CFL cap and the
stability limit of the transports, whose coefficient grows like
2 alpha Sigma / eta_x as the flow map degenerates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, Params
from .errors import MonitorBreach, NearBlowup, NonFiniteField
from .initial_data import InitialData

try:  # optional fused kernels; the numpy path below is the reference
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

# row layout of the state block (Zring/Kring and Sigma/Wcomp adjacent for
# batched transforms)
_IZ, _IK, _IS, _IWC, _IEX, _IA, _IETA, _IZC, _IKC = range(9)

_NAMES = {"Zring": _IZ, "Kring": _IK, "Sigma": _IS, "Wcomp": _IWC,
          "eta_x": _IEX, "eta_xW": _IA, "eta": _IETA, "Zcomp": _IZC,
          "Kcomp": _IKC}


@dataclass(frozen=True)
class LagrangianState:
    """Snapshot of all evolved fields at time t (immutable)."""

    t: float
    params: Params
    grid: Grid
    block: np.ndarray

    def __post_init__(self):
        b = np.array(self.block, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "block", b)
        if b.shape != (9, self.grid.N):
            raise ValueError("state block must be 9 x N")

    def field(self, name: str) -> Field:
        return Field(self.grid, self.block[_NAMES[name]])

    @property
    def Sigma(self):
        return self.block[_IS]

    @property
    def eta_x(self):
        return self.block[_IEX]

    @property
    def eta_xW(self):
        return self.block[_IA]

    @property
    def Zring(self):
        return self.block[_IZ]

    @property
    def Kring(self):
        return self.block[_IK]

    @property
    def eta(self):
        return self.block[_IETA]

    @property
    def Wcomp(self):
        return self.block[_IWC]

    @property
    def Zcomp(self):
        return self.block[_IZC]

    @property
    def Kcomp(self):
        return self.block[_IKC]

    def require_valid(self, eta_floor: float = 0.0) -> None:
        if not np.all(np.isfinite(self.block)):
            raise NonFiniteField("state contains non-finite values")
        if np.any(self.Sigma <= 0.0):
            raise NearBlowup("Sigma lost positivity")
        if np.any(self.eta_x <= eta_floor):
            raise NearBlowup("eta_x at or below the floor")

    def to_json(self) -> str:
        """Snapshot document: the InitialData schema plus the field arrays."""
        import json
        doc = {
            "gamma": self.params.gamma,
            "n": self.params.n,
            "epsilon": self.params.epsilon,
            "C0": self.params.C0,
            "N": self.grid.N,
            "t": self.t,
            "fields": {name: self.block[row].tolist()
                       for name, row in _NAMES.items()},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LagrangianState":
        import json
        doc = json.loads(text)
        params = Params(gamma=doc["gamma"], n=doc["n"],
                        epsilon=doc["epsilon"], C0=doc["C0"])
        grid = Grid(doc["N"])
        block = np.empty((9, grid.N))
        for name, row in _NAMES.items():
            block[row] = np.array(doc["fields"][name], dtype=float)
        return cls(t=doc["t"], params=params, grid=grid, block=block)

    def compat_residuals(self) -> tuple[float, float]:
        """Max-norm residuals of the two spatial compatibility identities.

        Sigma_x must equal (eta_xW - eta_x Zring)/2 + eta_x Sigma Kring/(2 gamma),
        and d_x(w o eta) must equal eta_xW + eta_x Sigma Kring/(2 gamma);
        both are conserved by the continuum system and violated only by
        discretization.
        """
        ik = self.grid.wavenumbers()
        F = np.fft.rfft(self.block[_IS:_IWC + 1], axis=1)
        d = np.fft.irfft(F * ik, n=self.grid.N, axis=1)
        g2 = 0.5 / self.params.gamma
        cross = g2 * self.eta_x * self.Sigma * self.Kring
        r1 = d[0] - (0.5 * self.eta_xW - 0.5 * self.eta_x * self.Zring + cross)
        r2 = d[1] - (self.eta_xW + cross)
        return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def initialize(data: InitialData) -> LagrangianState:
    """State at t = 0: Sigma = sigma0, eta_x = 1, eta = x, and the
    entropy-corrected derivative fields from the initial triple."""
    g = data.grid
    ik = g.wavenumbers()
    w0, z0, k0 = data.w0.values, data.z0.values, data.k0.values
    F = np.fft.rfft(np.stack([w0, z0, k0]), axis=1)
    dw0, dz0, dk0 = np.fft.irfft(F * ik, n=g.N, axis=1)
    sigma0 = 0.5 * (w0 - z0)
    corr = sigma0 * dk0 / (2.0 * data.params.gamma)
    block = np.empty((9, g.N))
    block[_IZ] = dz0 + corr
    block[_IK] = dk0
    block[_IS] = sigma0
    block[_IWC] = w0
    block[_IEX] = 1.0
    block[_IA] = dw0 - corr
    block[_IETA] = g.nodes
    block[_IZC] = z0
    block[_IKC] = k0
    # the isentropic reduction must stay bit-exact zero in the solver
    if np.all(z0 == 0.0) and np.all(k0 == 0.0):
        block[_IZ] = 0.0
        block[_IK] = 0.0
    return LagrangianState(t=0.0, params=data.params, grid=g, block=block)


class _Workspace:
    """Preallocated buffers for the RK4 loop."""

    def __init__(self, N: int):
        self.k1 = np.empty((9, N))
        self.k2 = np.empty((9, N))
        self.k3 = np.empty((9, N))
        self.k4 = np.empty((9, N))
        self.ytmp = np.empty((9, N))
        self.tmp = np.empty((6, N))


if _numba is not None:

    @_numba.njit(cache=True)
    def _pointwise_kernel(Y, out, dZx, dKx, alpha, gamma, has_transport):
        c1 = 0.5 * (1.0 + alpha)
        c2 = 0.5 * (1.0 - alpha)
        c3 = 0.5 * alpha / gamma
        c4 = 0.25 * alpha / gamma
        N = Y.shape[1]
        for i in range(N):
            Z = Y[0, i]; K = Y[1, i]; S = Y[2, i]; Wc = Y[3, i]
            ex = Y[4, i]; A = Y[5, i]; Zc = Y[7, i]
            aS = alpha * S
            SK = S * K
            exZ = ex * Z
            out[2, i] = aS * ((0.5 / gamma) * SK - Z)
            out[4, i] = c1 * A + c2 * exZ + c3 * ex * SK
            out[5, i] = c4 * SK * (A + exZ)
            if has_transport:
                out[1, i] = (aS * dKx[i] - 0.5 * K * (A + exZ)) / ex
                out[0, i] = (2.0 * aS * dZx[i] + c4 * SK * (exZ - A)
                             - Z * (c2 * A + c1 * exZ)) / ex
            else:
                out[0, i] = 0.0
                out[1, i] = 0.0
            wct = c3 * S * SK
            out[3, i] = wct
            out[6, i] = c1 * Wc + c2 * Zc
            out[7, i] = 2.0 * aS * Z - wct
            out[8, i] = aS * K

    @_numba.njit(cache=True)
    def _stage_kernel(Ys, Ybase, kout, ynext, dZx, dKx, alpha, gamma,
                      has_transport, c, write_next):
        """kout = rhs(Ys); optionally ynext = Ybase + c*kout (fused pass)."""
        c1 = 0.5 * (1.0 + alpha)
        c2 = 0.5 * (1.0 - alpha)
        c3 = 0.5 * alpha / gamma
        c4 = 0.25 * alpha / gamma
        N = Ys.shape[1]
        for i in range(N):
            Z = Ys[0, i]; K = Ys[1, i]; S = Ys[2, i]; Wc = Ys[3, i]
            ex = Ys[4, i]; A = Ys[5, i]; Zc = Ys[7, i]
            aS = alpha * S
            SK = S * K
            exZ = ex * Z
            kout[2, i] = aS * ((0.5 / gamma) * SK - Z)
            kout[4, i] = c1 * A + c2 * exZ + c3 * ex * SK
            kout[5, i] = c4 * SK * (A + exZ)
            if has_transport:
                kout[1, i] = (aS * dKx[i] - 0.5 * K * (A + exZ)) / ex
                kout[0, i] = (2.0 * aS * dZx[i] + c4 * SK * (exZ - A)
                              - Z * (c2 * A + c1 * exZ)) / ex
            else:
                kout[0, i] = 0.0
                kout[1, i] = 0.0
            wct = c3 * S * SK
            kout[3, i] = wct
            kout[6, i] = c1 * Wc + c2 * Zc
            kout[7, i] = 2.0 * aS * Z - wct
            kout[8, i] = aS * K
            if write_next:
                for r in range(9):
                    ynext[r, i] = Ybase[r, i] + c * kout[r, i]

    @_numba.njit(cache=True)
    def _combine_kernel(Y, k1, k2, k3, k4, dt):
        rows, N = Y.shape
        out = np.empty_like(Y)
        c = dt / 6.0
        for r in range(rows):
            for i in range(N):
                out[r, i] = Y[r, i] + c * (k1[r, i] + 2.0 * k2[r, i]
                                           + 2.0 * k3[r, i] + k4[r, i])
        return out

    @_numba.njit(cache=True)
    def _transport_speed_kernel(S, ex, alpha, eta_floor):
        best = 0.0
        for i in range(S.shape[0]):
            e = ex[i]
            if e < eta_floor:
                e = eta_floor
            s = 2.0 * alpha * S[i] / e
            if s > best:
                best = s
        return best

    @_numba.njit(cache=True)
    def _stats_kernel(Y):
        """(min ex, argmin ex, max|K|, max|Z|, min S, max S, max|A|, max ex,
        min of -1/2 + 4 ex - A) in one pass."""
        N = Y.shape[1]
        min_ex = Y[4, 0]; arg = 0
        max_ex = Y[4, 0]
        kmax = 0.0; zmax = 0.0
        smin = Y[2, 0]; smax = Y[2, 0]
        amax = 0.0
        margin = 1e300
        for i in range(N):
            ex = Y[4, i]
            if ex < min_ex:
                min_ex = ex; arg = i
            if ex > max_ex:
                max_ex = ex
            k = abs(Y[1, i])
            if k > kmax:
                kmax = k
            z = abs(Y[0, i])
            if z > zmax:
                zmax = z
            s = Y[2, i]
            if s < smin:
                smin = s
            if s > smax:
                smax = s
            a = abs(Y[5, i])
            if a > amax:
                amax = a
            m = -0.5 + 4.0 * ex - Y[5, i]
            if m < margin:
                margin = m
        return min_ex, arg, kmax, zmax, smin, smax, amax, max_ex, margin

    def _pointwise_kernel(Y, out, dZx, dKx, alpha, gamma, has_transport):
        # out doubles as the (unused) ynext slot so readonly state blocks
        # can be passed as Y
        _stage_kernel(Y, Y, out, out, dZx, dKx, alpha, gamma, has_transport,
                      0.0, False)
else:  # pragma: no cover
    _pointwise_kernel = None


def _rhs(Y: np.ndarray, out: np.ndarray, tmp: np.ndarray, ik: np.ndarray,
         alpha: float, gamma: float, eta_floor: float, N: int,
         skip_transport: bool) -> None:
    if np.min(Y[_IEX]) < eta_floor:
        raise NearBlowup(f"min eta_x below floor {eta_floor}")
    if not skip_transport:
        F = np.fft.rfft(Y[_IZ:_IK + 1], axis=1)
        F *= ik
        d = np.fft.irfft(F, n=N, axis=1)
        dZx, dKx = d[0], d[1]
    else:
        dZx = dKx = tmp[4]  # unused by the kernel in this branch
    if _pointwise_kernel is not None:
        _pointwise_kernel(Y, out, dZx, dKx, alpha, gamma, not skip_transport)
        return
    _rhs_numpy(Y, out, tmp, alpha, gamma, skip_transport, dZx, dKx)


def _rhs_numpy(Y: np.ndarray, out: np.ndarray, tmp: np.ndarray,
               alpha: float, gamma: float, skip_transport: bool,
               dZx, dKx) -> None:
    Z = Y[_IZ]; K = Y[_IK]; S = Y[_IS]; Wc = Y[_IWC]
    ex = Y[_IEX]; A = Y[_IA]; Zc = Y[_IZC]
    c1 = 0.5 * (1.0 + alpha)
    c2 = 0.5 * (1.0 - alpha)
    c3 = 0.5 * alpha / gamma
    c4 = 0.25 * alpha / gamma

    aS, SK, exZ, w, v, u = tmp
    np.multiply(alpha, S, out=aS)
    np.multiply(S, K, out=SK)
    np.multiply(ex, Z, out=exZ)

    # Sigma_t = -alpha Sigma Zring + alpha Sigma^2 Kring / (2 gamma)
    np.multiply(SK, 0.5 / gamma, out=w)
    np.subtract(w, Z, out=w)
    np.multiply(aS, w, out=out[_IS])
    # eta_xt = c1 eta_xW + c2 eta_x Zring + c3 eta_x Sigma Kring
    np.multiply(ex, SK, out=v)                 # v = eta_x Sigma Kring (reused)
    np.multiply(v, c3, out=out[_IEX])
    np.multiply(A, c1, out=w)
    out[_IEX] += w
    np.multiply(exZ, c2, out=w)
    out[_IEX] += w
    # (eta_x Wring)_t = c4 Sigma Kring (eta_xW + eta_x Zring)
    np.add(A, exZ, out=u)                      # u = A + eta_x Z, reused below
    np.multiply(u, SK, out=w)
    np.multiply(w, c4, out=out[_IA])

    if skip_transport:
        out[_IZ] = 0.0
        out[_IK] = 0.0
    else:
        # eta_x Kring_t = alpha Sigma dKx - Kring (eta_xW + eta_x Zring)/2
        np.multiply(u, K, out=w)
        w *= -0.5
        np.multiply(aS, dKx, out=dKx)
        w += dKx
        np.divide(w, ex, out=out[_IK])
        # eta_x Zring_t = 2 alpha Sigma dZx - c2 eta_xW Zring
        #   - c4 Sigma Kring eta_xW - c1 eta_x Zring^2 + c4 eta_x Sigma Kring Zring
        np.multiply(aS, dZx, out=dZx)
        dZx *= 2.0
        np.subtract(exZ, A, out=w)   # c4 SK (exZ - A) collects both Kring terms
        w *= SK
        w *= c4
        dZx += w
        np.multiply(A, c2, out=w)
        np.multiply(exZ, c1, out=v)
        w += v
        w *= Z
        dZx -= w
        np.divide(dZx, ex, out=out[_IZ])

    # companion transports
    np.multiply(S, SK, out=w)
    np.multiply(w, c3, out=out[_IWC])          # (w o eta)_t
    np.multiply(Wc, c1, out=out[_IETA])
    np.multiply(Zc, c2, out=w)
    out[_IETA] += w                            # eta_t = lambda_3 o eta
    np.multiply(aS, Z, out=v)
    v *= 2.0
    np.subtract(v, out[_IWC], out=out[_IZC])   # (z o eta)_t
    np.multiply(aS, K, out=out[_IKC])          # (k o eta)_t


def rhs(state: LagrangianState, eta_floor: float = 1e-6) -> np.ndarray:
    """Time derivatives of all nine fields (rows in state order)."""
    N = state.grid.N
    ws = _Workspace(N)
    out = np.empty((9, N))
    skip = bool(np.all(state.block[_IZ] == 0.0) and np.all(state.block[_IK] == 0.0))
    _rhs(state.block, out, ws.tmp, state.grid.wavenumbers(),
         state.params.alpha, state.params.gamma, eta_floor, N, skip)
    return out


def _rk4_step(Y, t, dt, ws, ik, alpha, gamma, eta_floor, N, skip):
    if _numba is not None:
        dummy = ws.tmp[4]
        stages = ((Y, ws.k1, 0.5 * dt, True), (ws.ytmp, ws.k2, 0.5 * dt, True),
                  (ws.ytmp, ws.k3, dt, True), (ws.ytmp, ws.k4, 0.0, False))
        for ys, kout, c, more in stages:
            if np.min(ys[_IEX]) < eta_floor:
                raise NearBlowup(f"min eta_x below floor {eta_floor}")
            if skip:
                dZx = dKx = dummy
            else:
                F = np.fft.rfft(ys[_IZ:_IK + 1], axis=1)
                F *= ik
                d = np.fft.irfft(F, n=N, axis=1)
                dZx, dKx = d[0], d[1]
            _stage_kernel(ys, Y, kout, ws.ytmp, dZx, dKx, alpha, gamma,
                          not skip, c, more)
        return _combine_kernel(Y, ws.k1, ws.k2, ws.k3, ws.k4, dt), t + dt
    _rhs(Y, ws.k1, ws.tmp, ik, alpha, gamma, eta_floor, N, skip)
    np.multiply(ws.k1, 0.5 * dt, out=ws.ytmp)
    ws.ytmp += Y
    _rhs(ws.ytmp, ws.k2, ws.tmp, ik, alpha, gamma, eta_floor, N, skip)
    np.multiply(ws.k2, 0.5 * dt, out=ws.ytmp)
    ws.ytmp += Y
    _rhs(ws.ytmp, ws.k3, ws.tmp, ik, alpha, gamma, eta_floor, N, skip)
    np.multiply(ws.k3, dt, out=ws.ytmp)
    ws.ytmp += Y
    _rhs(ws.ytmp, ws.k4, ws.tmp, ik, alpha, gamma, eta_floor, N, skip)
    ws.k2 += ws.k3
    ws.k2 *= 2.0
    ws.k2 += ws.k1
    ws.k2 += ws.k4
    ws.k2 *= dt / 6.0
    return Y + ws.k2, t + dt


def step(state: LagrangianState, dt: float, eta_floor: float = 1e-6) -> LagrangianState:
    """One classical 4-stage Runge-Kutta step (dt may be negative)."""
    N = state.grid.N
    ws = _Workspace(N)
    skip = bool(np.all(state.block[_IZ] == 0.0) and np.all(state.block[_IK] == 0.0))
    Y, t = _rk4_step(state.block, state.t, dt, ws, state.grid.wavenumbers(),
                     state.params.alpha, state.params.gamma, eta_floor, N, skip)
    return LagrangianState(t=t, params=state.params, grid=state.grid, block=Y)


# ---------------------------------------------------------------------------
# monitors


def reference_constants(params: Params) -> tuple[float, float]:
    """(B_k, B_z): the a-priori amplification constants for the
    epsilon-scaled fields."""
    alpha, gamma = params.alpha, params.gamma
    Bk = 6.0 ** (1.0 / alpha)
    Bz = 6.0 ** (2.0 / min(1.0, alpha)) * (2.0 + 1.0 / gamma) * math.exp(21.0)
    return Bk, Bz


@dataclass(frozen=True)
class MonitorReport:
    t: float
    sigma_min: float
    sigma_max: float
    eta_x_min: float
    eta_x_max: float
    eta_xW_max_abs: float
    slope_margin: float          # min over x of (-1/2 + 4 eta_x - eta_xW)
    K_ratio: float               # max|Kring| / (B_k eps)
    Z_ratio: float               # max|Zring| / (B_z eps)
    Bk: float
    Bz: float

    @property
    def structural_ok(self) -> bool:
        return (self.sigma_min >= 1.0 / 3.0 and self.sigma_max <= 3.0
                and self.eta_xW_max_abs <= 4.0 / 3.0 and self.eta_x_max <= 3.0
                and self.slope_margin >= 0.0)


def monitor(state: LagrangianState) -> MonitorReport:
    """Evaluate the zeroth-order a-priori bounds on the current state.

    The epsilon-independent bounds (Sigma in [1/3, 3], |eta_xW| <= 4/3,
    eta_x <= 3, eta_xW <= -1/2 + 4 eta_x) are structural pass/fail flags;
    the epsilon-scaled bounds on Kring and Zring are reported as ratios
    against their reference constants, which are far from sharp at
    practical epsilon.
    """
    p = state.params
    Bk, Bz = reference_constants(p)
    eps = p.epsilon
    kr = float(np.max(np.abs(state.Kring)))
    zr = float(np.max(np.abs(state.Zring)))
    return MonitorReport(
        t=state.t,
        sigma_min=float(np.min(state.Sigma)),
        sigma_max=float(np.max(state.Sigma)),
        eta_x_min=float(np.min(state.eta_x)),
        eta_x_max=float(np.max(state.eta_x)),
        eta_xW_max_abs=float(np.max(np.abs(state.eta_xW))),
        slope_margin=float(np.min(-0.5 + 4.0 * state.eta_x - state.eta_xW)),
        K_ratio=kr / (Bk * eps) if eps > 0 else 0.0,
        Z_ratio=zr / (Bz * eps) if eps > 0 else 0.0,
        Bk=Bk, Bz=Bz)


# ---------------------------------------------------------------------------
# run loop


class TrajectoryLog:
    """Per-step record of (t, min eta_x, argmin x, max|K|, max|Z|, compat)."""

    columns = ("t", "min_eta_x", "argmin_x", "max_abs_K", "max_abs_Z",
               "compat_residual")

    def __init__(self):
        self.rows: list[tuple[float, ...]] = []

    def append(self, *row: float) -> None:
        self.rows.append(tuple(float(v) for v in row))

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([repr(v) for v in row])


def _controller_dt(Y, dx, alpha, cfl, kz_cfl, skip, eta_floor):
    dt = cfl * dx / (2.0 * alpha * float(np.max(Y[_IS])))
    if not skip:
        if _numba is not None:
            speed = _transport_speed_kernel(Y[_IS], Y[_IEX], alpha, eta_floor)
        else:
            speed = float(np.max(2.0 * alpha * Y[_IS]
                                 / np.maximum(Y[_IEX], eta_floor)))
        dt = min(dt, kz_cfl * dx / speed)
    return dt


def run_to_near_blowup(state: LagrangianState, delta_stop: float = 5e-3,
                       cfl: float = 0.4, kz_cfl: float = 0.8,
                       eta_floor: float = 1e-6, t_end: float | None = None,
                       max_steps: int = 2_000_000,
                       check_monitors: bool = True,
                       compat_stride: int = 16
                       ) -> tuple[LagrangianState, TrajectoryLog]:
    """Advance until min eta_x <= delta_stop (or t_end), logging every step.

    dt is the smaller of the fast-speed CFL cap cfl*dx/max(2 alpha Sigma)
    and the transport stability limit kz_cfl*dx/max(2 alpha Sigma/eta_x);
    the latter is skipped while Zring and Kring are exactly zero, since the
    transport rows then carry no signal.  Structural monitor violations
    fail fast with MonitorBreach.  The compatibility residual (a slowly
    drifting discretization diagnostic) is recomputed every compat_stride
    steps and at the final state; log rows in between carry the last value.
    """
    p = state.params
    g = state.grid
    N = g.N
    ws = _Workspace(N)
    ik = g.wavenumbers()
    Y = np.array(state.block, dtype=float)
    t = state.t
    log = TrajectoryLog()
    if delta_stop <= eta_floor:
        raise ValueError("delta_stop must exceed eta_floor")
    nodes = g.nodes
    g2 = 0.5 / p.gamma
    compat = 0.0

    skip = bool(np.all(Y[_IZ] == 0.0) and np.all(Y[_IK] == 0.0))
    for it in range(max_steps):
        if _numba is not None:
            (min_ex, j, kmax, zmax, smin, smax, amax, exmax,
             margin) = _stats_kernel(Y)
            j = int(j)
        else:
            j = int(np.argmin(Y[_IEX]))
            min_ex = float(Y[_IEX, j])
            kmax = float(np.max(np.abs(Y[_IK])))
            zmax = float(np.max(np.abs(Y[_IZ])))
            smin = float(np.min(Y[_IS])); smax = float(np.max(Y[_IS]))
            amax = float(np.max(np.abs(Y[_IA])))
            exmax = float(np.max(Y[_IEX]))
            margin = float(np.min(-0.5 + 4.0 * Y[_IEX] - Y[_IA]))
        if not math.isfinite(min_ex) or not math.isfinite(smax):
            raise NonFiniteField("state lost finiteness during the run")
        stopping = (min_ex <= delta_stop
                    or (t_end is not None and t >= t_end - 1e-14))
        if stopping or it % compat_stride == 0:
            F = np.fft.rfft(Y[_IS:_IWC + 1], axis=1)
            d = np.fft.irfft(F * ik, n=N, axis=1)
            cross = g2 * Y[_IEX] * Y[_IS] * Y[_IK]
            r1 = np.max(np.abs(d[0] - 0.5 * Y[_IA] + 0.5 * Y[_IEX] * Y[_IZ] - cross))
            r2 = np.max(np.abs(d[1] - Y[_IA] - cross))
            compat = float(max(r1, r2))
        log.append(t, min_ex, nodes[j], kmax, zmax, compat)

        if check_monitors:
            if smin < 1.0 / 3.0 or smax > 3.0:
                raise MonitorBreach(f"Sigma left [1/3, 3] at t={t}: [{smin}, {smax}]")
            if amax > 4.0 / 3.0:
                raise MonitorBreach(f"|eta_xW| exceeded 4/3 at t={t}: {amax}")
            if exmax > 3.0:
                raise MonitorBreach(f"eta_x exceeded 3 at t={t}: {exmax}")
            if margin < 0.0:
                raise MonitorBreach(f"eta_xW > -1/2 + 4 eta_x at t={t}")

        if stopping:
            break
        dt = _controller_dt(Y, g.dx, p.alpha, cfl, kz_cfl, skip, eta_floor)
        if t_end is not None:
            dt = min(dt, t_end - t)
        Y, t = _rk4_step(Y, t, dt, ws, ik, p.alpha, p.gamma, eta_floor, N, skip)
    else:
        raise NearBlowup("max_steps exhausted before reaching delta_stop")

    final = LagrangianState(t=t, params=p, grid=g, block=Y)
    return final, log


def advance_to_time(state: LagrangianState, t_end: float,
                    **kwargs) -> tuple[LagrangianState, TrajectoryLog]:
    """Advance to a fixed time (stops early only near blowup)."""
    return run_to_near_blowup(state, t_end=t_end, **kwargs)


# ---------------------------------------------------------------------------
# variational (sensitivity) integration


@dataclass(frozen=True)
class SensitivityState:
    """Parameter derivatives of every evolved field for one direction."""

    t: float
    grid: Grid
    block: np.ndarray  # same row layout as LagrangianState

    def field(self, name: str) -> np.ndarray:
        return self.block[_NAMES[name]]


def _var_rhs(Y, V, dY, out, tmp, ik, alpha, gamma, N):
    """d/dt of the variational block V given base Y and base rhs dY."""
    Z = Y[_IZ]; K = Y[_IK]; S = Y[_IS]
    ex = Y[_IEX]; A = Y[_IA]
    Zl = V[_IZ]; Kl = V[_IK]; Sl = V[_IS]; Wcl = V[_IWC]
    exl = V[_IEX]; Al = V[_IA]; Zcl = V[_IZC]
    c1 = 0.5 * (1.0 + alpha)
    c2 = 0.5 * (1.0 - alpha)
    c3 = 0.5 * alpha / gamma
    c4 = 0.25 * alpha / gamma

    F = np.fft.rfft(np.stack([Y[_IZ], Y[_IK], V[_IZ], V[_IK]]), axis=1)
    d = np.fft.irfft(F * ik, n=N, axis=1)
    dZx, dKx, dZxl, dKxl = d

    exZ = ex * Z
    SK = S * K
    # Sigma_lambda
    out[_IS] = alpha * Sl * (SK / gamma - Z) - alpha * S * Zl + c3 * S * S * Kl
    # eta_x_lambda
    out[_IEX] = (c1 * Al + exl * (c2 * Z + c3 * SK)
                 + c3 * ex * (Sl * K + S * Kl) + c2 * ex * Zl)
    # (eta_x W)_lambda
    out[_IA] = (c4 * (Sl * K + S * Kl) * (A + exZ)
                + c4 * SK * (Al + exl * Z + ex * Zl))
    # Kring_lambda
    out[_IK] = (alpha * S * dKxl - 0.5 * Kl * (A + exZ) - exl * dY[_IK]
                + alpha * Sl * dKx - 0.5 * ex * K * Zl
                - 0.5 * K * (Al + exl * Z)) / ex
    # Zring_lambda
    out[_IZ] = (2.0 * alpha * S * dZxl
                + Zl * (-c2 * A - (1.0 + alpha) * exZ + c4 * ex * SK)
                - exl * dY[_IZ] + 2.0 * alpha * Sl * dZx
                + c4 * Kl * S * (exZ - A)
                + Z * (-c2 * Al - c1 * exl * Z + c4 * (exl * S + ex * Sl) * K)
                ) / ex
    # companions
    out[_IWC] = c3 * (2.0 * S * Sl * K + S * S * Kl)
    out[_IETA] = c1 * Wcl + c2 * Zcl
    out[_IZC] = 2.0 * alpha * (Sl * Z + S * Zl) - out[_IWC]
    out[_IKC] = alpha * (Sl * K + S * Kl)


def initialize_sensitivity(data: InitialData, direction: Field) -> SensitivityState:
    """t = 0 variational data for a perturbation w0 -> w0 + lambda*direction."""
    g = data.grid
    wt = direction.values
    ik = g.wavenumbers()
    dwt = np.fft.irfft(np.fft.rfft(wt) * ik, n=g.N)
    dk0 = np.fft.irfft(np.fft.rfft(data.k0.values) * ik, n=g.N)
    quarter = 0.25 / data.params.gamma
    block = np.zeros((9, g.N))
    block[_IS] = 0.5 * wt
    block[_IA] = dwt - quarter * wt * dk0
    block[_IZ] = quarter * wt * dk0
    block[_IWC] = wt
    return SensitivityState(t=0.0, grid=g, block=block)


def sensitivity_run(data: InitialData, direction: Field,
                    delta_stop: float = 5e-3, t_end: float | None = None,
                    cfl: float = 0.4, kz_cfl: float = 0.7,
                    eta_floor: float = 1e-6, max_steps: int = 2_000_000,
                    snapshot_times: tuple[float, ...] = (),
                    ) -> tuple[LagrangianState, SensitivityState, list]:
    """Co-integrate the linearized system along the base run.

    Returns the final base state, the final sensitivity state, and a list
    of (t, SensitivityState) snapshots at the requested times.  A zero
    direction yields identically zero sensitivities.
    """
    p = data.params
    g = data.grid
    N = g.N
    ik = g.wavenumbers()
    base = initialize(data)
    sens = initialize_sensitivity(data, direction)
    Y = np.array(base.block)
    V = np.array(sens.block)
    t = 0.0
    ws = _Workspace(N)
    vtmp = [np.empty((9, N)) for _ in range(4)]
    ywork = np.empty((9, N))
    vwork = np.empty((9, N))
    snaps = []
    remaining = sorted(snapshot_times)

    def both_rhs(Yc, Vc, dY, dV):
        _rhs(Yc, dY, ws.tmp, ik, p.alpha, p.gamma, eta_floor, N, False)
        _var_rhs(Yc, Vc, dY, dV, ws.tmp, ik, p.alpha, p.gamma, N)

    dY = [np.empty((9, N)) for _ in range(4)]
    for it in range(max_steps):
        min_ex = float(np.min(Y[_IEX]))
        while remaining and t >= remaining[0] - 1e-12:
            snaps.append((t, SensitivityState(t=t, grid=g, block=V.copy())))
            remaining.pop(0)
        if min_ex <= delta_stop or (t_end is not None and t >= t_end - 1e-14):
            break
        dt = _controller_dt(Y, g.dx, p.alpha, cfl, kz_cfl, False, eta_floor)
        if t_end is not None:
            dt = min(dt, t_end - t)
        if remaining:
            dt = min(dt, remaining[0] - t + 1e-15)
        both_rhs(Y, V, dY[0], vtmp[0])
        np.multiply(dY[0], 0.5 * dt, out=ywork); ywork += Y
        np.multiply(vtmp[0], 0.5 * dt, out=vwork); vwork += V
        both_rhs(ywork, vwork, dY[1], vtmp[1])
        np.multiply(dY[1], 0.5 * dt, out=ywork); ywork += Y
        np.multiply(vtmp[1], 0.5 * dt, out=vwork); vwork += V
        both_rhs(ywork, vwork, dY[2], vtmp[2])
        np.multiply(dY[2], dt, out=ywork); ywork += Y
        np.multiply(vtmp[2], dt, out=vwork); vwork += V
        both_rhs(ywork, vwork, dY[3], vtmp[3])
        Y = Y + (dt / 6.0) * (dY[0] + 2.0 * dY[1] + 2.0 * dY[2] + dY[3])
        V = V + (dt / 6.0) * (vtmp[0] + 2.0 * vtmp[1] + 2.0 * vtmp[2] + vtmp[3])
        t += dt
    else:
        raise NearBlowup("max_steps exhausted in sensitivity run")

    final = LagrangianState(t=t, params=p, grid=g, block=Y)
    return final, SensitivityState(t=t, grid=g, block=V), snaps
