import numpy as np
import pytest

from preshock import burgers as bg
from preshock import cusp
from preshock import singularity as sing
from preshock import solver
from preshock.errors import FitDegenerate, InconsistentTimes


def synthetic_profile(fn, n=1, y_star=0.0, m=4001, width=1e-3, x_star=0.0):
    y = y_star + np.linspace(-width, width, m)
    y = y[np.abs(y - y_star) > 0]
    w = fn(y - y_star)
    return cusp.EulerianProfile(x=np.linspace(-0.4, 0.4, y.size), y=y, w=w,
                                z=np.zeros_like(y), k=np.zeros_like(y),
                                dy_z=np.zeros_like(y), dy_k=np.zeros_like(y),
                                y_star=y_star, x_star=x_star, T_star=1.0,
                                n=n, C0=16.0, dx=2 * width / m)


def test_exact_model_class_recovered():
    # w = 7 - 2 s lies exactly in the fit basis
    prof = synthetic_profile(lambda d: 7.0 - 2.0 * np.cbrt(d), n=1)
    fit = cusp.fit_cusp(prof, window=(1e-9, 9e-4))
    assert fit.b0 == pytest.approx(7.0, abs=1e-12)
    assert fit.b1 == pytest.approx(-2.0, abs=1e-9)
    assert abs(fit.b2) < 1e-6


def test_exact_cusp_n1_fit():
    # the linear +y term of the exact profile is outside the fractional
    # basis; it biases the coefficients at the window scale y^(2/3) ~ 2e-3
    c = bg.exact_cusp(1)
    prof = synthetic_profile(lambda d: c(d), n=1)
    fit = cusp.fit_cusp(prof, window=(1e-9, 1e-4))
    assert fit.b0 == pytest.approx(0.0, abs=1e-6)
    assert fit.b1 == pytest.approx(-3.0 ** (1.0 / 3.0), rel=5e-3)
    assert abs(fit.b2) < 0.05


@pytest.mark.parametrize("beta_n", [1, 2, 3])
def test_exponent_calibration(beta_n):
    beta = 1.0 / (2 * beta_n + 1)
    prof = synthetic_profile(
        lambda d: 1.0 - 1.5 * np.sign(d) * np.abs(d) ** beta, n=beta_n)
    expo = cusp.holder_exponent(prof, beta_n, window=(1e-9, 9e-4), b0=1.0)
    assert expo == pytest.approx(beta, abs=0.005)


def test_exact_cusp_n2_exponent():
    c = bg.exact_cusp(2)
    prof = synthetic_profile(lambda d: c(d), n=2)
    expo = cusp.holder_exponent(prof, 2, window=(1e-10, 1e-5), b0=0.0)
    assert expo == pytest.approx(0.2, abs=0.01)


def test_profile_at_time_zero(reduction_n1):
    st = solver.initialize(reduction_n1)
    rep = sing.BlowupReport(
        x_star=0.0, T_star=0.0, flatness=2, derivative_table=(0.0, 0.0, 2.0),
        a_hi=1.0 / 3.0, a_lo=0.0, a_lo_max=0.0, f_n=(),
        newton=sing.NewtonDiagnostics(0, (0.0,), 0), t_stop=0.0,
        n=1, alpha=0.5, C0=16.0, in_ball=True, a_hi_lower_ok=True)
    prof = cusp.eulerian_profile(st, rep)
    assert np.array_equal(prof.y, st.grid.nodes)
    assert np.array_equal(prof.w, reduction_n1.w0.values)


def test_inconsistent_times(reduction_stop_n1):
    stop, _ = reduction_stop_n1
    rep = sing.BlowupReport(
        x_star=0.0, T_star=stop.t - 0.1, flatness=2,
        derivative_table=(0.0, 0.0, 2.0), a_hi=1.0 / 3.0, a_lo=0.0,
        a_lo_max=0.0, f_n=(), newton=sing.NewtonDiagnostics(0, (0.0,), 0),
        t_stop=stop.t, n=1, alpha=0.5, C0=16.0, in_ball=True,
        a_hi_lower_ok=True)
    with pytest.raises(InconsistentTimes):
        cusp.eulerian_profile(stop, rep)


def test_fit_degenerate_on_tiny_window(reduction_stop_n1):
    stop, _ = reduction_stop_n1
    flow = sing.extend(stop)
    rep = sing.build_report(flow)
    prof = cusp.eulerian_profile(stop, rep)
    with pytest.raises(FitDegenerate):
        cusp.fit_cusp(prof, window=(1e-16, 1e-14))


@pytest.fixture(scope="module")
def reduction_profile_n1(reduction_stop_n1):
    stop, _ = reduction_stop_n1
    flow = sing.extend(stop)
    rep = sing.build_report(flow)
    return cusp.eulerian_profile(stop, rep), rep, stop


def test_reduction_profile_matches_exact_cusp(reduction_profile_n1):
    # Euler with z0 = k0 = 0 is Burgers at speed (1+alpha)/2 up to the core
    # shape; near the pre-shock w(y, T*) - b0 follows the prototype cusp
    prof, rep, _ = reduction_profile_n1
    c = bg.exact_cusp(1)
    mask = (np.abs(prof.y - prof.y_star) < 1e-5) \
        & (np.abs(prof.y - prof.y_star) > 1e-9)
    dy = prof.y[mask] - prof.y_star
    got = prof.w[mask] - 2.5
    # exact_cusp is stated at unit speed: rescale time by (1+alpha)/2
    # w(y, T) - w* = -(3 y')^(1/3) + y' with y' = y - y*
    exact = c(dy)
    assert np.max(np.abs(got - exact)) < 2e-6


def test_fit_on_reduction_run(reduction_profile_n1):
    prof, rep, _ = reduction_profile_n1
    fit = cusp.fit_cusp(prof, min_side=10)  # N = 1024 holds few window nodes
    assert fit.b1 == pytest.approx(-3.0 ** (1.0 / 3.0), rel=0.01)
    assert fit.b0 == pytest.approx(2.5, abs=1e-4)
    assert fit.holder_exponent_fit == pytest.approx(1.0 / 3.0, abs=0.01)
    assert fit.delta_out <= cusp.theorem_window(1, 16.0)
    assert fit.b1 < 0


def test_puiseux_reconstruct_monomial(reduction_profile_n1):
    prof, rep, stop = reduction_profile_n1
    import dataclasses
    rep0 = dataclasses.replace(rep, a_lo=0.0)
    dxs, w_pred, bound = cusp.puiseux_reconstruct(rep0, 1e-8, stop)
    assert dxs == pytest.approx((1e-8 / rep.a_hi) ** (1.0 / 3.0), rel=1e-12)


def test_reconstruct_matches_exact(reduction_profile_n1):
    prof, rep, stop = reduction_profile_n1
    ys = np.linspace(-4e-6, 4e-6, 41)
    ys = ys[np.abs(ys) > 1e-9]
    for dy in ys:
        dxs, w_pred, _ = cusp.puiseux_reconstruct(rep, float(dy), stop)
        exact = 2.5 + bg.exact_cusp(1)(dy)
        assert abs(w_pred - exact) < 1e-6


def test_fit_vs_reconstructed_b1(reduction_profile_n1):
    prof, rep, stop = reduction_profile_n1
    fit = cusp.fit_cusp(prof, min_side=10)
    b1r = cusp.reconstructed_b1(rep, stop)
    assert abs(fit.b1 - b1r) <= 0.01 * abs(b1r)


def test_zk_profiles_stay_smooth(generic_run_n1):
    data, stop, _ = generic_run_n1
    flow = sing.extend(stop)
    rep = sing.build_report(flow)
    prof = cusp.eulerian_profile(stop, rep)
    # first derivatives of z and k show no power-law blowup near y*:
    # the slope of log|dy_z| against log|y - y*| stays above -0.02
    dy = np.abs(prof.y - prof.y_star)
    mask = (dy > 1e-8) & (dy < 1e-3) & (np.abs(prof.dy_z) > 0)
    ly, lz = np.log(dy[mask]), np.log(np.abs(prof.dy_z[mask]))
    slope = np.polyfit(ly, lz, 1)[0]
    assert slope >= -0.02
    mask = (dy > 1e-8) & (dy < 1e-3) & (np.abs(prof.dy_k) > 0)
    slope_k = np.polyfit(np.log(dy[mask]), np.log(np.abs(prof.dy_k[mask])), 1)[0]
    assert slope_k >= -0.02


def test_profile_csv(tmp_path, reduction_profile_n1):
    prof, _, _ = reduction_profile_n1
    path = tmp_path / "profile.csv"
    prof.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "y,w,z,k"
