import numpy as np
import pytest

from preshock.core import Field, Grid, Params
from preshock import initial_data as idata
from preshock import manifold
from preshock.errors import LeftParameterBox

CFG = manifold.PipelineConfig()


@pytest.fixture(scope="module")
def params_n2():
    return Params(gamma=2.0, n=2, epsilon=1e-3, C0=16.0)


@pytest.fixture(scope="module")
def mgrid():
    return Grid(1024)


@pytest.fixture(scope="module")
def manifold_point(params_n2, mgrid):
    wt, z0, k0 = idata.random_admissible(params_n2, mgrid, seed=21,
                                         box_epsilon=params_n2.epsilon**2,
                                         margin=0.3)
    return manifold.solve_lambda(wt, z0, k0, params_n2, mgrid), (wt, z0, k0)


def test_fn_vanishes_for_burgers_specialization(params_n2, mgrid):
    data = idata.reduction_data(Params(gamma=2.0, n=2, epsilon=0.0, C0=16.0),
                                mgrid)
    f = manifold.f_n(data, CFG)
    assert np.max(np.abs(f)) < 1e-7  # odd-order parity of the core profile


def test_lambda_direction_response(params_n2, mgrid):
    # a pure lambda_1 perturbation moves f_1 by about (1+alpha) T/2 * delta
    zeros = Field(mgrid, np.zeros(mgrid.N))
    delta = 1e-6
    d0 = idata.assemble(zeros, zeros, zeros, (0.0, 0.0), params_n2, mgrid)
    d1 = idata.assemble(zeros, zeros, zeros, (delta, 0.0), params_n2, mgrid)
    f0 = manifold.f_n(d0, CFG)
    f1 = manifold.f_n(d1, CFG)
    scale = 0.75 * (4.0 / 3.0)  # (1+alpha)/2 * T with T ~ 2/(1+alpha)
    assert (f1[0] - f0[0]) / delta == pytest.approx(scale, rel=0.05)


def test_solve_from_zero_perturbation(params_n2, mgrid):
    zeros = Field(mgrid, np.zeros(mgrid.N))
    point = manifold.solve_lambda(zeros, zeros, zeros, params_n2, mgrid)
    assert np.max(np.abs(point.lambda_star)) < 10.0 * params_n2.epsilon**2
    assert point.residual <= 1e-8


def test_manifold_point_properties(manifold_point, params_n2):
    point, _ = manifold_point
    assert point.residual <= 1e-8
    assert len(point.residual_history) <= 10
    assert point.report.flatness == 4
    # lambda stays inside the admissible box
    Ln = point.data.basis.Ln
    assert Ln * sum(abs(v) for v in point.lambda_star) < params_n2.epsilon / 2
    # the defining equations hold at the located pre-shock
    assert abs(point.report.derivative_table[1]) <= 1e-8
    assert abs(point.report.derivative_table[2]) <= 1e-8


def test_contraction_certificate(manifold_point):
    point, _ = manifold_point
    hist = point.residual_history
    for a, b in zip(hist, hist[1:]):
        assert a / b >= 3.0


def test_scaled_jacobian_near_identity(manifold_point):
    point, _ = manifold_point
    assert point.scaled_jacobian_defect <= 1.0 / 3.0


def test_jacobian_modes_agree(manifold_point, params_n2, mgrid):
    point, (wt, z0, k0) = manifold_point
    fd = manifold.solve_lambda(wt, z0, k0, params_n2, mgrid,
                               jacobian_mode="finite_difference")
    assert np.max(np.abs(np.array(fd.lambda_star)
                         - np.array(point.lambda_star))) < 1e-7


def test_left_parameter_box(params_n2, mgrid):
    # seeds at the full epsilon box force lambda* outside Lambda_n
    wt, z0, k0 = idata.random_admissible(params_n2, mgrid, seed=21, margin=0.5)
    with pytest.raises(LeftParameterBox):
        manifold.solve_lambda(wt, z0, k0, params_n2, mgrid,
                              wtilde_radius=params_n2.epsilon)


def test_lambda_map_lipschitz(manifold_point, params_n2, mgrid):
    # perturbing wtilde0 moves lambda* by a bounded factor (reported)
    point, (wt, z0, k0) = manifold_point
    delta = 5e-9
    bump = idata.project_to_Xn(
        delta * np.cos(2 * np.pi * mgrid.nodes), 2, 16.0, mgrid)
    wt2 = Field(mgrid, wt.values + bump)
    point2 = manifold.solve_lambda(wt2, z0, k0, params_n2, mgrid)
    move = np.max(np.abs(np.array(point2.lambda_star)
                         - np.array(point.lambda_star)))
    K = move / delta
    assert np.isfinite(K) and K < 50.0


def test_sensitivity_mode_jacobian_agrees(manifold_point, params_n2, mgrid):
    # the variational-solver Jacobian must match the finite-difference one
    point, _ = manifold_point
    J_var = manifold._sensitivity_jacobian(point.data, point.report, CFG)
    J_fd = np.array(point.jacobian)
    assert np.max(np.abs(J_var - J_fd)) < 1e-3 * np.max(np.abs(J_fd))


def test_manifold_point_json(manifold_point):
    import json
    point, _ = manifold_point
    doc = json.loads(point.to_json())
    assert doc["lambda_star"] == list(point.lambda_star)
    assert doc["residual"] <= 1e-8
    assert len(doc["jacobian"]) == 2
    assert doc["report"]["flatness"] == 4


def test_n1_returns_empty_lambda(params_n1, grid1024):
    wt, z0, k0 = idata.random_admissible(params_n1, grid1024, seed=7)
    point = manifold.solve_lambda(wt, z0, k0, params_n1, grid1024,
                                  wtilde_radius=params_n1.epsilon)
    assert point.lambda_star == ()
    assert point.report.flatness == 2
