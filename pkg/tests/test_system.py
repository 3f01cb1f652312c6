import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbc import _pykernels, kernels
from rcbc.data import Box
from rcbc.poly import PolyMatrix
from rcbc.system import (
    BENCHMARKS,
    Controller,
    DisturbanceSampler,
    IntegrationConfig,
    NoiseSpec,
    PerturbSpec,
    SimulationDiverged,
    TimeKind,
    _kernel_args,
    nominal_benchmark,
    perturb_truth,
    rk4_step,
    sample_disturbance,
    simulate_batch,
    simulate_closed_loop,
    step_dt,
    vector_field_ct,
)

from conftest import toy_system


def col(sys, exp):
    return list(sys.dict_M.entries).index(exp)


def test_lorenz_coefficients():
    s = nominal_benchmark("lorenz")
    assert (s.n, s.m, s.q, s.l) == (3, 9, 1, 1)
    assert s.A[0, col(s, (1, 0, 0))] == pytest.approx(0.8)
    assert s.A[0, col(s, (0, 1, 0))] == pytest.approx(0.2)


def test_spacecraft_gyroscopic_coefficient():
    s = nominal_benchmark("spacecraft")
    assert s.A[0, col(s, (0, 1, 1))] == pytest.approx(-0.012)


def test_chen_coefficients():
    s = nominal_benchmark("chen")
    assert s.time_kind is TimeKind.CONTINUOUS
    assert s.A[0, col(s, (1, 0, 0))] == -35
    assert s.A[0, col(s, (0, 1, 0))] == 35
    np.testing.assert_array_equal(s.B, np.eye(3))


def test_higher_degree_uses_all_cubic_monomials():
    s = nominal_benchmark("higher_degree")
    assert (s.m, s.q) == (19, 3)


def test_unknown_benchmark():
    with pytest.raises(ValueError, match="unknown benchmark"):
        nominal_benchmark("vanderpol")


# ---- ground truth


def test_zero_perturbation_is_nominal():
    s = nominal_benchmark("lorenz")
    np.testing.assert_array_equal(perturb_truth(s, PerturbSpec([0, 0], 0, 3)).Omega, s.Omega)


def test_lorenz_perturbation_inside_physics_ball():
    s = nominal_benchmark("lorenz")
    t = perturb_truth(s, PerturbSpec(0.0025, 0, seed=1))
    assert np.linalg.norm(t.Omega - s.Omega, 2) <= 0.1
    # every entry moves, zeros included
    assert np.all(t.Omega != s.Omega)


def test_perturbation_is_deterministic():
    s = nominal_benchmark("spacecraft")
    a = perturb_truth(s, PerturbSpec(0.01, 0, seed=7)).Omega
    b = perturb_truth(s, PerturbSpec(0.01, 0, seed=7)).Omega
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, perturb_truth(s, PerturbSpec(0.01, 0, seed=8)).Omega)


# ---- one-step dynamics


def test_lorenz_step():
    np.testing.assert_allclose(step_dt(nominal_benchmark("lorenz"), [1, 0, 0], [0]), [0.8, 0.56, 0], atol=1e-15)


def test_spacecraft_step():
    np.testing.assert_allclose(step_dt(nominal_benchmark("spacecraft"), [1, 1, 1], [0, 0, 0]),
                               [0.988, 1.016, 1 + 0.02 * (0.5 - 1.0) / 1.3], rtol=1e-14)


def test_chen_field():
    np.testing.assert_array_equal(vector_field_ct(nominal_benchmark("chen"), [1, 0, 0], [0, 0, 0]), [-35, -7, 0])


@pytest.mark.parametrize("name", BENCHMARKS)
def test_origin_is_equilibrium(name):
    s = nominal_benchmark(name)
    f = step_dt if s.time_kind is TimeKind.DISCRETE else vector_field_ct
    np.testing.assert_array_equal(f(s, np.zeros(3), np.zeros(s.l)), 0)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_disturbance_enters_additively(seed):
    r = np.random.default_rng(seed)
    s = nominal_benchmark("chen")
    x, u, w = r.standard_normal(3), r.standard_normal(3), r.standard_normal(3)
    np.testing.assert_allclose(vector_field_ct(s, x, u, w) - vector_field_ct(s, x, u), w, atol=1e-12)


def test_rk4_on_linear_decay():
    # dx/dt = -x ; fourth order so 100 steps of 0.01 land within 1e-9 of e^-1
    x = np.array([1.0])
    for _ in range(100):
        x = rk4_step(lambda z: -z, x, 0.01)
    assert abs(x[0] - np.exp(-1)) < 1e-9


# ---- disturbances


def test_corner_outside_noise_ball_rejected():
    noise = NoiseSpec.identity(3, 0.001)
    with pytest.raises(ValueError, match="weighted norm"):
        sample_disturbance(PerturbSpec(0, 0.004, 0), noise)


def test_zero_disturbance():
    d = sample_disturbance(PerturbSpec(0, [0, 0], 0), NoiseSpec.identity(3, 0.1))
    assert d.is_zero
    assert not np.any(d.draw(np.random.default_rng(0), (10,)))


def test_admissible_draws_stay_in_ball():
    noise = NoiseSpec(np.diag([1.0, 2.0, 0.5]), 0.05)
    d = sample_disturbance(PerturbSpec(0, 0.014, 0), noise)
    W = d.draw(np.random.default_rng(1), (100_000,))
    assert np.all(noise.weighted_norm(W) <= 0.05)


# ---- closed loop


def test_zero_state_stays_zero_in_ct():
    s = nominal_benchmark("chen")
    K = PolyMatrix.from_coeffs(3, {(0, 0, 0): -np.eye(3), (1, 0, 0): 0.1 * np.ones((3, 3))})
    tr = simulate_closed_loop(s, Controller(K), np.zeros(3), 0.5, integ=IntegrationConfig(1e-3, 1e-2))
    assert not np.any(tr.X)
    assert tr.X.shape == (51, 3)


def test_simulation_is_deterministic():
    s = nominal_benchmark("spacecraft")
    ctrl = Controller(PolyMatrix.from_coeffs(3, {(0, 0, 0): -5 * np.eye(3)}))
    dist = DisturbanceSampler(np.tile([-0.02, 0.02], (3, 1)))
    a = simulate_closed_loop(s, ctrl, np.ones(3), 50, dist, seed=4)
    b = simulate_closed_loop(s, ctrl, np.ones(3), 50, dist, seed=4)
    assert a.to_csv() == b.to_csv()


def test_divergence_raises():
    s = toy_system(np.array([[3.0, 0.0]]))
    with pytest.raises(SimulationDiverged):
        simulate_closed_loop(s, Controller.zero(1, 1), np.ones(1), 2000)


def test_open_loop_unsafe_entry_detected():
    s = toy_system(np.array([[1.5, 0.0]]))
    traj, bad = simulate_batch(s, Controller.zero(1, 1), np.ones((1, 1)), 10, np.zeros((1, 10, 1)))
    assert bad[0] == -1
    assert Box((5.0,), (100.0,)).contains(traj[0]).any()


@pytest.mark.parametrize("name", BENCHMARKS)
def test_compiled_and_numpy_kernels_agree(name, rng):
    s = nominal_benchmark(name)
    K = PolyMatrix.from_coeffs(3, {(0, 0, 0): -0.05 * rng.standard_normal((s.l, 3))})
    args = _kernel_args(s, Controller(K))
    X0 = rng.uniform(-0.5, 0.5, (8, 3))
    W = rng.uniform(-1e-3, 1e-3, (8, 40, 3))
    if s.time_kind is TimeKind.DISCRETE:
        a, ba = _pykernels.closed_loop_dt(*args, X0, W)
        b, bb = kernels.closed_loop_dt(*args, X0, W)
    else:
        a, ba = _pykernels.closed_loop_ct(*args, X0, W, 1e-3, 10)
        b, bb = kernels.closed_loop_ct(*args, X0, W, 1e-3, 10)
    np.testing.assert_array_equal(ba, bb)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_monomial_kernel_agrees(rng):
    exps = nominal_benchmark("higher_degree").dict_M.exponent_array()
    X = rng.uniform(-3, 3, (500, 3))
    np.testing.assert_allclose(kernels.eval_monomials(exps, X), _pykernels.eval_monomials(exps, X), rtol=1e-14)
