import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbc.certify import (
    Certificate,
    CertificateError,
    admissible,
    check_conditions,
    finite_bound,
    horizon_ct,
    horizon_dt,
    monte_carlo_safety,
    noise_bound_margin,
    recover,
    sample_admissible,
)
from rcbc.data import Box
from rcbc.poly import PolyMatrix
from rcbc.synth import assemble_dt, solve
from rcbc.system import DisturbanceSampler, TimeKind, make_rng

from conftest import Toy, toy_system


def quad_cert(gamma_i=1.0, gamma_u=10.0, delta=0.0, lam=0.5, K=0.0, kind=TimeKind.DISCRETE, mu=None):
    return Certificate(P=np.eye(1), K=PolyMatrix.from_coeffs(1, {(0,): np.array([[K]])}), gamma_i=gamma_i,
                       gamma_u=gamma_u, delta=delta, lam=lam if kind is TimeKind.DISCRETE else None,
                       time_kind=kind, mu=mu)


@pytest.fixture(scope="module")
def toy_cert():
    t = Toy(seed=0, T=3)
    out = solve(assemble_dt(t.dc(), t.pi(), t.dicts, t.cfg, t.noise))
    assert out.feasible
    return t, recover(out.values, TimeKind.DISCRETE, t.cfg.lam, t.cfg.mu, "pi", 3, 0)


# ---- recovery


def test_recover_scalar_inverses():
    vals = {"Pbar": 2 * np.eye(3), "Kbar": PolyMatrix.zeros(3, 1, 3), "gamma_i_bar": 4.0,
            "gamma_u_bar": 2.0, "delta_bar": 10.0}
    c = recover(vals, TimeKind.DISCRETE, 0.99, 0.01)
    np.testing.assert_allclose(c.P, 0.5 * np.eye(3))
    assert (c.gamma_i, c.gamma_u, c.delta) == (0.25, 0.5, 0.1)
    assert not np.any(c.controller(np.ones(3)))
    assert c.recovery_error() < 1e-15


def test_recover_rejects_indefinite_pbar():
    vals = {"Pbar": np.diag([1.0, -1.0]), "Kbar": PolyMatrix.zeros(2, 1, 2), "gamma_i_bar": 1.0,
            "gamma_u_bar": 1.0, "delta_bar": 1.0}
    with pytest.raises(CertificateError):
        recover(vals, TimeKind.DISCRETE, 0.9)


@settings(max_examples=40)
@given(st.integers(0, 2**31 - 1))
def test_recovery_identities_hold(seed):
    r = np.random.default_rng(seed)
    L = r.standard_normal((3, 3))
    Pbar = L @ L.T + 0.5 * np.eye(3)
    Kbar = PolyMatrix.from_coeffs(3, {(0, 0, 0): r.standard_normal((2, 3)), (1, 0, 0): r.standard_normal((2, 3))})
    vals = {"Pbar": Pbar, "Kbar": Kbar, "gamma_i_bar": 3.0, "gamma_u_bar": 1.0, "delta_bar": 7.0}
    c = recover(vals, TimeKind.CONTINUOUS)
    np.testing.assert_allclose(c.P @ Pbar, np.eye(3), atol=1e-9)
    x = r.standard_normal(3)
    np.testing.assert_allclose(c.K.evaluate(x), Kbar.evaluate(x) @ c.P, rtol=1e-10, atol=1e-12)
    assert c.recovery_error() <= 1e-8


def test_certificate_json_round_trip(toy_cert):
    _, c = toy_cert
    back = Certificate.loads(c.dumps())
    assert back.dumps() == c.dumps()
    np.testing.assert_array_equal(back.P, c.P)


def test_certificate_rejects_foreign_json():
    with pytest.raises(CertificateError):
        Certificate.loads('{"format": "something-else"}')


# ---- horizons


def test_lorenz_row_is_infinite():
    assert horizon_dt(6.71e6, 1.19e7, 2.79e3, 0.99).kind == "infinite"


@pytest.mark.parametrize("gi,gu,d", [(6.71e6, 1.19e7, 2.79e3), (7.19e5, 9.46e5, 6.02e3), (1.40e7, 1.83e7, 8.95e3)])
def test_discrete_rows_infinite(gi, gu, d):
    assert horizon_dt(gi, gu, d, 0.99).kind == "infinite"


def test_zero_delta_always_infinite():
    assert horizon_dt(1.0, 1.0 + 1e-9, 0.0, 0.3).kind == "infinite"


def test_finite_discrete_horizon_by_brute_force():
    v = horizon_dt(1.0, 2.0, 1.2, 0.5)
    assert v.kind == "finite" and v.T >= 1
    # independent scan of the bound
    ok = [T for T in range(1, 200) if 1.2 <= finite_bound(1.0, 2.0, 0.5, T)]
    assert v.T == max(ok)


@settings(max_examples=200)
@given(st.floats(0.05, 0.95), st.floats(0.01, 0.9), st.floats(1.01, 20.0))
def test_discrete_horizon_is_maximal(lam, frac, scale):
    gi, gu = frac, 1.0
    limit = gu * (1 - lam)
    delta = limit * scale
    v = horizon_dt(gi, gu, delta, lam)
    if v.kind == "finite":
        T = int(v.T)
        assert delta <= finite_bound(gi, gu, lam, T)
        assert delta > finite_bound(gi, gu, lam, T + 1)
    else:
        assert v.kind == "invalid" and delta > finite_bound(gi, gu, lam, 1)


def test_chen_horizon():
    v = horizon_ct(3.43e5, 9.14e5, 2.67e3)
    assert v.T == pytest.approx(213.857, abs=1e-3)
    assert v.display == "213"


def test_ct_horizon_unit():
    assert horizon_ct(5.0, 7.0, 2.0).T == 1.0


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_ct_horizon_decreases_in_delta(d1, d2):
    if d1 < d2:
        assert horizon_ct(1.0, 3.0, d1).T > horizon_ct(1.0, 3.0, d2).T


# ---- sampled conditions


def test_quadratic_barrier_tight_initial_set():
    t = Toy()
    rep = check_conditions(quad_cert(gamma_u=9.0), t.sys.dict_M, t.sys.Q, [Box((-1.0,), (1.0,))],
                           [Box((3.0,), (5.0,))], t.noise, count=2000, truth=t.sys.Omega * 0)
    assert rep.conditions["initial"].worst_margin == pytest.approx(0.0, abs=1e-12)
    assert rep.conditions["initial"].passed(rep.tol)


def test_quadratic_barrier_unsafe_violation_has_witness():
    t = Toy()
    rep = check_conditions(quad_cert(gamma_u=10.0), t.sys.dict_M, t.sys.Q, [Box((-1.0,), (1.0,))],
                           [Box((3.0,), (5.0,)), Box((-5.0,), (-3.0,))], t.noise, count=2000, truth=t.sys.Omega)
    u = rep.conditions["unsafe"]
    assert not u.passed(rep.tol)
    assert u.worst_margin == pytest.approx(-1.0)
    assert abs(u.witness[0]) == 3.0
    assert not rep.passed


def test_toy_certificate_passes_sampled_conditions(toy_cert):
    t, c = toy_cert
    rep = check_conditions(c, t.sys.dict_M, t.sys.Q, [Box((-1.0,), (1.0,))], [Box((2.0,), (4.0,))], t.noise,
                           count=10_000, dc=t.dc(), pi=t.pi(), truth=t.sys.Omega)
    assert rep.passed, rep.to_json()
    assert not rep.notes


def test_corrupted_level_fails(toy_cert):
    t, c = toy_cert
    bad = Certificate.loads(c.dumps())
    bad.gamma_u = 2.0 * float(c.B(np.array([4.0])))  # level above every unsafe sample
    rep = check_conditions(bad, t.sys.dict_M, t.sys.Q, [Box((-1.0,), (1.0,))], [Box((2.0,), (4.0,))], t.noise,
                           count=1000, truth=t.sys.Omega)
    assert not rep.conditions["unsafe"].passed(rep.tol)
    assert rep.conditions["unsafe"].witness is not None
    assert not rep.passed


def test_noise_bound_holds_for_toy(toy_cert):
    t, c = toy_cert
    assert noise_bound_margin(c, t.noise, 10_000) >= -1e-9 * c.gamma_u


# ---- admissible matrices


def test_truth_is_admissible(toy_cert):
    t, _ = toy_cert
    assert admissible(t.sys.Omega, t.dc(), t.pi())


def test_far_matrix_is_not_admissible(toy_cert):
    t, _ = toy_cert
    assert not admissible(t.sys.Omega + 1.0, t.dc(), t.pi())


def test_sampled_matrices_are_admissible(toy_cert):
    t, _ = toy_cert
    mats = sample_admissible(t.dc(), t.pi(), 20, make_rng(0), n=1)
    assert len(mats) == 20
    for M in mats:
        assert admissible(M, t.dc(), t.pi(), rtol=1e-7)


# ---- Monte Carlo


def test_toy_monte_carlo_safe_and_recursion(toy_cert):
    t, c = toy_cert
    rep = monte_carlo_safety(c, t.sys, [Box((-1.0,), (1.0,))], [Box((2.0,), (4.0,)), Box((-4.0,), (-2.0,))],
                             t.dist, runs=200, step_cap=300)
    mc = rep.monte_carlo
    assert mc.safe == 200 and mc.diverged == 0
    assert mc.recursion_margin >= -1e-6 * c.gamma_u


def test_zero_controller_on_unstable_plant_reports_violation():
    s = toy_system(np.array([[1.5, 0.0]]))
    rep = monte_carlo_safety(quad_cert(gamma_u=4.0), s, [Box((0.5,), (1.0,))], [Box((2.0,), (1e9,))],
                             DisturbanceSampler.zero(1), runs=20, step_cap=50)
    mc = rep.monte_carlo
    assert mc.safe == 0
    assert mc.first_violation["step"] >= 1
    assert not rep.passed


def test_zero_controller_on_chen_fails():
    from rcbc.system import IntegrationConfig, nominal_benchmark

    c = Certificate(P=np.eye(3), K=PolyMatrix.zeros(3, 3, 3), gamma_i=12.0, gamma_u=50.0, delta=1.0, lam=None,
                    time_kind=TimeKind.CONTINUOUS)
    Xu = [Box.from_intervals([[-10, -6], [-10, -6], [-10, 10]]), Box.from_intervals([[-10, 10], [6, 10], [6, 10]]),
          Box.from_intervals([[5, 10], [5, 10], [-10, -5]])]
    rep = monte_carlo_safety(c, nominal_benchmark("chen"), [Box.from_intervals([[-2, 2]] * 3)], Xu,
                             DisturbanceSampler.zero(3), runs=20, time_cap=20.0, integ=IntegrationConfig(1e-3, 1e-2))
    assert rep.monte_carlo.safe < 20
