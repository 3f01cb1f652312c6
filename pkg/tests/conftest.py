import numpy as np
import pytest

from rcbc.data import InputPolicy, collect_dt, dc_blocks, lift, pi_block
from rcbc.poly import MonomialDict, PolyMatrix, factor_C
from rcbc.synth import SynthesisConfig
from rcbc.system import DisturbanceSampler, LiftedSystem, NoiseSpec, TimeKind

TOY_OMEGA = np.array([[1.2, 1.0]])


def toy_system(Omega=TOY_OMEGA, kind=TimeKind.DISCRETE):
    """x+ = a x + b u + w with M(x) = x, Q = 1."""
    return LiftedSystem(MonomialDict(1, ((1,),)), PolyMatrix.identity(1, 1), np.asarray(Omega, float), kind)


def toy_dicts(sys):
    return sys.dict_M, sys.Q, factor_C(sys.dict_M)


class Toy:
    def __init__(self, seed=0, T=3, eps=0.01):
        self.sys = toy_system()
        self.noise = NoiseSpec.identity(1, eps)
        self.dist = DisturbanceSampler(np.array([[-eps, eps]]), np.eye(1), eps)
        self.data = collect_dt(self.sys, [0.5], InputPolicy.symmetric(1, 1.0), T, self.dist, seed=seed)
        self.cfg = SynthesisConfig(lam=0.9, mu=0.1, deg_Kbar=0, deg_kappa=0, r_i=1.0, r_u=2.0)

    def dc(self, T=None):
        d = self.data if T is None else self.data.head(T)
        return dc_blocks(d, lift(d, self.sys.dict_M, self.sys.Q), self.noise)

    def pi(self, eps_Omega=0.05):
        return pi_block(self.sys.Omega, eps_Omega, self.noise)

    @property
    def dicts(self):
        return toy_dicts(self.sys)


@pytest.fixture
def toy():
    return Toy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
