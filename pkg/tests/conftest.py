import numpy as np
import pytest

from hybridopf.cases import load_case
from hybridopf.grid import AcBranch, Bus, DcBranch, Generator, Grid
from hybridopf.opf import solve_opf


@pytest.fixture(scope="session")
def case1():
    return load_case("pjm5_hybrid")


@pytest.fixture(scope="session")
def case2():
    return load_case("pjm5_hybrid_case2")


@pytest.fixture(scope="session")
def ac_case():
    return load_case("pjm5_ac")


@pytest.fixture(scope="session")
def solved1(case1):
    return solve_opf(case1.grid, case1.weights)


@pytest.fixture(scope="session")
def solved2(case2):
    return solve_opf(case2.grid, case2.weights)


def two_bus_grid(load_p=50.0, load_q=10.0, cost=20.0, z=0.01 + 0.05j, rating=200.0):
    """Generator at bus 0 feeding a load at bus 1 over a single line."""
    buses = [
        Bus(1, 0.95, 1.05, gen=Generator(0.0, 300.0, -200.0, 200.0, cost)),
        Bus(2, 0.95, 1.05, load_p=load_p, load_q=load_q),
    ]
    br = AcBranch(1, 0, 1, z, 0.01j, 0.01j, rating=rating)
    return Grid(100.0, buses, [br], [], ref_bus=0)


def random_admissible_branch(rng, from_bus=0, to_bus=1):
    """Branch satisfying all electrical conditions, with random ratios and bounds."""
    r, x = rng.uniform(1e-3, 0.05), rng.uniform(1e-3, 0.3)
    z = complex(r, x)
    y = 1 / z
    shunts = [1j * rng.uniform(0, 0.5) * abs(y) * 0.1 for _ in range(2)]
    rho_arg = rng.uniform(-np.pi / 3, np.pi / 3)
    split = rng.uniform(0, 1)
    ratio_from = rng.uniform(0.9, 1.1) * np.exp(-1j * rho_arg * split)
    ratio_to = rng.uniform(0.9, 1.1) * np.exp(1j * rho_arg * (1 - split))
    # angle bounds must bracket -arg(rho)
    lo = -rho_arg - rng.uniform(0.05, np.pi / 2 - abs(rho_arg) - 0.01)
    hi = -rho_arg + rng.uniform(0.05, np.pi / 2 - abs(rho_arg) - 0.01)
    lo, hi = max(lo, -np.pi / 2 + 1e-3), min(hi, np.pi / 2 - 1e-3)
    return AcBranch(1, from_bus, to_bus, z, shunts[0], shunts[1], ratio_from, ratio_to,
                    rating=rng.uniform(50, 800), drop_min=-rng.uniform(0.01, 0.2), drop_max=rng.uniform(0.01, 0.2),
                    angle_min=lo, angle_max=hi)


def line_grid(branches, n_bus, dc=()):
    buses = [Bus(n + 1, gen=Generator(0, 100, -100, 100, 10.0 + n)) for n in range(n_bus)]
    return Grid(100.0, buses, branches, dc)
