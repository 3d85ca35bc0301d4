import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hessmc import forward as fwd
from hessmc.mesh import Mesh2D
from hessmc.prior import AnisotropyTensor, build_prior

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def spd_matrix(n, rng, shift=1.0):
    B = rng.standard_normal((n, n))
    return B @ B.T + shift * np.eye(n)


@pytest.fixture(scope="session")
def small_mesh():
    return Mesh2D(6, 4, 2.0, 1.0)


@pytest.fixture(scope="session")
def small_prior(small_mesh):
    return build_prior(small_mesh, 1.0, 1.0, AnisotropyTensor(0.018, 0.97, 1.017 * np.pi), mean=33.0)


@pytest.fixture(scope="session")
def small_problem(small_mesh):
    rate = 4.9787e-4
    return fwd.DarcyProblem(
        small_mesh,
        length_unit=111.565,
        wells=(fwd.Well(0.6, 0.3, rate), fwd.Well(1.4, 0.3, rate)),
        n_t=10,
    )


@pytest.fixture(scope="session")
def small_plan(small_mesh):
    xs, ys = np.linspace(0.15, 1.85, 5), np.array([0.2, 0.55])
    return fwd.ObservationPlan(small_mesh, np.array([(x, y) for y in ys for x in xs]))


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the lines are printed in the terminal summary."""

    def record(number, title, ok, detail):
        ACCEPTANCE[number] = (title, bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {number:>2}. {title}: {detail}")
