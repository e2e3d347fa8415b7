import numpy as np
import pytest

from rbeig.fem import assemble
from rbeig.mesh import beam3, build_mesh
from rbeig.parameter import ParameterDomain

COARSE_H = 1 / 8  # 414 DOFs: small enough for dense oracles


@pytest.fixture(scope="session")
def coarse_mesh():
    return build_mesh(beam3(COARSE_H))


@pytest.fixture(scope="session")
def coarse_op(coarse_mesh):
    return assemble(coarse_mesh)


@pytest.fixture(scope="session")
def beam_domain():
    return ParameterDomain.isotropic(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_op():
    return assemble(build_mesh(beam3()))


@pytest.fixture(scope="session")
def double_mu(desk_op):
    """Mirror-symmetric beam parameter where lambda_2 = lambda_3 on the desk mesh."""
    from rbeig.experiments import beam_symmetric_path, locate_multiple_eigenvalue

    t, mu, gap = locate_multiple_eigenvalue(desk_op, beam_symmetric_path(), (40.0, 80.0), 1)
    assert gap < 1e-8, gap
    return mu


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion (echoed in the terminal summary)."""

    def log(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
