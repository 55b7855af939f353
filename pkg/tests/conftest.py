import pytest

from fracpe.gridfn import GridFunction
from fracpe.spectral import Domain, build_basis


@pytest.fixture(scope="session")
def domain():
    return Domain()


@pytest.fixture(scope="session")
def basis42(domain):
    return build_basis(domain, (4, 2))


@pytest.fixture(scope="session")
def basis43(domain):
    return build_basis(domain, (4, 3))


@pytest.fixture(scope="session")
def basis84(domain):
    return build_basis(domain, (8, 4))


def grid_fn(fn, n, t0=0.0, T=1.0):
    dt = (T - t0) / (n - 1)
    return GridFunction.from_callable(fn, t0, dt, n)
