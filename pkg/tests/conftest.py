import pytest

from schrodual import DomainMesh, build_transform, principal_eigenpair, torsion_function
from schrodual.theta import theta1, unit


@pytest.fixture(scope="session")
def t1_spec():
    return theta1()


@pytest.fixture(scope="session")
def unit_spec():
    return unit()


@pytest.fixture(scope="session")
def t1_transform(t1_spec):
    # extends past 1e6 so tail limits are checkable
    return build_transform(t1_spec, s_max=1.1e6, tol=1e-8)


@pytest.fixture(scope="session")
def unit_transform(unit_spec):
    return build_transform(unit_spec, s_max=1e4, tol=1e-8)


@pytest.fixture(scope="session")
def mesh400():
    return DomainMesh.interval(0.0, 1.0, 400, pad=0.1)


@pytest.fixture(scope="session")
def mesh100():
    return DomainMesh.interval(0.0, 1.0, 100, pad=0.1)


@pytest.fixture(scope="session")
def eig400(mesh400):
    return principal_eigenpair(mesh400)


@pytest.fixture(scope="session")
def tor400(mesh400):
    return torsion_function(mesh400)
