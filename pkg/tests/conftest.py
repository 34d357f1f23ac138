import pytest

from bpve.env import FIXTURES, fixture

NONDEGENERATE = ("E_star", "E_minus", "E_tri_up", "E_tri_down")


@pytest.fixture
def e_star():
    return fixture("E_star")


@pytest.fixture
def e_minus():
    return fixture("E_minus")


@pytest.fixture
def e_tri_up():
    return fixture("E_tri_up")


@pytest.fixture
def e_tri_down():
    return fixture("E_tri_down")


@pytest.fixture
def e_deg():
    return fixture("E_deg")


@pytest.fixture(params=sorted(FIXTURES))
def any_env(request):
    """Each built-in fixture in turn."""
    return fixture(request.param)


@pytest.fixture(params=NONDEGENERATE)
def nondeg_env(request):
    """The four fixtures whose radius products stay bounded."""
    return fixture(request.param)
