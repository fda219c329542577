import pytest

from src.params import Params, validate
from src.spectral import spectrum
from src.typespace import TypeSpace, build, default_epsilon


@pytest.fixture(scope="session")
def simple_params() -> Params:
    """Reference parameters of the Simple region."""
    return validate(0.26, 0.01)


@pytest.fixture(scope="session")
def general_params() -> Params:
    """Reference parameters of the General region."""
    return validate(0.28, 0.05)


@pytest.fixture(scope="session")
def simple_T(simple_params) -> TypeSpace:
    return build(simple_params, default_epsilon(simple_params))


@pytest.fixture(scope="session")
def general_T(general_params) -> TypeSpace:
    return build(general_params, default_epsilon(general_params))


@pytest.fixture(scope="session")
def simple_spectrum(simple_params, simple_T):
    """Kernel matrix and spectral result at the default grid step."""
    return spectrum(simple_params, simple_T, simple_params.t / 10.0)


@pytest.fixture(scope="session")
def general_spectrum(general_params, general_T):
    return spectrum(general_params, general_T, general_params.t / 10.0)
