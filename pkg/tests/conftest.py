import pytest

from twinadapt.autodiff import set_debug_checks


@pytest.fixture(scope="session", autouse=True)
def _debug_checks():
    # Non-finite forward outputs fail loudly throughout the suite.
    set_debug_checks(True)
    yield
    set_debug_checks(False)
