import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger JIT compilation so timed tests measure the runs only."""
    from pm_slowtime import GridFunction, IntegratorOptions, integrate_discrete

    u0 = GridFunction(8, np.linspace(-1.0, 1.0, 8))
    integrate_discrete(u0, 1e-4, IntegratorOptions(sample_dt=1e-4))
    return True
