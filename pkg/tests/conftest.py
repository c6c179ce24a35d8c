import pytest

from parsim.acquisition import plan_scan
from parsim.phantom import PhantomSpec, default_spectra, generate_phantom


@pytest.fixture(scope="session")
def spectra():
    return default_spectra()


@pytest.fixture(scope="session")
def small_phantom():
    return generate_phantom(PhantomSpec(width_um=60, height_um=60, resolution_um=0.5,
                                        nucleus_count=20, seed=3))


@pytest.fixture
def point_plan():
    return plan_scan("mechanical", 20, step_um=1.0, rep_rate_hz=1000, wavelengths_nm=(250,),
                     pulse_energy_nj=10.0)
