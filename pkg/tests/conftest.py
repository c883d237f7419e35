import pathlib

import pytest

from sqzlab import (
    AcquisitionSettings,
    CavityParams,
    DetectionChain,
    PhaseScan,
    PumpSpec,
)

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
CANONICAL_CONFIG = REPO_ROOT / "configs" / "ppktp_795nm.cfg"


@pytest.fixture
def cavity():
    return CavityParams(round_trip_length=0.600, coupler_transmittance=0.10,
                        intracavity_loss=0.0173, nonlinear_efficiency=0.023)


@pytest.fixture
def chain():
    return DetectionChain(quantum_efficiency=0.99, visibility=0.91,
                          circuit_noise_clearance_db=14.0)


@pytest.fixture
def pump_gain():
    return PumpSpec(parametric_gain=5.3)


@pytest.fixture
def acquisition():
    return AcquisitionSettings(center_frequency=1e6, resolution_bandwidth=1e5,
                               video_bandwidth=30.0, sweep_duration=0.2,
                               sample_count=401,
                               lo_scan=PhaseScan(period=0.2, theta0=0.0, jitter_sigma=0.0))


@pytest.fixture
def config_path():
    return CANONICAL_CONFIG
