"""Shared test fixtures."""

import numpy as np
import pytest

from coexsim.waveform import PrototypeFilter, WaveformSpec, phydyas_prototype

# Small numerology keeps Monte Carlo runs fast; full-size runs are marked slow.
SMALL_M = 64


# ---------------------------------------------------------------------------
# Waveform specs
# ---------------------------------------------------------------------------


@pytest.fixture()
def cp_spec() -> WaveformSpec:
    """CP-OFDM with M=64 and an 8-sample cyclic prefix."""
    return WaveformSpec.cp_ofdm(SMALL_M, 8)


@pytest.fixture()
def oqam_spec() -> WaveformSpec:
    """OFDM/OQAM with M=64 and K=4."""
    return WaveformSpec.oqam(SMALL_M, 4)


@pytest.fixture()
def prototype(oqam_spec: WaveformSpec) -> PrototypeFilter:
    return phydyas_prototype(oqam_spec.num_subcarriers, oqam_spec.overlap)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
