"""Coexsim - CP-OFDM and OFDM/OQAM spectrum coexistence simulator."""

__version__ = "0.1.0"

from coexsim.coexistence import (  # noqa: E402
    GuardBandResult,
    PowerAllocationResult,
    allocate_power,
    guard_band_sweep,
    required_guard_band,
    secondary_capacity_curve,
)
from coexsim.interference import (  # noqa: E402
    InterferenceModel,
    InterferenceTable,
    SpectrumAllocation,
    SyncModel,
    evm_interference_table,
    projection_oracle_table,
    total_interference,
)
from coexsim.psd import PsdEstimate, aggressor_psd, estimate_psd, psd_interference_table, truncated_psd  # noqa: E402
from coexsim.waveform import WaveformKind, WaveformSpec, modulate, phydyas_prototype  # noqa: E402

__all__ = [
    "GuardBandResult",
    "InterferenceModel",
    "InterferenceTable",
    "PowerAllocationResult",
    "PsdEstimate",
    "SpectrumAllocation",
    "SyncModel",
    "WaveformKind",
    "WaveformSpec",
    "__version__",
    "aggressor_psd",
    "allocate_power",
    "estimate_psd",
    "evm_interference_table",
    "guard_band_sweep",
    "modulate",
    "phydyas_prototype",
    "projection_oracle_table",
    "psd_interference_table",
    "required_guard_band",
    "secondary_capacity_curve",
    "total_interference",
    "truncated_psd",
]
