"""Unit tests for PSD estimation and the PSD interference model."""

from __future__ import annotations

import numpy as np
import pytest

from coexsim.errors import ConfigurationError, InputError, RangeError
from coexsim.interference import InterferenceModel, SyncModel
from coexsim.psd import (
    PsdEstimate,
    aggressor_psd,
    estimate_psd,
    psd_interference_table,
    truncated_psd,
)
from coexsim.waveform import SampleBuffer, WaveformSpec, single_subcarrier_burst

M = 64
CP = WaveformSpec.cp_ofdm(M, 8)
CP_NO_PREFIX = WaveformSpec.cp_ofdm(M, 0)
OQAM = WaveformSpec.oqam(M, 4)


def _analytic_cp_ofdm_psd(freqs: np.ndarray, spec: WaveformSpec) -> np.ndarray:
    """Rectangular-pulse PSD of one CP-OFDM subcarrier, density per unit ΔF."""
    length, nfft = spec.symbol_len, spec.num_subcarriers
    num = np.sin(np.pi * freqs * length / nfft) ** 2
    den = np.sin(np.pi * freqs / nfft) ** 2
    return num / (length * nfft**2 * den)


# ===========================================================================
# Estimation
# ===========================================================================


class TestEstimatePsd:
    """estimate_psd on synthetic inputs."""

    def test_white_noise_integrates_to_power(self, rng) -> None:
        noise = (rng.standard_normal(100 * 1024) + 1j * rng.standard_normal(100 * 1024)) / np.sqrt(2)
        est = estimate_psd(SampleBuffer(samples=noise, samples_per_symbol=M))
        assert est.total_power == pytest.approx(1.0, rel=0.02)
        assert est.resolution == pytest.approx(1 / 16)

    def test_tone_lands_on_its_subcarrier(self, rng) -> None:
        est = estimate_psd(single_subcarrier_burst(CP, 200, rng, subcarrier=3))
        assert abs(est.freqs[np.argmax(est.values)] - 3.0) < 0.5

    def test_real_input_gives_symmetric_density(self, rng) -> None:
        est = estimate_psd(SampleBuffer(samples=rng.standard_normal(20 * 1024), samples_per_symbol=M))
        # Index 0 is the Nyquist bin, which has no mirror.
        values = est.values[1:]
        np.testing.assert_allclose(values, values[::-1], rtol=1e-9, atol=1e-15 * values.max())

    def test_matches_rectangular_pulse_spectrum(self) -> None:
        """Main lobe and the first five sidelobe peaks agree with the analytic sinc^2 within 1 dB."""
        est = aggressor_psd(CP, n_symbols=8000, seed=13)
        peaks = [0.0] + [(k + 0.5) * M / CP.symbol_len for k in range(1, 6)]
        for f in peaks:
            expected = _analytic_cp_ofdm_psd(np.array([f + 1e-9]), CP)[0]
            assert abs(10 * np.log10(est.level_at(f) / expected)) < 1.0, f

    def test_segment_longer_than_buffer(self) -> None:
        with pytest.raises(InputError, match="shorter than one segment"):
            estimate_psd(SampleBuffer(samples=np.ones(100), samples_per_symbol=M))

    def test_average_count_must_be_positive(self, rng) -> None:
        buf = SampleBuffer(samples=rng.standard_normal(4096), samples_per_symbol=M)
        with pytest.raises(InputError, match="n_average"):
            estimate_psd(buf, segment_len=256, n_average=0)

    def test_overlap_out_of_range(self, rng) -> None:
        buf = SampleBuffer(samples=rng.standard_normal(4096), samples_per_symbol=M)
        with pytest.raises(InputError, match="overlap_frac"):
            estimate_psd(buf, segment_len=256, overlap_frac=1.0)

    def test_smoothing_keeps_grid(self, rng) -> None:
        est = aggressor_psd(OQAM, n_symbols=200, seed=1)
        smooth = est.smoothed(0.5)
        np.testing.assert_array_equal(smooth.freqs, est.freqs)
        assert smooth.source == OQAM

    def test_negative_density_rejected(self) -> None:
        with pytest.raises(ValueError, match="non-negative"):
            PsdEstimate(
                freqs=np.array([0.0, 1.0]),
                values=np.array([1.0, -1.0]),
                segment_len=2,
                overlap_frac=0.5,
                n_segments=1,
            )


# ===========================================================================
# Truncation by CP-OFDM receive windows
# ===========================================================================


class TestTruncatedPsd:
    """truncated_psd exposes the spreading the PSD model ignores."""

    @pytest.fixture(scope="class")
    def oqam_raw_and_cut(self) -> tuple[PsdEstimate, PsdEstimate]:
        raw = aggressor_psd(OQAM, n_symbols=600, seed=3)
        cut = truncated_psd(OQAM, CP, n_trials=2, seed=3, n_symbols=600)
        return raw, cut

    def test_truncation_raises_filter_bank_sidelobes(self, oqam_raw_and_cut) -> None:
        raw, cut = (est.smoothed(0.5) for est in oqam_raw_and_cut)
        assert 10 * np.log10(cut.level_at(5.0) / raw.level_at(5.0)) > 25

    def test_truncation_never_lowers_a_sidelobe(self, oqam_raw_and_cut) -> None:
        """Past 1.5 dF the truncated density sits above the raw one everywhere."""
        raw, cut = (est.smoothed(0.25) for est in oqam_raw_and_cut)
        np.testing.assert_array_equal(raw.freqs, cut.freqs)
        sidelobes = np.abs(raw.freqs) > 1.5
        assert np.all(cut.values[sidelobes] >= raw.values[sidelobes])

    def test_aligned_prefixless_ofdm_is_unchanged(self) -> None:
        """Without a prefix the aligned windows keep every sample."""
        raw = psd_interference_table(aggressor_psd(CP_NO_PREFIX, n_symbols=4000, seed=5), l_max=5)
        cut = truncated_psd(CP_NO_PREFIX, CP_NO_PREFIX, n_trials=1, seed=6, sync=SyncModel.ALIGNED, n_symbols=4000)
        np.testing.assert_allclose(psd_interference_table(cut, l_max=5).values, raw.values, atol=0.02)

    def test_aligned_windows_strip_the_prefix(self) -> None:
        """With cp_len = 8 on both sides, aligned windows keep exactly the symbol bodies.

        The truncated spectrum is the prefixless CP-OFDM spectrum, so the band
        integrals match that table rather than the one of the prefixed burst,
        whose main lobe is narrowed by the longer symbol.
        """
        prefixless = psd_interference_table(aggressor_psd(CP_NO_PREFIX, n_symbols=4000, seed=5), l_max=5)
        cut = truncated_psd(CP, CP, n_trials=1, seed=6, sync=SyncModel.ALIGNED, n_symbols=4000)
        np.testing.assert_allclose(psd_interference_table(cut, l_max=5).values, prefixless.values, atol=0.02)

    def test_zero_signal_gives_zero_density(self) -> None:
        cut = truncated_psd(OQAM, CP, n_trials=1, seed=1, n_symbols=100, sigma_d2=0.0)
        assert not np.any(cut.values)

    def test_filter_bank_victim_rejected(self) -> None:
        with pytest.raises(ConfigurationError, match="CP-OFDM"):
            truncated_psd(OQAM, OQAM, n_trials=1, n_symbols=100)

    def test_too_few_symbols(self) -> None:
        with pytest.raises(InputError, match="fewer than one segment"):
            truncated_psd(OQAM, CP, n_trials=1, n_symbols=12)


# ===========================================================================
# PSD interference tables
# ===========================================================================


class TestPsdInterferenceTable:
    """psd_interference_table band integration."""

    def test_cp_ofdm_main_lobe_share(self) -> None:
        table = psd_interference_table(aggressor_psd(CP, n_symbols=2000, seed=2), l_max=10)
        assert table.model is InterferenceModel.PSD
        assert table.value(0) > 0.75
        assert table.value(1) == pytest.approx(table.value(-1), rel=0.1)

    def test_filter_bank_is_well_contained(self) -> None:
        table = psd_interference_table(aggressor_psd(OQAM, n_symbols=2000, seed=2), l_max=20)
        assert table.values.sum() == pytest.approx(1.0, abs=1e-3)
        assert table.value(5) < 1e-6
        assert table.aggressor == OQAM

    def test_filter_bank_below_ofdm_away_from_the_carrier(self) -> None:
        """OQAM leaks less than CP-OFDM at |l| >= 2, by at least 10 dB from |l| = 3 on."""
        oqam = psd_interference_table(aggressor_psd(OQAM, n_symbols=2000, seed=2), l_max=20)
        ofdm = psd_interference_table(aggressor_psd(CP, n_symbols=2000, seed=2), l_max=20)
        for l in range(2, 21):
            for d in (l, -l):
                assert oqam.value(d) < ofdm.value(d), d
                if l >= 3:
                    assert ofdm.value(d) >= 10 * oqam.value(d), d

    def test_tail_decays(self) -> None:
        table = psd_interference_table(aggressor_psd(CP, n_symbols=2000, seed=2), l_max=20)
        assert table.tail.exponent_pos < -1.0
        assert table.value(30) < table.value(20)

    def test_coverage_checked(self) -> None:
        with pytest.raises(RangeError, match="need"):
            psd_interference_table(aggressor_psd(CP, n_symbols=200, seed=2), l_max=32)

    def test_zero_signal_rejected(self) -> None:
        silent = aggressor_psd(CP, n_symbols=200, seed=2, sigma_d2=0.0)
        with pytest.raises(InputError, match="all-zero"):
            psd_interference_table(silent, l_max=5)

    def test_symmetric_density_gives_symmetric_table(self) -> None:
        freqs = np.arange(-512, 512) / 16
        est = PsdEstimate(
            freqs=freqs, values=np.exp(-(freqs**2)) + 1e-9, segment_len=1024, overlap_frac=0.5, n_segments=1
        )
        table = psd_interference_table(est, l_max=10)
        np.testing.assert_allclose(table.values, table.values[::-1], rtol=1e-12)
