"""Power spectral densities and the PSD-based interference model.

The PSD model integrates the aggressor's transmit PSD over each victim
subcarrier band and ignores what the victim receiver does.  It is kept
alongside the EVM tables so the two can be compared, and
:func:`truncated_psd` shows where the PSD model goes wrong: the CP-OFDM
receive windows cut the long filter-bank pulses and spread their energy.

Estimates use an averaged periodogram (Hann taper, 50% overlap) on a
frequency grid expressed in units of ΔF; densities integrate to the mean
power per sample.
"""

from __future__ import annotations

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.integrate import trapezoid
from scipy.ndimage import uniform_filter1d
from scipy.signal import welch

from coexsim.config import settings
from coexsim.errors import ConfigurationError, InputError, RangeError
from coexsim.interference import (
    DB_FLOOR,
    InterferenceModel,
    InterferenceTable,
    SyncModel,
    fit_tail,
    run_trials,
)
from coexsim.waveform import SampleBuffer, WaveformKind, WaveformSpec, _gather, burst_samples, prototype_for

log = structlog.get_logger(__name__)

WINDOW = "hann"
EDGE_TOL = 1e-9  # band-edge tolerance in units of ΔF


class PsdEstimate(BaseModel):
    """Power density per unit ΔF on a grid of frequencies in units of ΔF."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    freqs: np.ndarray
    values: np.ndarray
    segment_len: int
    overlap_frac: float
    window: str = WINDOW
    n_segments: int
    trials: int = 1
    source: WaveformSpec | None = None

    @field_validator("freqs", "values", mode="before")
    @classmethod
    def _freeze(cls, value: object) -> np.ndarray:
        arr = np.array(value, dtype=float)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _validate_density(self) -> PsdEstimate:
        if self.freqs.shape != self.values.shape or self.freqs.ndim != 1:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if np.any(self.values < 0):
            raise ValueError("power densities must be non-negative")
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        return self

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    @property
    def total_power(self) -> float:
        return float(trapezoid(self.values, self.freqs))

    @property
    def values_db(self) -> np.ndarray:
        return 10 * np.log10(np.maximum(self.values, DB_FLOOR))

    def smoothed(self, width: float = 0.25) -> PsdEstimate:
        """Moving average over ``width`` (in ΔF)."""
        size = max(1, int(round(width / self.resolution)))
        return self.model_copy(update={"values": uniform_filter1d(self.values, size, mode="nearest")})

    def level_at(self, freq: float) -> float:
        return float(np.interp(freq, self.freqs, self.values))

    def metadata(self) -> dict[str, object]:
        return {
            "segment_len": self.segment_len,
            "overlap_frac": self.overlap_frac,
            "window": self.window,
            "n_segments": self.n_segments,
            "trials": self.trials,
            "resolution_dF": self.resolution,
            "source": self.source.model_dump(mode="json") if self.source else None,
            "normalization": "density per unit dF; integral equals mean power per sample",
        }

    def rows(self) -> list[dict[str, float]]:
        return [
            {"freq_over_dF": float(f), "psd_linear": float(v), "psd_db": float(db)}
            for f, v, db in zip(self.freqs, self.values, self.values_db, strict=True)
        ]


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


def _default_segment(num_subcarriers: int) -> int:
    return settings.psd_segment_symbols * num_subcarriers


def _welch(samples: np.ndarray, fs: int, segment_len: int, overlap_frac: float) -> tuple[np.ndarray, np.ndarray]:
    freqs, pxx = welch(
        samples,
        fs=fs,
        window=WINDOW,
        nperseg=segment_len,
        noverlap=int(segment_len * overlap_frac),
        return_onesided=False,
        detrend=False,
        scaling="density",
    )
    return np.fft.fftshift(freqs), np.fft.fftshift(pxx)


def estimate_psd(
    buf: SampleBuffer,
    segment_len: int | None = None,
    overlap_frac: float | None = None,
    n_average: int | None = None,
) -> PsdEstimate:
    """Averaged-periodogram PSD of ``buf``.

    Parameters
    ----------
    buf:
        Samples; ``buf.samples_per_symbol`` converts frequencies to ΔF.
    segment_len:
        Samples per periodogram segment (default 16·M, i.e. 4·K·M for K=4,
        a resolution of ΔF/16).
    overlap_frac:
        Fraction of a segment shared with the next one, in [0, 1).
    n_average:
        Number of segments to average; defaults to all that fit.

    Raises
    ------
    InputError
        If the buffer is shorter than the segments requested,
        or ``n_average`` is below 1.
    """
    segment_len = segment_len or _default_segment(buf.samples_per_symbol)
    overlap_frac = settings.psd_overlap if overlap_frac is None else overlap_frac
    if not 0 <= overlap_frac < 1:
        raise InputError(f"overlap_frac must lie in [0, 1), got {overlap_frac}")
    if segment_len > len(buf):
        raise InputError(f"buffer of {len(buf)} samples is shorter than one segment ({segment_len})")
    if n_average is not None and n_average < 1:
        raise InputError(f"n_average must be at least 1, got {n_average}")

    step = segment_len - int(segment_len * overlap_frac)
    available = 1 + (len(buf) - segment_len) // step
    n_segments = available if n_average is None else n_average
    if n_segments > available:
        raise InputError(f"buffer holds {available} segments, {n_segments} requested")

    samples = buf.samples[: segment_len + (n_segments - 1) * step]
    freqs, pxx = _welch(samples, buf.samples_per_symbol, segment_len, overlap_frac)
    log.debug("psd_estimated", segment_len=segment_len, n_segments=n_segments)
    return PsdEstimate(
        freqs=freqs, values=pxx, segment_len=segment_len, overlap_frac=overlap_frac, n_segments=n_segments
    )


def aggressor_psd(
    spec: WaveformSpec,
    n_symbols: int | None = None,
    seed: int | None = None,
    sigma_d2: float = 1.0,
    segment_len: int | None = None,
) -> PsdEstimate:
    """PSD of a single active subcarrier at f = 0, as radiated."""
    n_symbols = n_symbols or settings.psd_symbols
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    buf = SampleBuffer(
        samples=burst_samples(spec, n_symbols, rng, sigma_d2=sigma_d2),
        samples_per_symbol=spec.num_subcarriers,
    )
    estimate = estimate_psd(buf, segment_len)
    log.info("aggressor_psd_estimated", waveform=spec.label, n_symbols=n_symbols, segments=estimate.n_segments)
    return estimate.model_copy(update={"source": spec})


def truncated_psd(
    aggressor: WaveformSpec,
    victim: WaveformSpec,
    n_trials: int | None = None,
    seed: int | None = None,
    sync: SyncModel = SyncModel.UNIFORM_OFFSET,
    n_symbols: int | None = None,
    sigma_d2: float = 1.0,
    segment_len: int | None = None,
) -> PsdEstimate:
    """PSD of the aggressor as seen through the victim's CP-OFDM receive windows.

    Each trial synthesizes a burst, keeps only the M-sample windows left
    after cyclic-prefix removal, concatenates them and runs the periodogram;
    trial estimates are averaged in trial order.

    Raises
    ------
    ConfigurationError
        If the victim is not CP-OFDM.
    """
    if victim.kind is not WaveformKind.CP_OFDM:
        raise ConfigurationError("truncation is defined by CP-OFDM receive windows")
    if victim.num_subcarriers != aggressor.num_subcarriers:
        raise InputError("victim and aggressor must share the subcarrier spacing and DFT size")
    n_trials = n_trials or settings.psd_trials
    n_symbols = n_symbols or settings.psd_symbols
    seed = settings.seed if seed is None else seed
    nfft = victim.num_subcarriers
    segment_len = segment_len or _default_segment(nfft)
    taps = prototype_for(aggressor).taps if aggressor.kind is WaveformKind.OQAM else None
    ramp = aggressor.overlap * nfft if aggressor.kind is WaveformKind.OQAM else 0

    def _trials(rng: np.random.Generator, count: int) -> np.ndarray:
        out = []
        for _ in range(count):
            offset = 0 if sync is SyncModel.ALIGNED else int(rng.integers(0, victim.symbol_len))
            samples = burst_samples(aggressor, n_symbols, rng, sigma_d2=sigma_d2, taps=taps)
            n_windows = (samples.size - 2 * ramp - offset) // victim.symbol_len
            if n_windows * nfft < segment_len:
                raise InputError(f"{n_symbols} symbols leave fewer than one segment of windowed samples")
            starts = ramp + offset + victim.cp + np.arange(n_windows) * victim.symbol_len
            windowed = _gather(samples, starts[:, None] + np.arange(nfft)[None, :]).reshape(-1)
            _, pxx = _welch(windowed, nfft, segment_len, settings.psd_overlap)
            out.append(pxx)
        return np.array(out)

    pxx = run_trials(_trials, n_trials, seed).mean(axis=0)
    freqs = np.fft.fftshift(np.fft.fftfreq(segment_len, d=1 / nfft))
    step = segment_len - int(segment_len * settings.psd_overlap)
    n_windows = (n_symbols * aggressor.symbol_len - 2 * ramp) // victim.symbol_len
    log.info("truncated_psd_estimated", aggressor=aggressor.label, victim=victim.label, trials=n_trials)
    return PsdEstimate(
        freqs=freqs,
        values=pxx,
        segment_len=segment_len,
        overlap_frac=settings.psd_overlap,
        n_segments=1 + (n_windows * nfft - segment_len) // step,
        trials=n_trials,
        source=aggressor,
    )


# ---------------------------------------------------------------------------
# PSD-based interference model
# ---------------------------------------------------------------------------


def psd_interference_table(
    psd: PsdEstimate,
    l_max: int | None = None,
    aggressor: WaveformSpec | None = None,
) -> InterferenceTable:
    """I_PSD(l): share of the aggressor subcarrier's power inside band l.

    ``psd`` must be the PSD of one active aggressor subcarrier centred at
    f = 0.  Each band [l - 1/2, l + 1/2] is integrated with the trapezoidal
    rule on the estimate's own grid.

    Raises
    ------
    RangeError
        If the estimate does not cover [-l_max - 1/2, l_max + 1/2].
    """
    l_max = settings.l_max if l_max is None else l_max
    if l_max < 1:
        raise InputError("l_max must be at least 1")
    edge = l_max + 0.5
    if psd.freqs[0] > -edge + EDGE_TOL or psd.freqs[-1] < edge - EDGE_TOL:
        raise RangeError(
            f"estimate covers [{psd.freqs[0]:.3f}, {psd.freqs[-1]:.3f}] dF, need +/-{edge} dF"
        )
    total = psd.total_power
    if total <= 0:
        raise InputError("cannot normalize an all-zero PSD")

    distances = np.arange(-l_max, l_max + 1)
    values = np.empty(distances.size)
    for i, l in enumerate(distances):
        band = (psd.freqs >= l - 0.5 - EDGE_TOL) & (psd.freqs <= l + 0.5 + EDGE_TOL)
        values[i] = trapezoid(psd.values[band], psd.freqs[band]) / total

    log.info("psd_table_built", l_max=l_max, center_share=float(values[l_max]))
    return InterferenceTable(
        model=InterferenceModel.PSD,
        victim=None,
        aggressor=aggressor or psd.source,
        sync=None,
        distances=distances,
        values=values,
        stderr=np.zeros_like(values),
        trials=psd.trials,
        seed=None,
        tail=fit_tail(distances, values, InterferenceModel.PSD),
        normalization="share of aggressor subcarrier power per victim band; victim per-subcarrier power sigma_d2 = 1",
    )
