"""Baseband synthesis and reception of CP-OFDM and OFDM/OQAM signals.

Both users share one sample clock: a symbol period T spans ``num_subcarriers``
samples and every frequency is expressed in units of the subcarrier spacing
ΔF = 1/T.

Conventions:
  1. CP-OFDM uses a unitary DFT (1/√M in both directions) so a unit-variance
     symbol keeps unit energy through modulation and demodulation.
  2. OFDM/OQAM carries real half-symbols every M/2 samples, each shaped by a
     unit-energy PHYDYAS prototype of length K·M and rotated by j^(m+n).
     A complex symbol of variance σ_d² is split into two half-symbols of
     variance σ_d²/2, so both waveforms radiate the same power per subcarrier.
  3. The CP-OFDM receiver only discards the cyclic prefix and applies a
     size-M DFT; nothing outside its rectangular windows is filtered.
  4. Samples requested outside a buffer read as zero.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from coexsim.config import settings
from coexsim.errors import ConfigurationError, InputError, ShapeError

log = structlog.get_logger(__name__)

# Frequency coefficients P_1..P_{K-1} of the PHYDYAS prototype, keyed by K.
PHYDYAS_COEFFICIENTS: dict[int, tuple[float, ...]] = {
    2: (1 / np.sqrt(2),),
    3: (0.911438, 0.411438),
    4: (0.971960, 1 / np.sqrt(2), 0.235147),
}

MIN_SUBCARRIERS = 8


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class WaveformKind(str, Enum):
    """Multicarrier schemes known to the simulator."""

    CP_OFDM = "cp-ofdm"
    OQAM = "oqam"


def _check_subcarriers(num_subcarriers: int) -> None:
    if num_subcarriers < MIN_SUBCARRIERS or num_subcarriers & (num_subcarriers - 1):
        raise ConfigurationError(
            f"num_subcarriers must be a power of two >= {MIN_SUBCARRIERS}, got {num_subcarriers}"
        )


def _check_overlap(overlap: int) -> None:
    if overlap not in PHYDYAS_COEFFICIENTS:
        raise ConfigurationError(
            f"overlap factor K={overlap} is not supported; valid set is {sorted(PHYDYAS_COEFFICIENTS)}"
        )


class WaveformSpec(BaseModel, frozen=True):
    """Physical-layer parameters of one user.

    ``cp_len`` defaults to ``num_subcarriers * settings.cp_ratio`` for CP-OFDM
    and is always 0 for OQAM.  ``overlap`` (K) only matters for OQAM.
    """

    kind: WaveformKind
    num_subcarriers: int = Field(default_factory=lambda: settings.subcarriers)
    cp_len: int | None = None
    overlap: int = Field(default_factory=lambda: settings.overlap_factor)

    @model_validator(mode="after")
    def _validate_numerology(self) -> WaveformSpec:
        _check_subcarriers(self.num_subcarriers)
        if self.kind is WaveformKind.CP_OFDM:
            if self.cp_len is None:
                object.__setattr__(self, "cp_len", int(self.num_subcarriers * settings.cp_ratio))
            elif not 0 <= self.cp_len < self.num_subcarriers:
                raise ValueError(f"cp_len must lie in [0, {self.num_subcarriers}), got {self.cp_len}")
        else:
            _check_overlap(self.overlap)
            if self.cp_len not in (None, 0):
                raise ValueError("OQAM carries no cyclic prefix; cp_len must be 0")
            object.__setattr__(self, "cp_len", 0)
        return self

    @classmethod
    def cp_ofdm(cls, num_subcarriers: int, cp_len: int | None = None) -> WaveformSpec:
        return cls(kind=WaveformKind.CP_OFDM, num_subcarriers=num_subcarriers, cp_len=cp_len)

    @classmethod
    def oqam(cls, num_subcarriers: int, overlap: int | None = None) -> WaveformSpec:
        overlap = settings.overlap_factor if overlap is None else overlap
        return cls(kind=WaveformKind.OQAM, num_subcarriers=num_subcarriers, overlap=overlap)

    @property
    def cp(self) -> int:
        return self.cp_len or 0

    @property
    def symbol_len(self) -> int:
        """Samples per symbol period, cyclic prefix included."""
        return self.num_subcarriers + self.cp

    @property
    def label(self) -> str:
        if self.kind is WaveformKind.CP_OFDM:
            return f"cp-ofdm(M={self.num_subcarriers},cp={self.cp})"
        return f"oqam(M={self.num_subcarriers},K={self.overlap})"


class PrototypeFilter(BaseModel):
    """Real, symmetric PHYDYAS prototype with unit energy."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    taps: np.ndarray
    num_subcarriers: int
    overlap: int
    coefficients: tuple[float, ...]
    energy_norm: float  # scale applied to the raw cosine sum

    @field_validator("taps", mode="before")
    @classmethod
    def _freeze_taps(cls, value: object) -> np.ndarray:
        taps = np.array(value, dtype=float)
        taps.setflags(write=False)
        return taps

    @model_validator(mode="after")
    def _validate_taps(self) -> PrototypeFilter:
        length = self.overlap * self.num_subcarriers
        if self.taps.shape != (length,):
            raise ValueError(f"prototype must have K*M = {length} taps, got {self.taps.shape}")
        if np.max(np.abs(self.taps - self.taps[::-1])) > 1e-12:
            raise ValueError("prototype taps must be symmetric about their midpoint")
        return self


class SymbolGrid(BaseModel):
    """Symbols indexed ``(subcarrier, time)``.

    CP-OFDM grids hold complex symbols per symbol period, OQAM grids hold real
    half-symbols at twice that rate.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    data: np.ndarray
    active_set: frozenset[int]
    sigma_d2: float = 1.0

    @field_validator("data", mode="before")
    @classmethod
    def _freeze_data(cls, value: object) -> np.ndarray:
        data = np.array(value)
        if not (np.issubdtype(data.dtype, np.floating) or np.issubdtype(data.dtype, np.complexfloating)):
            data = data.astype(float)
        data.setflags(write=False)
        return data

    @model_validator(mode="after")
    def _validate_grid(self) -> SymbolGrid:
        if self.data.ndim != 2:
            raise ValueError(f"symbol grid must be 2-D (subcarrier, time), got {self.data.ndim}-D")
        n_sub = self.data.shape[0]
        if any(not 0 <= m < n_sub for m in self.active_set):
            raise ValueError(f"active subcarriers must lie in [0, {n_sub})")
        inactive = np.ones(n_sub, dtype=bool)
        inactive[list(self.active_set)] = False
        if np.any(self.data[inactive] != 0):
            raise ValueError("symbols outside the active set must be zero")
        if self.sigma_d2 < 0:
            raise ValueError("sigma_d2 must be non-negative")
        return self

    @property
    def num_subcarriers(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_symbols(self) -> int:
        return int(self.data.shape[1])


class SampleBuffer(BaseModel):
    """Complex baseband samples; ``origin`` is the array index of time zero."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    origin: int = 0
    samples_per_symbol: int  # M, converts sample frequency to units of ΔF

    @field_validator("samples", mode="before")
    @classmethod
    def _freeze_samples(cls, value: object) -> np.ndarray:
        samples = np.array(value, dtype=complex)
        samples.setflags(write=False)
        return samples

    @model_validator(mode="after")
    def _validate_samples(self) -> SampleBuffer:
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("sample buffer must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("sample buffer holds non-finite values")
        if not 0 <= self.origin <= self.samples.size:
            raise ValueError(f"origin {self.origin} outside buffer extent [0, {self.samples.size}]")
        return self

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def power(self) -> float:
        """Mean power per sample."""
        return float(np.mean(np.abs(self.samples) ** 2))


# ---------------------------------------------------------------------------
# Prototype filter
# ---------------------------------------------------------------------------


def phydyas_prototype(num_subcarriers: int, overlap: int = 4) -> PrototypeFilter:
    """Build the PHYDYAS prototype of length K·M.

    The cosine sum is sampled at half-sample offsets so the taps are exactly
    symmetric, then scaled to unit energy (the energy of the rectangular
    CP-OFDM pulse of height 1/√M).

    Parameters
    ----------
    num_subcarriers:
        M, a power of two.
    overlap:
        K, one of 2, 3, 4.

    Raises
    ------
    ConfigurationError
        For an unsupported K or a non power-of-two M.
    """
    _check_subcarriers(num_subcarriers)
    _check_overlap(overlap)

    coefficients = PHYDYAS_COEFFICIENTS[overlap]
    length = overlap * num_subcarriers
    t = (np.arange(length) + 0.5) / length
    raw = np.ones(length)
    for p, coeff in enumerate(coefficients, start=1):
        raw += 2 * (-1) ** p * coeff * np.cos(2 * np.pi * p * t)

    energy_norm = float(1 / np.sqrt(np.sum(raw**2)))
    return PrototypeFilter(
        taps=raw * energy_norm,
        num_subcarriers=num_subcarriers,
        overlap=overlap,
        coefficients=coefficients,
        energy_norm=energy_norm,
    )


def prototype_for(spec: WaveformSpec) -> PrototypeFilter:
    return phydyas_prototype(spec.num_subcarriers, spec.overlap)


# ---------------------------------------------------------------------------
# Symbol sources
# ---------------------------------------------------------------------------


def qpsk_symbols(rng: np.random.Generator, shape: tuple[int, ...], sigma_d2: float = 1.0) -> np.ndarray:
    """Unit-modulus QPSK scaled to variance ``sigma_d2``."""
    amp = np.sqrt(sigma_d2 / 2)
    re = rng.integers(0, 2, size=shape) * 2 - 1
    im = rng.integers(0, 2, size=shape) * 2 - 1
    return amp * (re + 1j * im)


def pam_half_symbols(rng: np.random.Generator, shape: tuple[int, ...], sigma_d2: float = 1.0) -> np.ndarray:
    """Binary real half-symbols of variance ``sigma_d2 / 2``."""
    return np.sqrt(sigma_d2 / 2) * (rng.integers(0, 2, size=shape) * 2 - 1).astype(float)


def random_grid(
    spec: WaveformSpec,
    num_symbols: int,
    rng: np.random.Generator,
    active: frozenset[int] | None = None,
    sigma_d2: float = 1.0,
) -> SymbolGrid:
    """Draw i.i.d. symbols on ``active`` subcarriers (all of them by default).

    OQAM grids get ``2 * num_symbols`` half-symbol columns.
    """
    n_sub = spec.num_subcarriers
    active = frozenset(range(n_sub)) if active is None else frozenset(active)
    mask = np.zeros((n_sub, 1))
    mask[list(active)] = 1.0
    if spec.kind is WaveformKind.CP_OFDM:
        data = qpsk_symbols(rng, (n_sub, num_symbols), sigma_d2) * mask
    else:
        data = pam_half_symbols(rng, (n_sub, 2 * num_symbols), sigma_d2) * mask
    return SymbolGrid(data=data, active_set=active, sigma_d2=sigma_d2)


# ---------------------------------------------------------------------------
# Array kernels
# ---------------------------------------------------------------------------


def _gather(samples: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Index ``samples`` with zero padding outside the buffer."""
    valid = (idx >= 0) & (idx < samples.size)
    out = np.zeros(idx.shape, dtype=complex)
    out[valid] = samples[idx[valid]]
    return out


def _cp_ofdm_synthesis(data: np.ndarray, cp_len: int) -> np.ndarray:
    nfft = data.shape[0]
    body = np.fft.ifft(data, axis=0, norm="ortho")
    frames = np.concatenate([body[nfft - cp_len :], body], axis=0)
    return frames.T.reshape(-1)


def _cp_ofdm_analysis(samples: np.ndarray, start: int, num_symbols: int, nfft: int, cp_len: int) -> np.ndarray:
    starts = start + cp_len + np.arange(num_symbols) * (nfft + cp_len)
    windows = _gather(samples, starts[:, None] + np.arange(nfft)[None, :])
    return np.fft.fft(windows, axis=1, norm="ortho").T


def _oqam_phases(nfft: int, num_half: int, length: int) -> np.ndarray:
    """j^(m+n) · (-1)^(mn) · exp(-jπm(L-1)/M) for every grid position."""
    m = np.arange(nfft)[:, None]
    n = np.arange(num_half)[None, :]
    theta = np.array([1, 1j, -1, -1j])[(m + n) % 4]
    sign = np.where((m * n) % 2 == 0, 1.0, -1.0)
    centre = np.exp(-1j * np.pi * m * (length - 1) / nfft)
    return theta * sign * centre


def _oqam_synthesis(data: np.ndarray, taps: np.ndarray, overlap: int) -> np.ndarray:
    nfft, num_half = data.shape
    half = nfft // 2
    length = overlap * nfft
    coeffs = data * _oqam_phases(nfft, num_half, length)
    periodic = nfft * np.fft.ifft(coeffs, axis=0)
    pulses = np.tile(periodic, (overlap, 1)) * taps[:, None]

    # Overlap-add in blocks of M/2 samples: pulse n fills blocks n .. n+2K-1.
    n_blocks = 2 * overlap
    blocks = pulses.reshape(n_blocks, half, num_half)
    out = np.zeros((num_half + n_blocks - 1, half), dtype=complex)
    for j in range(n_blocks):
        out[j : j + num_half] += blocks[j].T
    return out.reshape(-1)


def _oqam_analysis(
    samples: np.ndarray, start: int, num_half: int, taps: np.ndarray, nfft: int, overlap: int
) -> np.ndarray:
    """Complex matched-filter outputs before the real-part operation."""
    half = nfft // 2
    length = overlap * nfft
    idx = start + np.arange(num_half)[:, None] * half + np.arange(length)[None, :]
    segments = _gather(samples, idx) * taps[None, :]
    folded = segments.reshape(num_half, overlap, nfft).sum(axis=1)
    spectra = np.fft.fft(folded, axis=1).T
    return spectra * np.conj(_oqam_phases(nfft, num_half, length))


# ---------------------------------------------------------------------------
# Modulators and demodulators
# ---------------------------------------------------------------------------


def _require_kind(spec: WaveformSpec, kind: WaveformKind) -> None:
    if spec.kind is not kind:
        raise ConfigurationError(f"expected a {kind.value} spec, got {spec.kind.value}")


def _require_rows(grid: SymbolGrid, spec: WaveformSpec) -> None:
    if grid.num_subcarriers != spec.num_subcarriers:
        raise ShapeError(f"grid has {grid.num_subcarriers} subcarriers, spec expects {spec.num_subcarriers}")


def cp_ofdm_modulate(grid: SymbolGrid, spec: WaveformSpec) -> SampleBuffer:
    """Inverse DFT per symbol, then prepend the last ``cp_len`` samples.

    The output holds ``num_symbols * (M + cp_len)`` samples with time zero at
    the start of the first cyclic prefix.
    """
    _require_kind(spec, WaveformKind.CP_OFDM)
    _require_rows(grid, spec)
    samples = _cp_ofdm_synthesis(np.asarray(grid.data, dtype=complex), spec.cp)
    return SampleBuffer(samples=samples, origin=0, samples_per_symbol=spec.num_subcarriers)


def cp_ofdm_demodulate(
    buf: SampleBuffer,
    spec: WaveformSpec,
    window_start: int = 0,
    n_symbols: int | None = None,
) -> SymbolGrid:
    """Remove the cyclic prefix and apply a size-M DFT per receive window.

    Parameters
    ----------
    buf:
        Received samples.
    spec:
        Receiver numerology (CP-OFDM).
    window_start:
        Time, relative to ``buf.origin``, at which the first symbol (its
        cyclic prefix included) starts.
    n_symbols:
        Number of receive windows; defaults to as many as fit in the buffer.
    """
    _require_kind(spec, WaveformKind.CP_OFDM)
    start = buf.origin + window_start
    if n_symbols is None:
        n_symbols = max((len(buf) - start) // spec.symbol_len, 0)
    if n_symbols < 1:
        raise InputError("buffer does not cover a single receive window")
    data = _cp_ofdm_analysis(buf.samples, start, n_symbols, spec.num_subcarriers, spec.cp)
    return SymbolGrid(data=data, active_set=frozenset(range(spec.num_subcarriers)))


def oqam_modulate(grid: SymbolGrid, spec: WaveformSpec, proto: PrototypeFilter | None = None) -> SampleBuffer:
    """Synthesize real half-symbols on the OFDM/OQAM filter bank.

    Output length is ``(n_half - 1) * M/2 + K*M`` with time zero at the start
    of the first pulse.

    Raises
    ------
    InputError
        If the grid carries complex values.
    """
    _require_kind(spec, WaveformKind.OQAM)
    _require_rows(grid, spec)
    if np.iscomplexobj(grid.data) and np.any(grid.data.imag != 0):
        raise InputError("OQAM grids carry real half-symbols; got complex entries")
    proto = proto or prototype_for(spec)
    samples = _oqam_synthesis(np.real(grid.data).astype(float), proto.taps, spec.overlap)
    return SampleBuffer(samples=samples, origin=0, samples_per_symbol=spec.num_subcarriers)


def oqam_demodulate(
    buf: SampleBuffer,
    spec: WaveformSpec,
    proto: PrototypeFilter | None = None,
    start: int = 0,
    n_half: int | None = None,
    real: bool = True,
) -> SymbolGrid:
    """Matched-filter analysis bank sampled every M/2.

    ``start`` is the time (relative to ``buf.origin``) where the pulse of
    half-symbol 0 begins.  With ``real=False`` the phase-compensated complex
    outputs are returned before the real part is taken.
    """
    _require_kind(spec, WaveformKind.OQAM)
    proto = proto or prototype_for(spec)
    half = spec.num_subcarriers // 2
    first = buf.origin + start
    if n_half is None:
        n_half = max((len(buf) - first - spec.overlap * spec.num_subcarriers) // half + 1, 0)
    if n_half < 1:
        raise InputError("buffer does not cover a single half-symbol pulse")
    data = _oqam_analysis(buf.samples, first, n_half, proto.taps, spec.num_subcarriers, spec.overlap)
    return SymbolGrid(data=data.real if real else data, active_set=frozenset(range(spec.num_subcarriers)))


def modulate(grid: SymbolGrid, spec: WaveformSpec, proto: PrototypeFilter | None = None) -> SampleBuffer:
    """Dispatch to the modulator of ``spec.kind``."""
    if spec.kind is WaveformKind.CP_OFDM:
        return cp_ofdm_modulate(grid, spec)
    return oqam_modulate(grid, spec, proto)


# ---------------------------------------------------------------------------
# Single-subcarrier aggressor
# ---------------------------------------------------------------------------


def burst_samples(
    spec: WaveformSpec,
    num_symbols: int,
    rng: np.random.Generator,
    subcarrier: int = 0,
    sigma_d2: float = 1.0,
    taps: np.ndarray | None = None,
) -> np.ndarray:
    """Raw samples of a burst with only ``subcarrier`` active."""
    n_sub = spec.num_subcarriers
    if spec.kind is WaveformKind.CP_OFDM:
        data = np.zeros((n_sub, num_symbols), dtype=complex)
        data[subcarrier % n_sub] = qpsk_symbols(rng, (num_symbols,), sigma_d2)
        return _cp_ofdm_synthesis(data, spec.cp)
    data = np.zeros((n_sub, 2 * num_symbols))
    data[subcarrier % n_sub] = pam_half_symbols(rng, (2 * num_symbols,), sigma_d2)
    if taps is None:
        taps = prototype_for(spec).taps
    return _oqam_synthesis(data, taps, spec.overlap)


def single_subcarrier_burst(
    spec: WaveformSpec,
    num_symbols: int,
    rng: np.random.Generator,
    subcarrier: int = 0,
    sigma_d2: float = 1.0,
) -> SampleBuffer:
    """Burst of ``num_symbols`` symbol periods occupying one subcarrier."""
    samples = burst_samples(spec, num_symbols, rng, subcarrier, sigma_d2)
    log.debug("burst_generated", waveform=spec.label, num_symbols=num_symbols, subcarrier=subcarrier)
    return SampleBuffer(samples=samples, origin=0, samples_per_symbol=spec.num_subcarriers)
