"""Post-demodulation (EVM) interference tables and their aggregation.

An interference table I(l) gives the mean power that one aggressor
subcarrier of unit symbol variance leaves on a victim subcarrier at spectral
distance l = q - m after the victim's own demodulator.

Measurement strategy:
  1. Synthesize an aggressor burst with a single active subcarrier q = 0 and
     enough guard symbols on both sides to reach steady state.
  2. Demodulate it with the victim receiver (the victim transmits nothing),
     discarding the first and last K victim symbols.
  3. Record the mean |η_m|² of every victim bin m at l = -m, averaged over
     trials and, for the uniform-offset model, over timing offsets drawn
     uniformly within one victim symbol period.

A deterministic projection oracle computes the same expectation by projecting
every unit aggressor pulse onto every receive window; Monte Carlo tables
agree with it within their standard errors.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import NamedTuple

import numpy as np
import structlog
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from coexsim.config import settings
from coexsim.errors import InputError, RangeError
from coexsim.waveform import (
    WaveformKind,
    WaveformSpec,
    _cp_ofdm_analysis,
    _cp_ofdm_synthesis,
    _oqam_analysis,
    _oqam_synthesis,
    burst_samples,
    prototype_for,
)

log = structlog.get_logger(__name__)

DB_FLOOR = 1e-30  # linear floor before taking logs (-300 dB)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class InterferenceModel(str, Enum):
    PSD = "psd"
    EVM = "evm"


class SyncModel(str, Enum):
    """Timing relation between aggressor and victim symbol clocks."""

    ALIGNED = "aligned"
    UNIFORM_OFFSET = "uniform-offset"


class InterferenceDirection(str, Enum):
    SECONDARY_TO_INCUMBENT = "secondary->incumbent"
    INCUMBENT_TO_SECONDARY = "incumbent->secondary"


class TailFit(BaseModel, frozen=True):
    """Power law ``coef * |l| ** exponent`` used beyond ``l_max``, per side."""

    coef_pos: float = 0.0
    coef_neg: float = 0.0
    exponent_pos: float = -2.0
    exponent_neg: float = -2.0

    def evaluate(self, distances: np.ndarray) -> np.ndarray:
        mag = np.abs(distances).astype(float)
        pos = self.coef_pos * mag**self.exponent_pos
        neg = self.coef_neg * mag**self.exponent_neg
        return np.where(distances > 0, pos, neg)


class InterferenceTable(BaseModel):
    """Mean injected interference I(l) for l in [-l_max, l_max].

    Values are linear powers for unit aggressor symbol variance (σ_d² = 1),
    which is also the victim's per-subcarrier signal power.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: InterferenceModel
    victim: WaveformSpec | None
    aggressor: WaveformSpec | None
    sync: SyncModel | None
    distances: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    trials: int
    seed: int | None
    tail: TailFit
    low_confidence: bool = False
    normalization: str = "unit aggressor symbol variance; victim per-subcarrier power sigma_d2 = 1"

    @field_validator("distances", "values", "stderr", mode="before")
    @classmethod
    def _freeze(cls, value: object) -> np.ndarray:
        arr = np.array(value)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _validate_entries(self) -> InterferenceTable:
        l_max = (self.distances.size - 1) // 2
        if not np.array_equal(self.distances, np.arange(-l_max, l_max + 1)):
            raise ValueError("distances must be the contiguous range -l_max..l_max")
        if self.values.shape != self.distances.shape or self.stderr.shape != self.distances.shape:
            raise ValueError("values and stderr must align with distances")
        if np.any(self.values < 0):
            raise ValueError("interference entries must be non-negative")
        return self

    @property
    def l_max(self) -> int:
        return int(self.distances[-1])

    def lookup(self, distances: ArrayLike, extrapolate: bool = True) -> np.ndarray:
        """Interference at arbitrary integer distances.

        Raises
        ------
        RangeError
            If a distance exceeds ``l_max`` and ``extrapolate`` is False.
        """
        d = np.asarray(distances, dtype=int)
        inside = np.abs(d) <= self.l_max
        if not extrapolate and not np.all(inside):
            raise RangeError(f"distance {int(np.max(np.abs(d)))} beyond table l_max={self.l_max}")
        out = self.tail.evaluate(np.where(inside, self.l_max + 1, d))
        return np.where(inside, self.values[np.clip(d, -self.l_max, self.l_max) + self.l_max], out)

    def value(self, distance: int) -> float:
        return float(self.lookup([distance])[0])

    @property
    def values_db(self) -> np.ndarray:
        return 10 * np.log10(np.maximum(self.values, DB_FLOOR))

    @property
    def stderr_db(self) -> np.ndarray:
        return 10 * np.log10(1 + self.stderr / np.maximum(self.values, DB_FLOOR))

    def scaled(self, factor: float) -> InterferenceTable:
        """Same table for an aggressor symbol variance of ``factor``."""
        tail = self.tail.model_copy(
            update={"coef_pos": self.tail.coef_pos * factor, "coef_neg": self.tail.coef_neg * factor}
        )
        return self.model_copy(update={"values": self.values * factor, "stderr": self.stderr * factor, "tail": tail})

    def metadata(self) -> dict[str, object]:
        return {
            "model": self.model.value,
            "victim": self.victim.model_dump(mode="json") if self.victim else None,
            "aggressor": self.aggressor.model_dump(mode="json") if self.aggressor else None,
            "sync": self.sync.value if self.sync else None,
            "l_max": self.l_max,
            "trials": self.trials,
            "seed": self.seed,
            "low_confidence": self.low_confidence,
            "normalization": self.normalization,
            "tail": self.tail.model_dump(),
        }

    def rows(self) -> list[dict[str, float]]:
        return [
            {"l": int(l), "I_linear": float(v), "I_db": float(db), "stderr_db": float(se)}
            for l, v, db, se in zip(self.distances, self.values, self.values_db, self.stderr_db, strict=True)
        ]


class SpectrumAllocation(BaseModel, frozen=True):
    """Disjoint incumbent and secondary subcarrier sets within one band."""

    n_total: int
    incumbent_set: frozenset[int]
    secondary_set: frozenset[int]

    @model_validator(mode="after")
    def _validate_sets(self) -> SpectrumAllocation:
        if self.incumbent_set & self.secondary_set:
            raise ValueError("incumbent and secondary sets must be disjoint")
        for idx in self.incumbent_set | self.secondary_set:
            if not 0 <= idx < self.n_total:
                raise ValueError(f"subcarrier {idx} outside [0, {self.n_total})")
        return self

    @classmethod
    def guard_layout(
        cls, incumbent_width: int, secondary_width: int, guard: int, two_sided: bool = False
    ) -> SpectrumAllocation:
        """Incumbent block, ``guard`` empty subcarriers, then the secondary block.

        With ``two_sided`` the secondary is split into two halves flanking the
        incumbent, each behind its own gap of ``guard`` subcarriers.
        """
        if not two_sided:
            start = incumbent_width + guard
            return cls(
                n_total=start + secondary_width,
                incumbent_set=frozenset(range(incumbent_width)),
                secondary_set=frozenset(range(start, start + secondary_width)),
            )
        left = secondary_width // 2
        inc_start = left + guard
        right_start = inc_start + incumbent_width + guard
        return cls(
            n_total=right_start + secondary_width - left,
            incumbent_set=frozenset(range(inc_start, inc_start + incumbent_width)),
            secondary_set=frozenset(range(left)) | frozenset(range(right_start, right_start + secondary_width - left)),
        )

    @classmethod
    def sandwich(cls, n_total: int, incumbent_start: int, incumbent_width: int) -> SpectrumAllocation:
        """Incumbent block in the middle, secondary on every other subcarrier."""
        incumbent = frozenset(range(incumbent_start, incumbent_start + incumbent_width))
        return cls(
            n_total=n_total,
            incumbent_set=incumbent,
            secondary_set=frozenset(range(n_total)) - incumbent,
        )

    @property
    def incumbent(self) -> np.ndarray:
        return np.array(sorted(self.incumbent_set), dtype=int)

    @property
    def secondary(self) -> np.ndarray:
        return np.array(sorted(self.secondary_set), dtype=int)

    @property
    def max_distance(self) -> int:
        """Largest |q - m| between a secondary and an incumbent subcarrier."""
        if not self.incumbent_set or not self.secondary_set:
            return 0
        return int(np.max(np.abs(np.subtract.outer(self.secondary, self.incumbent))))

    def roles(self, direction: InterferenceDirection) -> tuple[np.ndarray, np.ndarray]:
        """(victims, aggressors) for ``direction``."""
        if direction is InterferenceDirection.SECONDARY_TO_INCUMBENT:
            return self.incumbent, self.secondary
        return self.secondary, self.incumbent


class InterferenceCorrelation(BaseModel):
    """Normalized autocorrelation ρ(Δn) of η_m across victim symbols."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    victim: WaveformSpec
    aggressor: WaveformSpec
    sync: SyncModel
    distances: np.ndarray
    lags: np.ndarray
    rho: np.ndarray  # shape (lags, distances)
    trials: int
    seed: int

    def at(self, lag: int, distance: int) -> complex:
        return complex(self.rho[lag, int(np.flatnonzero(self.distances == distance)[0])])


# ---------------------------------------------------------------------------
# Trial layout shared by Monte Carlo and oracle
# ---------------------------------------------------------------------------


class _Layout(NamedTuple):
    lead: int               # aggressor samples before the first victim window
    victim_period: int      # samples per victim symbol
    discard: int            # victim symbols skipped at each burst edge
    n_measure: int          # steady-state victim symbols
    n_aggressor: int        # aggressor symbols per burst

    def first_window(self, offset: int) -> int:
        return self.lead + offset + self.discard * self.victim_period


def _pulse_len(spec: WaveformSpec) -> int:
    if spec.kind is WaveformKind.OQAM:
        return spec.overlap * spec.num_subcarriers
    return spec.symbol_len


def _layout(victim: WaveformSpec, aggressor: WaveformSpec, n_measure: int) -> _Layout:
    discard = max(spec.overlap if spec.kind is WaveformKind.OQAM else 1 for spec in (victim, aggressor))
    lead = discard * aggressor.symbol_len + _pulse_len(aggressor)
    extent = (2 * discard + n_measure + 1) * victim.symbol_len + _pulse_len(victim)
    n_aggressor = math.ceil((2 * lead + extent) / aggressor.symbol_len)
    return _Layout(lead, victim.symbol_len, discard, n_measure, n_aggressor)


def _check_numerology(victim: WaveformSpec, aggressor: WaveformSpec) -> None:
    if victim.num_subcarriers != aggressor.num_subcarriers:
        raise InputError("victim and aggressor must share the subcarrier spacing and DFT size")


def _victim_outputs(
    victim: WaveformSpec, samples: np.ndarray, first: int, n_measure: int, taps: np.ndarray | None, real: bool
) -> np.ndarray:
    """Victim receiver outputs over ``n_measure`` symbols, shape (M, columns)."""
    if victim.kind is WaveformKind.CP_OFDM:
        return _cp_ofdm_analysis(samples, first, n_measure, victim.num_subcarriers, victim.cp)
    assert taps is not None
    out = _oqam_analysis(samples, first, 2 * n_measure, taps, victim.num_subcarriers, victim.overlap)
    return out.real if real else out


def _bin_power(victim: WaveformSpec, outputs: np.ndarray) -> np.ndarray:
    # OQAM: two real half-symbols form one complex symbol.
    if victim.kind is WaveformKind.OQAM:
        return 2 * np.mean(outputs**2, axis=1)
    return np.mean(np.abs(outputs) ** 2, axis=1)


def _victim_taps(victim: WaveformSpec) -> np.ndarray | None:
    return prototype_for(victim).taps if victim.kind is WaveformKind.OQAM else None


def _aggressor_taps(aggressor: WaveformSpec) -> np.ndarray | None:
    return prototype_for(aggressor).taps if aggressor.kind is WaveformKind.OQAM else None


def run_trials(
    trial_fn: Callable[[np.random.Generator, int], np.ndarray], n_trials: int, seed: int
) -> np.ndarray:
    """Run ``n_trials`` trials in fixed-size chunks on a thread pool.

    Each chunk draws from its own child of ``SeedSequence(seed)`` and results
    are stacked in chunk order, so output does not depend on worker count.
    """
    chunk = settings.trials_per_chunk
    counts = [min(chunk, n_trials - start) for start in range(0, n_trials, chunk)]
    children = np.random.SeedSequence(seed).spawn(len(counts))

    def _run(job: tuple[np.random.SeedSequence, int]) -> np.ndarray:
        seq, count = job
        return trial_fn(np.random.default_rng(seq), count)

    with ThreadPoolExecutor(max_workers=max(1, min(settings.max_workers, len(counts)))) as pool:
        results = list(pool.map(_run, zip(children, counts, strict=True)))
    return np.concatenate(results, axis=0)


def _check_l_max(l_max: int, victim: WaveformSpec) -> None:
    if l_max < 1:
        raise InputError("l_max must be at least 1")
    if 2 * l_max + 1 > victim.num_subcarriers:
        raise RangeError(f"l_max={l_max} needs at least {2 * l_max + 1} victim bins, have {victim.num_subcarriers}")


def _entries(bin_values: np.ndarray, l_max: int) -> np.ndarray:
    """Map per-bin values to distances l = -m (aggressor on subcarrier 0)."""
    nfft = bin_values.shape[-1]
    distances = np.arange(-l_max, l_max + 1)
    return bin_values[..., (-distances) % nfft]


# ---------------------------------------------------------------------------
# Tail extrapolation
# ---------------------------------------------------------------------------


def fit_tail(distances: np.ndarray, values: np.ndarray, model: InterferenceModel) -> TailFit:
    """Fit the decay beyond ``l_max`` on the last ``settings.tail_fit_span`` entries per side.

    EVM tables follow the 1/l² decay of rectangular truncation (only the
    coefficient is fitted); PSD tables get a free power law fitted in
    log-log coordinates.
    """
    l_max = int(distances[-1])
    lo = max(1, l_max - settings.tail_fit_span + 1)
    params: dict[str, float] = {}
    for side, sign in (("pos", 1), ("neg", -1)):
        mags = np.arange(lo, l_max + 1)
        vals = values[sign * mags + l_max]
        keep = vals > 0
        mags, vals = mags[keep], vals[keep]
        if mags.size == 0:
            params[f"coef_{side}"], params[f"exponent_{side}"] = 0.0, -2.0
        elif model is InterferenceModel.EVM or mags.size < 2:
            params[f"coef_{side}"] = float(np.exp(np.mean(np.log(vals * mags**2.0))))
            params[f"exponent_{side}"] = -2.0
        else:
            slope, intercept = np.polyfit(np.log(mags), np.log(vals), 1)
            params[f"coef_{side}"], params[f"exponent_{side}"] = float(np.exp(intercept)), float(min(slope, 0.0))
    return TailFit(**params)


# ---------------------------------------------------------------------------
# Monte Carlo EVM tables
# ---------------------------------------------------------------------------


def evm_interference_table(
    victim: WaveformSpec,
    aggressor: WaveformSpec,
    l_max: int | None = None,
    n_trials: int | None = None,
    sync: SyncModel = SyncModel.UNIFORM_OFFSET,
    seed: int | None = None,
    sigma_d2: float = 1.0,
) -> InterferenceTable:
    """Measure I(l) seen after the victim's demodulator by Monte Carlo.

    Parameters
    ----------
    victim:
        Receiver numerology; the victim transmits nothing.
    aggressor:
        Transmitter numerology; one subcarrier active with symbol variance
        ``sigma_d2``.
    l_max:
        Largest |l| tabulated.
    n_trials:
        Independent bursts.  Budgets below ``settings.min_confident_trials``
        are flagged ``low_confidence`` rather than rejected.
    sync:
        Aligned symbol clocks or a uniform random offset per trial.
    seed:
        Root seed; per-chunk streams are spawned from it.

    Returns
    -------
    InterferenceTable with per-entry standard errors.
    """
    l_max = settings.l_max if l_max is None else l_max
    n_trials = settings.trials if n_trials is None else n_trials
    seed = settings.seed if seed is None else seed
    _check_numerology(victim, aggressor)
    _check_l_max(l_max, victim)
    if n_trials < 2:
        raise InputError("at least two trials are needed for a standard error")

    layout = _layout(victim, aggressor, settings.measure_symbols)
    taps_v = _victim_taps(victim)
    taps_a = _aggressor_taps(aggressor)

    log.info(
        "evm_table_started",
        victim=victim.label,
        aggressor=aggressor.label,
        sync=sync.value,
        trials=n_trials,
        l_max=l_max,
    )

    def _trials(rng: np.random.Generator, count: int) -> np.ndarray:
        powers = np.empty((count, victim.num_subcarriers))
        for i in range(count):
            offset = 0 if sync is SyncModel.ALIGNED else int(rng.integers(0, layout.victim_period))
            samples = burst_samples(aggressor, layout.n_aggressor, rng, sigma_d2=sigma_d2, taps=taps_a)
            outputs = _victim_outputs(victim, samples, layout.first_window(offset), layout.n_measure, taps_v, True)
            powers[i] = _bin_power(victim, outputs)
        return powers

    per_trial = _entries(run_trials(_trials, n_trials, seed), l_max)
    values = per_trial.mean(axis=0)
    stderr = per_trial.std(axis=0, ddof=1) / np.sqrt(n_trials)
    distances = np.arange(-l_max, l_max + 1)

    low_confidence = n_trials < settings.min_confident_trials
    if low_confidence:
        log.warning("evm_table_low_confidence", trials=n_trials, threshold=settings.min_confident_trials)

    table = InterferenceTable(
        model=InterferenceModel.EVM,
        victim=victim,
        aggressor=aggressor,
        sync=sync,
        distances=distances,
        values=values,
        stderr=stderr,
        trials=n_trials,
        seed=seed,
        tail=fit_tail(distances, values, InterferenceModel.EVM),
        low_confidence=low_confidence,
    )
    log.info("evm_table_built", victim=victim.label, aggressor=aggressor.label, i1_db=float(table.values_db[l_max + 1]))
    return table


# ---------------------------------------------------------------------------
# Deterministic projection oracle
# ---------------------------------------------------------------------------


def expected_bin_powers(
    victim: WaveformSpec,
    aggressor: WaveformSpec,
    sync: SyncModel = SyncModel.UNIFORM_OFFSET,
    sigma_d2: float = 1.0,
) -> np.ndarray:
    """Exact E{|η_m|²} for every victim bin m, without symbol randomness.

    Symbols are i.i.d. and zero-mean, so the second moment is the sum over
    aggressor pulses of the squared pulse-onto-window projections, averaged
    over the same windows (and offsets) the Monte Carlo measures.
    """
    _check_numerology(victim, aggressor)
    layout = _layout(victim, aggressor, settings.measure_symbols)
    nfft = aggressor.num_subcarriers
    taps_v = _victim_taps(victim)
    taps_a = _aggressor_taps(aggressor)

    if aggressor.kind is WaveformKind.OQAM:
        step, support, n_pulses, variance = nfft // 2, _pulse_len(aggressor), 2 * layout.n_aggressor, sigma_d2 / 2
    else:
        step, support, n_pulses, variance = aggressor.symbol_len, aggressor.symbol_len, layout.n_aggressor, sigma_d2

    # Pulses whose support can reach a measured window for any offset.
    lo = layout.first_window(0)
    hi = layout.first_window(layout.victim_period) + layout.n_measure * layout.victim_period + _pulse_len(victim)
    first_pulse = max(0, (lo - support) // step)
    last_pulse = min(n_pulses - 1, hi // step + 1)

    pulses = []
    for j in range(first_pulse, last_pulse + 1):
        if aggressor.kind is WaveformKind.OQAM:
            data = np.zeros((nfft, j + 1))
            data[0, j] = 1.0
            assert taps_a is not None
            pulses.append(_oqam_synthesis(data, taps_a, aggressor.overlap))
        else:
            data = np.zeros((nfft, j + 1), dtype=complex)
            data[0, j] = 1.0
            pulses.append(_cp_ofdm_synthesis(data, aggressor.cp))

    offsets = [0] if sync is SyncModel.ALIGNED else range(layout.victim_period)
    total = np.zeros(nfft)
    for offset in offsets:
        first = layout.first_window(offset)
        second = np.zeros(victim.num_subcarriers)
        for pulse in pulses:
            proj = _victim_outputs(victim, pulse, first, layout.n_measure, taps_v, real=False)
            if victim.kind is WaveformKind.CP_OFDM:
                moment = np.abs(proj) ** 2
            elif aggressor.kind is WaveformKind.OQAM:
                moment = proj.real**2
            else:
                moment = np.abs(proj) ** 2 / 2
            factor = 2.0 if victim.kind is WaveformKind.OQAM else 1.0
            second += factor * variance * moment.mean(axis=1)
        total += second
    return total / len(offsets)


def projection_oracle_table(
    victim: WaveformSpec,
    aggressor: WaveformSpec,
    l_max: int | None = None,
    sync: SyncModel = SyncModel.UNIFORM_OFFSET,
    sigma_d2: float = 1.0,
) -> InterferenceTable:
    """EVM table from :func:`expected_bin_powers` (zero standard error)."""
    l_max = settings.l_max if l_max is None else l_max
    _check_l_max(l_max, victim)
    values = _entries(expected_bin_powers(victim, aggressor, sync, sigma_d2), l_max)
    distances = np.arange(-l_max, l_max + 1)
    log.info("oracle_table_built", victim=victim.label, aggressor=aggressor.label, sync=sync.value)
    return InterferenceTable(
        model=InterferenceModel.EVM,
        victim=victim,
        aggressor=aggressor,
        sync=sync,
        distances=distances,
        values=values,
        stderr=np.zeros_like(values),
        trials=0,
        seed=None,
        tail=fit_tail(distances, values, InterferenceModel.EVM),
    )


# ---------------------------------------------------------------------------
# Aggregation over allocations
# ---------------------------------------------------------------------------


def total_interference(
    table: InterferenceTable,
    alloc: SpectrumAllocation,
    direction: InterferenceDirection = InterferenceDirection.SECONDARY_TO_INCUMBENT,
    sigma_d2: float = 1.0,
    extrapolate: bool = True,
) -> float:
    """I_tot = σ_d² · Σ_{m ∈ victims, q ∈ aggressors} I(q - m)."""
    victims, aggressors = alloc.roles(direction)
    if victims.size == 0 or aggressors.size == 0:
        return 0.0
    distances = np.subtract.outer(aggressors, victims)
    return float(sigma_d2 * np.sum(table.lookup(distances, extrapolate)))


def per_subcarrier_variance(
    table: InterferenceTable,
    alloc: SpectrumAllocation,
    m: int,
    direction: InterferenceDirection = InterferenceDirection.SECONDARY_TO_INCUMBENT,
    sigma_d2: float = 1.0,
    extrapolate: bool = True,
) -> float:
    """Variance of η_m under the Gaussian approximation: σ_d² · Σ_q I(q - m).

    This is the noise variance to feed AWGN performance formulas for victim
    subcarrier ``m``.
    """
    if not 0 <= m < alloc.n_total:
        raise RangeError(f"subcarrier {m} outside [0, {alloc.n_total})")
    _, aggressors = alloc.roles(direction)
    if aggressors.size == 0:
        return 0.0
    return float(sigma_d2 * np.sum(table.lookup(aggressors - m, extrapolate)))


def interference_weights(
    table: InterferenceTable,
    alloc: SpectrumAllocation,
    direction: InterferenceDirection = InterferenceDirection.SECONDARY_TO_INCUMBENT,
    extrapolate: bool = True,
) -> np.ndarray:
    """Interference per unit power of each aggressor subcarrier onto the victim set.

    Entry k equals the sum of :func:`per_subcarrier_variance` over victims
    when only aggressor subcarrier k is active.  Ordered like the sorted
    aggressor indices.
    """
    victims, aggressors = alloc.roles(direction)
    if victims.size == 0:
        return np.zeros(aggressors.size)
    return table.lookup(np.subtract.outer(aggressors, victims), extrapolate).sum(axis=1)


# ---------------------------------------------------------------------------
# Coloredness
# ---------------------------------------------------------------------------


def interference_autocorrelation(
    victim: WaveformSpec,
    aggressor: WaveformSpec,
    n_symbols: int,
    n_trials: int | None = None,
    seed: int | None = None,
    sync: SyncModel = SyncModel.UNIFORM_OFFSET,
    l_max: int = 5,
) -> InterferenceCorrelation:
    """Normalized autocorrelation of η_m[n] across victim symbols n.

    ρ(Δn) = E{η[n+Δn] η*[n]} / E{|η[n]|²} per distance l; ρ(0) = 1 and bins
    that receive no interference report ρ(Δn) = 0 for Δn >= 1.  OQAM victims
    pair their half-symbols into one complex sample per symbol.
    """
    n_trials = settings.trials if n_trials is None else n_trials
    seed = settings.seed if seed is None else seed
    _check_numerology(victim, aggressor)
    _check_l_max(l_max, victim)
    min_symbols = 2 * max(victim.overlap, aggressor.overlap)
    if n_symbols < min_symbols:
        raise InputError(f"n_symbols must be at least 2K = {min_symbols}")

    layout = _layout(victim, aggressor, n_symbols)
    taps_v = _victim_taps(victim)
    taps_a = _aggressor_taps(aggressor)
    lags = np.arange(n_symbols)

    def _trials(rng: np.random.Generator, count: int) -> np.ndarray:
        # Row 0: E|η|²; rows 1..: lagged cross products, per bin.
        stats = np.zeros((count, n_symbols, victim.num_subcarriers), dtype=complex)
        for i in range(count):
            offset = 0 if sync is SyncModel.ALIGNED else int(rng.integers(0, layout.victim_period))
            samples = burst_samples(aggressor, layout.n_aggressor, rng, taps=taps_a)
            eta = _victim_outputs(victim, samples, layout.first_window(offset), n_symbols, taps_v, True)
            if victim.kind is WaveformKind.OQAM:
                eta = eta[:, 0::2] + 1j * eta[:, 1::2]
            for lag in lags:
                stats[i, lag] = np.mean(eta[:, lag:] * np.conj(eta[:, : n_symbols - lag]), axis=1)
        return stats

    moments = run_trials(_trials, n_trials, seed).mean(axis=0)
    power = moments[0].real
    active = power > 1e-20 * max(float(power.max()), DB_FLOOR)
    rho = np.where(active, moments / np.where(active, power, 1.0), 0.0)
    rho[0] = 1.0
    log.info("autocorrelation_built", victim=victim.label, aggressor=aggressor.label, trials=n_trials)
    return InterferenceCorrelation(
        victim=victim,
        aggressor=aggressor,
        sync=sync,
        distances=np.arange(-l_max, l_max + 1),
        lags=lags,
        rho=_entries(rho, l_max),
        trials=n_trials,
        seed=seed,
    )
