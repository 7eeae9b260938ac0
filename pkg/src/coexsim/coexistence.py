"""Coexistence decisions driven by interference tables.

Two problems are solved here:

  1. Guard-band sizing: the fewest empty subcarriers between an incumbent
     block and a secondary block such that the incumbent's mean
     per-subcarrier interference stays below a constraint.  Found by an
     exponential search followed by bisection, which relies on the
     interference decaying with distance.
  2. Interference-constrained power allocation: maximize
     Σ log2(1 + p_k g_k / σ_k²) subject to Σ p_k <= P_total and
     Σ w_k p_k <= I_th.  The optimum is a water-filling whose level is set by
     two dual multipliers; both are found by bisection.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
import structlog
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict

from coexsim.config import settings
from coexsim.errors import InputError, NumericalError
from coexsim.interference import (
    InterferenceModel,
    InterferenceTable,
    SpectrumAllocation,
    interference_weights,
    total_interference,
)

log = structlog.get_logger(__name__)

LN2 = math.log(2)
MAX_BRACKET_DOUBLINGS = 2000


# ---------------------------------------------------------------------------
# Guard band
# ---------------------------------------------------------------------------


class GuardBandResult(BaseModel, frozen=True):
    """Smallest guard meeting ``constraint_db``; ``guard`` is None when unsatisfiable."""

    constraint_db: float
    guard: int | None
    satisfiable: bool
    achieved_db: float  # at ``guard``, or at the ceiling when unsatisfiable
    model: InterferenceModel
    waveform: str | None
    incumbent_width: int
    secondary_width: int
    ceiling: int
    two_sided: bool = False


def incumbent_interference_db(
    table: InterferenceTable,
    incumbent_width: int,
    secondary_width: int,
    guard: int,
    sigma_d2: float = 1.0,
    two_sided: bool = False,
) -> float:
    """Mean interference per incumbent subcarrier, in dB relative to σ_d²."""
    alloc = SpectrumAllocation.guard_layout(incumbent_width, secondary_width, guard, two_sided)
    mean = total_interference(table, alloc, sigma_d2=sigma_d2) / (incumbent_width * sigma_d2)
    return 10 * math.log10(max(mean, 1e-300))


def required_guard_band(
    table: InterferenceTable,
    incumbent_width: int = 20,
    secondary_width: int = 20,
    constraint_db: float = -50.0,
    ceiling: int | None = None,
    sigma_d2: float = 1.0,
    two_sided: bool = False,
) -> GuardBandResult:
    """Smallest guard g >= 0 with incumbent interference <= ``constraint_db``.

    The returned g satisfies the constraint while g - 1 violates it.  If even
    ``ceiling`` guard subcarriers do not suffice the result is flagged
    unsatisfiable instead of raising.  ``two_sided`` splits the secondary
    around the incumbent with a gap of g on each side.
    """
    ceiling = settings.guard_ceiling if ceiling is None else ceiling
    if incumbent_width < 1 or secondary_width < 1:
        raise InputError("block widths must be positive")

    def _level(guard: int) -> float:
        return incumbent_interference_db(table, incumbent_width, secondary_width, guard, sigma_d2, two_sided)

    def _result(guard: int | None, achieved: float) -> GuardBandResult:
        return GuardBandResult(
            constraint_db=constraint_db,
            guard=guard,
            satisfiable=guard is not None,
            achieved_db=achieved,
            model=table.model,
            waveform=table.aggressor.label if table.aggressor else None,
            incumbent_width=incumbent_width,
            secondary_width=secondary_width,
            ceiling=ceiling,
            two_sided=two_sided,
        )

    if _level(0) <= constraint_db:
        return _result(0, _level(0))

    lo, hi = 0, 1
    while _level(hi) > constraint_db:
        if hi >= ceiling:
            log.warning("guard_band_unsatisfiable", constraint_db=constraint_db, ceiling=ceiling)
            return _result(None, _level(ceiling))
        lo, hi = hi, min(2 * hi, ceiling)

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _level(mid) <= constraint_db:
            hi = mid
        else:
            lo = mid

    log.info("guard_band_found", constraint_db=constraint_db, guard=hi, model=table.model.value)
    return _result(hi, _level(hi))


def guard_band_sweep(
    table: InterferenceTable,
    constraints_db: ArrayLike,
    incumbent_width: int = 20,
    secondary_width: int = 20,
    ceiling: int | None = None,
    two_sided: bool = False,
) -> list[GuardBandResult]:
    return [
        required_guard_band(table, incumbent_width, secondary_width, float(c), ceiling, two_sided=two_sided)
        for c in np.atleast_1d(np.asarray(constraints_db, dtype=float))
    ]


# ---------------------------------------------------------------------------
# Power allocation
# ---------------------------------------------------------------------------


class Binding(str, Enum):
    NONE = "none"
    POWER = "power"
    INTERFERENCE = "interference"
    BOTH = "both"


class PowerAllocationResult(BaseModel):
    """Allocation with the dual multipliers that produced it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    powers: np.ndarray
    capacity: float  # bit/s/Hz
    binding: Binding
    power_multiplier: float  # λ, price of total power
    interference_multiplier: float  # μ, price of injected interference
    total_power: float
    interference: float
    kkt_residual: float
    duality_gap: float
    water_levels: np.ndarray  # p_k + σ_k²/g_k; equals 1/(ln2·(λ + μ·w_k)) where p_k > 0


def capacity(powers: ArrayLike, gains: ArrayLike, noise: ArrayLike) -> float:
    """Σ log2(1 + p_k g_k / σ_k²)."""
    p = np.asarray(powers, dtype=float)
    return float(np.sum(np.log2(1 + p * np.asarray(gains, dtype=float) / np.asarray(noise, dtype=float))))


def capacity_ratio_bounds(weights_a: ArrayLike, weights_b: ArrayLike) -> tuple[float, float]:
    """Bounds on C_a(I_th) / C_b(I_th) holding at every I_th.

    Both allocations share gains, noise and P_total and differ only in their
    interference weights.  An allocation feasible under ``weights_a`` at I_th
    is feasible under ``weights_b`` at R·I_th with R = max_k w_b/w_a, and the
    optimal capacity is concave in I_th with C(0) >= 0, so C_a <= max(R, 1)·C_b.
    The lower bound follows by swapping the roles.
    """
    a = np.asarray(weights_a, dtype=float)
    b = np.asarray(weights_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InputError("weight vectors must be non-empty and of equal length")
    if np.any(a < 0) or np.any(b < 0):
        raise InputError("interference weights must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        b_over_a = np.where(b == 0, 0.0, b / a)
        a_over_b = np.where(a == 0, 0.0, a / b)
    upper = max(float(np.max(b_over_a)), 1.0)
    lower = 1.0 / max(float(np.max(a_over_b)), 1.0)
    return lower, upper


def _validate_problem(
    gains: np.ndarray, noise: np.ndarray, weights: np.ndarray, p_total: float, i_th: float
) -> None:
    if gains.ndim != 1 or gains.size == 0 or weights.shape != gains.shape or noise.shape != gains.shape:
        raise InputError("gains, noise and weights must be non-empty vectors of equal length")
    if np.any(gains <= 0) or np.any(noise <= 0):
        raise InputError("gains and noise must be positive")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InputError("interference weights must be finite and non-negative")
    if not p_total > 0 or not math.isfinite(p_total):
        raise InputError(f"P_total must be a positive finite budget, got {p_total}")
    if not i_th > 0:
        raise InputError(f"I_th must be positive, got {i_th}")


def allocate_power(
    gains: ArrayLike,
    noise: ArrayLike,
    weights: ArrayLike,
    p_total: float,
    i_th: float,
) -> PowerAllocationResult:
    """Two-constraint water-filling by bisection on the dual multipliers.

    Parameters
    ----------
    gains:
        Channel power gain g_k per secondary subcarrier.
    noise:
        Noise variance σ_k² per subcarrier (scalar broadcasts).
    weights:
        Interference w_k injected onto the incumbent per unit power on k.
    p_total:
        Total transmit power budget.
    i_th:
        Interference budget; ``math.inf`` leaves only the power constraint.

    Returns
    -------
    PowerAllocationResult whose powers are p_k = max(0, 1/(ln2·(λ + μ w_k)) - σ_k²/g_k).
    """
    g = np.asarray(gains, dtype=float)
    w = np.asarray(weights, dtype=float)
    sigma2 = np.broadcast_to(np.asarray(noise, dtype=float), g.shape).astype(float)
    _validate_problem(g, sigma2, w, p_total, i_th)

    floor = sigma2 / g
    iterations = settings.bisection_iterations
    lam_ceiling = float(np.max(1 / (LN2 * floor)))  # every p_k is zero at this price

    def _powers(lam: float, mu: float) -> np.ndarray:
        price = lam + mu * w
        with np.errstate(divide="ignore"):
            level = np.where(price > 0, 1 / (LN2 * np.where(price > 0, price, 1.0)), np.inf)
        return np.maximum(level - floor, 0.0)

    def _lambda_for(mu: float) -> float:
        if np.sum(_powers(0.0, mu)) <= p_total:
            return 0.0
        lo, hi = 0.0, lam_ceiling
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if np.sum(_powers(mid, mu)) > p_total:
                lo = mid
            else:
                hi = mid
        return hi

    def _interference(mu: float) -> float:
        return float(w @ _powers(_lambda_for(mu), mu))

    mu = 0.0
    if _interference(0.0) > i_th:
        hi = 1.0
        for _ in range(MAX_BRACKET_DOUBLINGS):
            if _interference(hi) <= i_th:
                break
            hi *= 2
        else:
            raise NumericalError("interference multiplier bracket did not close")
        lo = 0.0
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if _interference(mid) > i_th:
                lo = mid
            else:
                hi = mid
        mu = hi

    lam = _lambda_for(mu)
    p = _powers(lam, mu)
    if not np.all(np.isfinite(p)):
        raise NumericalError("water-filling produced non-finite powers")

    result = _package(p, g, sigma2, w, lam, mu, p_total, i_th)
    log.debug(
        "power_allocated",
        capacity=result.capacity,
        binding=result.binding.value,
        kkt_residual=result.kkt_residual,
    )
    return result


def _package(
    p: np.ndarray,
    g: np.ndarray,
    sigma2: np.ndarray,
    w: np.ndarray,
    lam: float,
    mu: float,
    p_total: float,
    i_th: float,
) -> PowerAllocationResult:
    total = float(np.sum(p))
    injected = float(w @ p)
    price = lam + mu * w
    marginal = g / (LN2 * (sigma2 + p * g))

    # Stationarity on active subcarriers, dual feasibility on idle ones.
    scale = np.where(price > 0, price, marginal)
    active = p > 0
    stationarity = np.where(active, np.abs(marginal - price), np.maximum(marginal - price, 0.0)) / scale
    slack = [(p_total - total) / p_total if lam > 0 else 0.0]
    if mu > 0 and math.isfinite(i_th):
        slack.append((i_th - injected) / i_th)
    residual = float(max(np.max(stationarity, initial=0.0), *np.abs(slack)))

    gap = lam * (p_total - total) + (mu * (i_th - injected) if mu > 0 else 0.0)
    if lam > 0 and mu > 0:
        binding = Binding.BOTH
    elif lam > 0:
        binding = Binding.POWER
    elif mu > 0:
        binding = Binding.INTERFERENCE
    else:
        binding = Binding.NONE

    return PowerAllocationResult(
        powers=p,
        capacity=capacity(p, g, sigma2),
        binding=binding,
        power_multiplier=lam,
        interference_multiplier=mu,
        total_power=total,
        interference=injected,
        kkt_residual=residual,
        duality_gap=float(gap),
        water_levels=p + sigma2 / g,
    )


# ---------------------------------------------------------------------------
# Capacity versus tolerated interference
# ---------------------------------------------------------------------------


class CapacityCurve(BaseModel, frozen=True):
    """Secondary capacity over an I_th sweep for one waveform and one model."""

    waveform: str | None
    model: InterferenceModel
    i_th: tuple[float, ...]
    capacity: tuple[float, ...]
    total_power: tuple[float, ...]
    interference: tuple[float, ...]
    binding: tuple[str, ...]

    def rows(self) -> list[dict[str, object]]:
        return [
            {
                "waveform": self.waveform,
                "model": self.model.value,
                "i_th": i,
                "capacity": c,
                "total_power": p,
                "interference": x,
                "binding": b,
            }
            for i, c, p, x, b in zip(
                self.i_th, self.capacity, self.total_power, self.interference, self.binding, strict=True
            )
        ]


def default_scenario() -> SpectrumAllocation:
    """60 subcarriers, incumbent on 20-39, secondary on 0-19 and 40-59."""
    return SpectrumAllocation.sandwich(n_total=60, incumbent_start=20, incumbent_width=20)


def secondary_capacity_curve(
    alloc: SpectrumAllocation,
    table_psd: InterferenceTable,
    table_evm: InterferenceTable,
    i_th_sweep: ArrayLike,
    p_total: float = 1.0,
    gains: ArrayLike | None = None,
    noise: ArrayLike | None = None,
    snr_db: float = 10.0,
) -> list[CapacityCurve]:
    """Capacity of the secondary versus I_th under the PSD and EVM models.

    Both tables describe the same secondary waveform.  Unit gains and a
    noise level giving ``snr_db`` per subcarrier at uniform full power are
    used unless given.

    Returns
    -------
    Two curves, PSD model first.
    """
    n_sec = len(alloc.secondary_set)
    if n_sec == 0:
        raise InputError("scenario has no secondary subcarriers")
    g = np.ones(n_sec) if gains is None else np.asarray(gains, dtype=float)
    sigma2 = (
        np.full(n_sec, p_total / (n_sec * 10 ** (snr_db / 10)))
        if noise is None
        else np.broadcast_to(np.asarray(noise, dtype=float), (n_sec,))
    )
    sweep = np.sort(np.atleast_1d(np.asarray(i_th_sweep, dtype=float)))

    curves = []
    for table in (table_psd, table_evm):
        if table.l_max < alloc.max_distance:
            log.warning(
                "capacity_weights_extrapolated",
                model=table.model.value,
                l_max=table.l_max,
                max_distance=alloc.max_distance,
            )
        weights = interference_weights(table, alloc)
        results = [allocate_power(g, sigma2, weights, p_total, float(i_th)) for i_th in sweep]
        curve = CapacityCurve(
            waveform=table.aggressor.label if table.aggressor else None,
            model=table.model,
            i_th=tuple(float(i) for i in sweep),
            capacity=tuple(r.capacity for r in results),
            total_power=tuple(r.total_power for r in results),
            interference=tuple(r.interference for r in results),
            binding=tuple(r.binding.value for r in results),
        )
        log.info(
            "capacity_curve_built",
            waveform=curve.waveform,
            model=table.model.value,
            points=len(sweep),
            capacity_min=min(curve.capacity),
            capacity_max=max(curve.capacity),
        )
        curves.append(curve)
    return curves
