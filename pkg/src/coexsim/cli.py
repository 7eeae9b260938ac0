"""Command-line front end.

Subcommands:
  table      interference table I(l) under the EVM or PSD model
  psd        raw and receive-truncated PSD of one aggressor subcarrier
  guardband  minimum guard band over a constraint sweep, both models and waveforms
  allocate   secondary capacity versus tolerated interference (four curves)

Configuration resolves as built-in defaults, then a flat ``key=value`` file
(``--config``), then command-line flags.  Every output embeds the tool
version, the resolved configuration and the seed.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Literal

import numpy as np
import structlog
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from coexsim import __version__
from coexsim.coexistence import (
    capacity_ratio_bounds,
    default_scenario,
    guard_band_sweep,
    secondary_capacity_curve,
)
from coexsim.config import settings
from coexsim.errors import CoexsimError, NumericalError
from coexsim.interference import (
    InterferenceModel,
    InterferenceTable,
    SyncModel,
    evm_interference_table,
    interference_weights,
    projection_oracle_table,
)
from coexsim.psd import aggressor_psd, psd_interference_table, truncated_psd
from coexsim.waveform import WaveformKind, WaveformSpec

log = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------


class ScenarioConfig(BaseModel):
    """Fully resolved run configuration; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Literal["table", "psd", "guardband", "allocate"]

    # Waveforms
    victim: WaveformKind = WaveformKind.CP_OFDM
    aggressor: WaveformKind = WaveformKind.OQAM
    subcarriers: int = Field(default_factory=lambda: settings.subcarriers)
    cp_len: int | None = None
    overlap: int = Field(default_factory=lambda: settings.overlap_factor)

    # Tables
    model: InterferenceModel = InterferenceModel.EVM
    sync: SyncModel = SyncModel.UNIFORM_OFFSET
    oracle: bool = False
    l_max: int = Field(default_factory=lambda: settings.l_max, ge=1)
    trials: int = Field(default_factory=lambda: settings.trials, ge=2)
    seed: int = Field(default_factory=lambda: settings.seed, ge=0)

    # PSD
    psd_symbols: int = Field(default_factory=lambda: settings.psd_symbols, ge=1)
    psd_trials: int = Field(default_factory=lambda: settings.psd_trials, ge=1)

    # Guard band
    incumbent_width: int = Field(default=20, ge=1)
    secondary_width: int = Field(default=20, ge=1)
    constraints_db: tuple[float, ...] = (-20.0, -25.0, -30.0, -35.0, -40.0, -45.0, -50.0, -55.0, -60.0)
    ceiling: int = Field(default_factory=lambda: settings.guard_ceiling, ge=1)
    two_sided: bool = False

    # Power allocation
    p_total: float = Field(default=1.0, gt=0)
    snr_db: float = 10.0
    ith_min: float = Field(default=1e-5, gt=0)
    ith_max: float = Field(default=1e-1, gt=0)
    ith_points: int = Field(default=9, ge=2)

    # Output
    out: Path | None = None
    format: Literal["csv", "json"] = "csv"
    log_level: str = Field(default_factory=lambda: settings.log_level)

    @field_validator("constraints_db", mode="before")
    @classmethod
    def _split_list(cls, value: object) -> object:
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(",") if v.strip())
        return value

    def spec(self, kind: WaveformKind) -> WaveformSpec:
        if kind is WaveformKind.CP_OFDM:
            return WaveformSpec.cp_ofdm(self.subcarriers, self.cp_len)
        return WaveformSpec.oqam(self.subcarriers, self.overlap)

    @property
    def ith_sweep(self) -> np.ndarray:
        return np.logspace(np.log10(self.ith_min), np.log10(self.ith_max), self.ith_points)


class RunReport(BaseModel):
    """JSON document written by every subcommand."""

    tool: str = "coexsim"
    version: str = __version__
    command: str
    seed: int
    config: dict[str, Any]
    meta: dict[str, Any]
    columns: list[str]
    rows: list[dict[str, Any]]


def load_config_file(path: Path) -> dict[str, str]:
    """Read a flat ``key=value`` file; hyphens in keys become underscores."""
    if not path.is_file():
        raise CoexsimError(f"config file {path} does not exist")
    return {k.strip().replace("-", "_"): v for k, v in dotenv_values(path).items() if v is not None}


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    """Defaults < config file < flags given on the command line."""
    values: dict[str, Any] = {}
    if args.config is not None:
        values.update(load_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if k not in {"config", "handler"} and v is not None}
    values.update(flags)
    return ScenarioConfig(**values)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _csv_text(report: RunReport) -> str:
    buf = io.StringIO()
    buf.write(f"# {report.tool} {report.version}\n")
    buf.write(f"# command: {report.command}\n")
    buf.write(f"# seed: {report.seed}\n")
    buf.write(f"# config: {json.dumps(report.config, sort_keys=True)}\n")
    buf.write(f"# meta: {json.dumps(report.meta, sort_keys=True)}\n")
    writer = csv.DictWriter(buf, fieldnames=report.columns, lineterminator="\n")
    writer.writeheader()
    for row in report.rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def write_report(cfg: ScenarioConfig, meta: dict[str, Any], columns: list[str], rows: list[dict[str, Any]]) -> None:
    report = RunReport(
        command=cfg.command,
        seed=cfg.seed,
        config=cfg.model_dump(mode="json", exclude={"out"}),
        meta=meta,
        columns=columns,
        rows=rows,
    )
    text = _csv_text(report) if cfg.format == "csv" else report.model_dump_json(indent=2) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
        return
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    cfg.out.write_text(text, encoding="utf-8")
    log.info("report_written", path=str(cfg.out), rows=len(rows), format=cfg.format)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _evm_table(cfg: ScenarioConfig, victim: WaveformSpec, aggressor: WaveformSpec) -> InterferenceTable:
    if cfg.oracle:
        return projection_oracle_table(victim, aggressor, cfg.l_max, cfg.sync)
    return evm_interference_table(victim, aggressor, cfg.l_max, cfg.trials, cfg.sync, cfg.seed)


def _psd_table(cfg: ScenarioConfig, aggressor: WaveformSpec) -> InterferenceTable:
    return psd_interference_table(aggressor_psd(aggressor, cfg.psd_symbols, cfg.seed), cfg.l_max)


def _tables_per_waveform(cfg: ScenarioConfig) -> dict[WaveformKind, tuple[InterferenceTable, InterferenceTable]]:
    victim = cfg.spec(cfg.victim)
    tables = {}
    for kind in (WaveformKind.CP_OFDM, WaveformKind.OQAM):
        secondary = cfg.spec(kind)
        tables[kind] = (_psd_table(cfg, secondary), _evm_table(cfg, victim, secondary))
    return tables


def cmd_table(cfg: ScenarioConfig) -> None:
    aggressor = cfg.spec(cfg.aggressor)
    if cfg.model is InterferenceModel.PSD:
        table = _psd_table(cfg, aggressor)
    else:
        table = _evm_table(cfg, cfg.spec(cfg.victim), aggressor)
    write_report(cfg, table.metadata(), ["l", "I_linear", "I_db", "stderr_db"], table.rows())


def cmd_psd(cfg: ScenarioConfig) -> None:
    aggressor = cfg.spec(cfg.aggressor)
    raw = aggressor_psd(aggressor, cfg.psd_symbols, cfg.seed)
    cut = truncated_psd(aggressor, cfg.spec(cfg.victim), cfg.psd_trials, cfg.seed, cfg.sync, cfg.psd_symbols)
    rows = [
        {**row, "truncated_linear": float(v), "truncated_db": float(db)}
        for row, v, db in zip(raw.rows(), cut.values, cut.values_db, strict=True)
    ]
    meta = {"raw": raw.metadata(), "truncated": cut.metadata(), "victim": cfg.spec(cfg.victim).label}
    columns = ["freq_over_dF", "psd_linear", "psd_db", "truncated_linear", "truncated_db"]
    write_report(cfg, meta, columns, rows)


def cmd_guardband(cfg: ScenarioConfig) -> None:
    rows = []
    meta: dict[str, Any] = {"constraint_reference": "mean interference per incumbent subcarrier, dB re sigma_d2"}
    for kind, tables in _tables_per_waveform(cfg).items():
        for table in tables:
            meta[f"{kind.value}/{table.model.value}"] = table.metadata()
            for res in guard_band_sweep(
                table, cfg.constraints_db, cfg.incumbent_width, cfg.secondary_width, cfg.ceiling, cfg.two_sided
            ):
                rows.append(
                    {
                        "secondary": kind.value,
                        "model": table.model.value,
                        "constraint_db": res.constraint_db,
                        "guard": "" if res.guard is None else res.guard,
                        "satisfiable": res.satisfiable,
                        "achieved_db": res.achieved_db,
                    }
                )
    columns = ["secondary", "model", "constraint_db", "guard", "satisfiable", "achieved_db"]
    write_report(cfg, meta, columns, rows)


def cmd_allocate(cfg: ScenarioConfig) -> None:
    scenario = default_scenario()
    rows = []
    meta: dict[str, Any] = {
        "scenario": scenario.model_dump(mode="json"),
        "gains": "unit",
        "snr_db": cfg.snr_db,
        "p_total": cfg.p_total,
        "interference_constraint": "aggregate over the incumbent band",
    }
    # Size tables to the scenario span so the weights need no tail extrapolation.
    l_max = min(max(cfg.l_max, scenario.max_distance), (cfg.subcarriers - 1) // 2)
    tables = _tables_per_waveform(cfg.model_copy(update={"l_max": l_max}))
    evm_weights = {kind: interference_weights(evm, scenario) for kind, (_, evm) in tables.items()}
    lower, upper = capacity_ratio_bounds(evm_weights[WaveformKind.OQAM], evm_weights[WaveformKind.CP_OFDM])
    meta["table_l_max"] = l_max
    meta["evm_capacity_ratio_bounds"] = {"oqam_over_cp_ofdm": [lower, upper]}
    for kind, (table_psd, table_evm) in tables.items():
        curves = secondary_capacity_curve(
            scenario, table_psd, table_evm, cfg.ith_sweep, p_total=cfg.p_total, snr_db=cfg.snr_db
        )
        for curve in curves:
            rows.extend({**row, "secondary": kind.value} for row in curve.rows())
    columns = ["secondary", "waveform", "model", "i_th", "capacity", "total_power", "interference", "binding"]
    write_report(cfg, meta, columns, rows)


COMMANDS: dict[str, Callable[[ScenarioConfig], None]] = {
    "table": cmd_table,
    "psd": cmd_psd,
    "guardband": cmd_guardband,
    "allocate": cmd_allocate,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out", type=Path, help="output file (stdout when omitted)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--subcarriers", "-M", type=int, help="DFT size M")
    common.add_argument("--cp-len", dest="cp_len", type=int)
    common.add_argument("--overlap", "-K", type=int, help="PHYDYAS overlapping factor K")
    common.add_argument("--victim", choices=[k.value for k in WaveformKind])
    common.add_argument("--aggressor", choices=[k.value for k in WaveformKind])
    common.add_argument("--sync", choices=[s.value for s in SyncModel])
    common.add_argument("--lmax", dest="l_max", type=int)
    common.add_argument("--oracle", action="store_const", const=True, help="deterministic projection oracle")
    common.add_argument("--psd-symbols", dest="psd_symbols", type=int)
    common.add_argument("--log-level", dest="log_level")

    parser = argparse.ArgumentParser(prog="coexsim", description="CP-OFDM / OFDM-OQAM coexistence simulator")
    parser.add_argument("--version", action="version", version=f"coexsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    table = sub.add_parser("table", parents=[common], help="interference table I(l)")
    table.add_argument("--model", choices=[m.value for m in InterferenceModel])

    psd = sub.add_parser("psd", parents=[common], help="raw and truncated aggressor PSD")
    psd.add_argument("--psd-trials", dest="psd_trials", type=int)

    guard = sub.add_parser("guardband", parents=[common], help="guard band versus constraint")
    guard.add_argument("--constraints", dest="constraints_db", help="comma-separated constraints in dB")
    guard.add_argument("--incumbent-width", dest="incumbent_width", type=int)
    guard.add_argument("--secondary-width", dest="secondary_width", type=int)
    guard.add_argument("--ceiling", type=int)
    guard.add_argument(
        "--two-sided", dest="two_sided", action="store_const", const=True, help="secondary on both sides of the incumbent"
    )

    alloc = sub.add_parser("allocate", parents=[common], help="capacity versus tolerated interference")
    alloc.add_argument("--p-total", dest="p_total", type=float)
    alloc.add_argument("--snr-db", dest="snr_db", type=float)
    alloc.add_argument("--ith-min", dest="ith_min", type=float)
    alloc.add_argument("--ith-max", dest="ith_max", type=float)
    alloc.add_argument("--ith-points", dest="ith_points", type=int)
    return parser


def configure_logging(level: str) -> None:
    structlog.configure(
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level.upper(), logging.INFO)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValidationError, CoexsimError) as exc:
        sys.stderr.write(f"coexsim: configuration error: {exc}\n")
        return EXIT_CONFIG

    configure_logging(cfg.log_level)
    log.info("command_started", command=cfg.command, seed=cfg.seed)
    try:
        COMMANDS[cfg.command](cfg)
    except (NumericalError, FloatingPointError) as exc:
        sys.stderr.write(f"coexsim: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValidationError, ValueError) as exc:
        sys.stderr.write(f"coexsim: configuration error: {exc}\n")
        return EXIT_CONFIG
    return EXIT_OK
