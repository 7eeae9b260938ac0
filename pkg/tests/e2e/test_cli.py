"""E2E tests for the coexsim command line.

Every run uses M=64 and small budgets so the whole file stays quick; outputs
are written to tmp_path and parsed back.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from coexsim import __version__, cli
from coexsim.errors import NumericalError

SMALL = ["--subcarriers", "64", "--cp-len", "8", "--log-level", "WARNING"]

# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _run(*argv: str) -> int:
    return cli.main(list(argv))


def _read_csv(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    """Split a CSV report into its '#' metadata lines and data rows."""
    lines = path.read_text().splitlines()
    meta = [line for line in lines if line.startswith("#")]
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    return meta, rows


# ===========================================================================
# table
# ===========================================================================


class TestTableCommand:
    """coexsim table."""

    def test_writes_one_row_per_distance(self, tmp_path: Path) -> None:
        out = tmp_path / "table.csv"
        assert _run("table", *SMALL, "--lmax", "20", "--trials", "50", "--seed", "1", "--out", str(out)) == 0
        meta, rows = _read_csv(out)
        assert len(rows) == 41
        assert list(rows[0]) == ["l", "I_linear", "I_db", "stderr_db"]
        assert [int(r["l"]) for r in rows] == list(range(-20, 21))
        assert meta[0] == f"# coexsim {__version__}"
        assert "# seed: 1" in meta

    def test_same_seed_is_byte_identical(self, tmp_path: Path) -> None:
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["table", *SMALL, "--lmax", "10", "--trials", "40", "--seed", "7"]
        assert _run(*args, "--out", str(first)) == 0
        assert _run(*args, "--out", str(second)) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_low_trial_budget_is_flagged(self, tmp_path: Path) -> None:
        out = tmp_path / "low.json"
        assert _run("table", *SMALL, "--lmax", "5", "--trials", "10", "--format", "json", "--out", str(out)) == 0
        report = json.loads(out.read_text())
        assert report["meta"]["low_confidence"] is True
        assert report["config"]["trials"] == 10
        assert all("stderr_db" in row for row in report["rows"])

    def test_psd_model_table(self, tmp_path: Path) -> None:
        out = tmp_path / "psd_table.csv"
        code = _run("table", *SMALL, "--model", "psd", "--lmax", "10", "--psd-symbols", "300", "--out", str(out))
        assert code == 0
        _, rows = _read_csv(out)
        assert len(rows) == 21
        centre = next(r for r in rows if r["l"] == "0")
        assert float(centre["I_linear"]) > 0.7

    def test_oracle_table(self, tmp_path: Path) -> None:
        out = tmp_path / "oracle.json"
        assert _run("table", *SMALL, "--oracle", "--lmax", "5", "--format", "json", "--out", str(out)) == 0
        report = json.loads(out.read_text())
        assert report["meta"]["trials"] == 0
        assert report["meta"]["low_confidence"] is False


# ===========================================================================
# psd / guardband / allocate
# ===========================================================================


class TestOtherCommands:
    """coexsim psd, guardband and allocate."""

    def test_psd(self, tmp_path: Path) -> None:
        out = tmp_path / "psd.csv"
        code = _run("psd", *SMALL, "--psd-symbols", "300", "--psd-trials", "1", "--out", str(out))
        assert code == 0
        _, rows = _read_csv(out)
        assert list(rows[0]) == ["freq_over_dF", "psd_linear", "psd_db", "truncated_linear", "truncated_db"]
        assert len(rows) == 16 * 64

    def test_guardband(self, tmp_path: Path) -> None:
        out = tmp_path / "guard.csv"
        code = _run(
            "guardband", *SMALL, "--oracle", "--lmax", "20", "--psd-symbols", "300",
            "--constraints=-20,-30,-40", "--out", str(out),
        )
        assert code == 0
        _, rows = _read_csv(out)
        assert len(rows) == 2 * 2 * 3
        for secondary in ("cp-ofdm", "oqam"):
            for model in ("psd", "evm"):
                guards = [
                    int(r["guard"]) for r in rows
                    if r["secondary"] == secondary and r["model"] == model and r["guard"]
                ]
                assert guards == sorted(guards)

    def test_allocate(self, tmp_path: Path) -> None:
        out = tmp_path / "alloc.json"
        code = _run(
            "allocate", *SMALL, "--oracle", "--psd-symbols", "300", "--ith-points", "3",
            "--format", "json", "--out", str(out),
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert len(report["rows"]) == 4 * 3
        assert report["meta"]["snr_db"] == 10.0
        # M=64 caps the tables at 31 subcarriers, short of the 39 the scenario spans.
        assert report["meta"]["table_l_max"] == 31
        lower, upper = report["meta"]["evm_capacity_ratio_bounds"]["oqam_over_cp_ofdm"]
        assert 0 < lower <= 1.0 <= upper
        assert {r["model"] for r in report["rows"]} == {"psd", "evm"}


# ===========================================================================
# Configuration and exit codes
# ===========================================================================


class TestExitCodes:
    """Configuration errors exit 2, numerical failures exit 3."""

    def test_unknown_config_key(self, tmp_path: Path) -> None:
        cfg = tmp_path / "bad.env"
        cfg.write_text("bogus=1\n")
        assert _run("table", *SMALL, "--config", str(cfg)) == 2

    def test_config_file_is_applied(self, tmp_path: Path) -> None:
        cfg = tmp_path / "run.env"
        cfg.write_text("trials=20\nl_max=4\nseed=9\n")
        out = tmp_path / "t.json"
        assert _run("table", *SMALL, "--config", str(cfg), "--seed", "2", "--format", "json", "--out", str(out)) == 0
        report = json.loads(out.read_text())
        assert report["config"]["trials"] == 20
        assert report["seed"] == 2
        assert len(report["rows"]) == 9

    def test_single_trial_rejected(self) -> None:
        assert _run("table", *SMALL, "--trials", "1") == 2

    def test_bad_numerology_rejected(self) -> None:
        assert _run("table", "--subcarriers", "100", "--trials", "4", "--log-level", "WARNING") == 2

    def test_l_max_beyond_dft_rejected(self) -> None:
        assert _run("table", *SMALL, "--lmax", "40", "--trials", "4") == 2

    def test_unknown_choice_exits_via_argparse(self) -> None:
        with pytest.raises(SystemExit) as exc:
            _run("table", "--victim", "ofdm-x")
        assert exc.value.code == 2

    def test_numerical_failure(self, monkeypatch) -> None:
        def _fail(*args, **kwargs):
            raise NumericalError("bisection did not converge")

        monkeypatch.setattr(cli, "evm_interference_table", _fail)
        assert _run("table", *SMALL, "--trials", "4") == 3
