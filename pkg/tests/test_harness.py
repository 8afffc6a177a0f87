"""Tests for report emission, study configuration/execution, and the CLI."""

from __future__ import annotations

import math

import numpy as np
import pytest

import fracpg.cli as cli
import fracpg.study as study
from fracpg.errors import NumericError
from fracpg.report import (
    CSV_HEADER,
    ConvergenceReport,
    ReportRow,
    emit_markdown,
    emit_report,
    pairwise_rates,
    parse_report,
)
from fracpg.study import (
    StudyConfig,
    expected_rates,
    run_study,
    table_studies,
    theoretical_rate,
)

# published stability-constant row for order 0.5, step counts 20..640
INFSUP_HALF_ROW = (0.4754, 0.4714, 0.4703, 0.4700, 0.4700, 0.4699)


class TestPairwiseRates:
    def test_benchmark_error_row(self):
        errors = (8.49e-3, 3.96e-3, 1.92e-3, 9.57e-4, 4.68e-4, 2.36e-4)
        rates, mean = pairwise_rates(errors)
        assert len(rates) == 5
        assert mean == pytest.approx(1.03, abs=0.005)

    def test_constant_errors_rate_zero(self):
        rates, mean = pairwise_rates((0.25, 0.25, 0.25, 0.25))
        assert np.all(rates == 0.0)
        assert mean == 0.0

    def test_geometric_sequence(self):
        errors = [1.0 * 2.0 ** (-1.5 * k) for k in range(5)]
        rates, mean = pairwise_rates(errors)
        np.testing.assert_allclose(rates, 1.5, rtol=1e-12)
        assert mean == pytest.approx(1.5, rel=1e-12)

    def test_nonpositive_error_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            pairwise_rates((1.0, 0.0, 0.25))
        with pytest.raises(ValueError, match="positive"):
            pairwise_rates((1.0, -0.5))

    def test_single_entry_rejected(self):
        with pytest.raises(ValueError, match="two"):
            pairwise_rates((1.0,))


class TestReportRows:
    def test_invalid_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            ReportRow("wave", "", 0.5, 10, None, 0.1, 0.1, None)

    def test_alpha_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="order"):
            ReportRow("ode", "", 1.2, 10, None, 0.1, 0.1, None)

    def test_negative_error_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            ReportRow("ode", "", 0.5, 10, None, -0.1, 0.1, None)

    def test_non_finite_rate_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            ReportRow("ode", "", 0.5, 10, None, 0.1, 0.1, math.inf)

    def test_groups_preserve_order(self):
        rows = (
            ReportRow("ode", "exp", 0.3, 10, None, 0.2, 0.3, None),
            ReportRow("ode", "exp", 0.3, 20, None, 0.1, 0.2, 1.0),
            ReportRow("ode", "exp", 0.5, 10, None, 0.2, 0.3, None),
        )
        groups = ConvergenceReport(rows).groups()
        assert [key for key, _ in groups] == [("ode", "exp", 0.3), ("ode", "exp", 0.5)]
        assert len(groups[0][1]) == 2


def _random_report(rng: np.random.Generator) -> ConvergenceReport:
    rows = []
    for _ in range(int(rng.integers(0, 7))):
        mode = str(rng.choice(["ode", "pde1d", "pde2d", "infsup"]))
        case = {
            "ode": "exp",
            "infsup": "",
            "pde1d": str(rng.choice(["a", "b", "c", "d"])),
            "pde2d": str(rng.choice(["e", "f"])),
        }[mode]
        spacing = (
            None if mode in ("ode", "infsup") else 1.0 / float(rng.integers(2, 3000))
        )
        rate = None if rng.random() < 0.3 else float(rng.normal())
        scale = 10.0 ** float(rng.uniform(-300, 300))
        rows.append(
            ReportRow(
                mode,
                case,
                float(rng.uniform(0.01, 0.99)),
                int(rng.integers(1, 100000)),
                spacing,
                float(rng.uniform(0.0, 1.0)) * scale,
                float(rng.uniform(0.0, 1.0)),
                rate,
            )
        )
    return ConvergenceReport(tuple(rows))


class TestEmitParse:
    def test_empty_report_is_header_only(self):
        text = emit_report(ConvergenceReport(()), "csv")
        assert text == ",".join(CSV_HEADER) + "\n"

    def test_round_trip_twenty_random_reports(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            report = _random_report(rng)
            assert parse_report(emit_report(report, "csv")) == report

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="format"):
            emit_report(ConvergenceReport(()), "yaml")

    def test_header_mismatch_rejected(self):
        with pytest.raises(ValueError, match="header"):
            parse_report("alpha,K,err\n0.5,10,0.1\n")

    def test_short_row_rejected(self):
        text = ",".join(CSV_HEADER) + "\node,exp,0.5,10\n"
        with pytest.raises(ValueError, match="fields"):
            parse_report(text)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            parse_report("")

    def test_writes_file(self, tmp_path):
        report = ConvergenceReport(
            (ReportRow("infsup", "", 0.5, 20, None, 0.4754, 0.0, None),)
        )
        path = tmp_path / "report.csv"
        text = emit_report(report, "csv", str(path))
        assert path.read_text() == text
        assert parse_report(path.read_text()) == report

    def test_unwritable_path_surfaces_location(self, tmp_path):
        bad = tmp_path / "missing-dir" / "report.csv"
        with pytest.raises(OSError, match="missing-dir"):
            emit_report(ConvergenceReport(()), "csv", str(bad))


class TestMarkdown:
    def _sample(self):
        rows = (
            ReportRow("pde1d", "a", 0.5, 10, 5e-4, 8.95e-3, 1.1e-3, None),
            ReportRow("pde1d", "a", 0.5, 20, 5e-4, 3.16e-3, 4.0e-4, 1.50),
        )
        return ConvergenceReport(rows)

    def test_cells_use_three_significant_digits(self):
        text = emit_markdown(self._sample(), "l2", {("pde1d", "a", 0.5): 1.5})
        assert "8.95e-03" in text
        assert "3.16e-03" in text
        assert "(1.50)" in text

    def test_missing_theory_shows_dash(self):
        text = emit_markdown(self._sample(), "aux")
        assert "(—)" in text
        assert "1.10e-03" in text  # aux column drives the grid

    def test_stability_mode_has_no_rate_column(self):
        rows = tuple(
            ReportRow("infsup", "", 0.5, k, None, c, 0.0, None)
            for k, c in zip((20, 40), (0.4754, 0.4714))
        )
        text = emit_markdown(ConvergenceReport(rows))
        assert "rate" not in text
        assert "4.75e-01" in text

    def test_unknown_value_column_rejected(self):
        with pytest.raises(ValueError, match="value"):
            emit_markdown(self._sample(), "energy")


class TestStudyConfig:
    def test_valid_config_normalizes_sequences(self):
        config = StudyConfig(mode="ode", alphas=[0.3, 0.5], step_counts=[10, 20, 40])
        assert config.alphas == (0.3, 0.5)
        assert config.step_counts == (10, 20, 40)

    def test_steps_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(20, 10))
        with pytest.raises(ValueError, match="increasing"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(10, 10))

    def test_reference_must_exceed_largest_step(self):
        with pytest.raises(ValueError, match="reference"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(10, 20), ref_steps=20)

    def test_non_doubling_steps_warn_but_run(self):
        with pytest.warns(UserWarning, match="double"):
            config = StudyConfig(mode="infsup", alphas=(0.5,), step_counts=(10, 30))
        assert config.step_counts == (10, 30)

    def test_case_must_match_mode(self):
        with pytest.raises(ValueError, match="case"):
            StudyConfig(mode="pde1d", alphas=(0.5,), step_counts=(10, 20), case="e")
        with pytest.raises(ValueError, match="case"):
            StudyConfig(mode="pde2d", alphas=(0.5,), step_counts=(10, 20), case="a")
        with pytest.raises(ValueError, match="case"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(10, 20), case="a")
        with pytest.raises(ValueError, match="case"):
            StudyConfig(mode="pde1d", alphas=(0.5,), step_counts=(10, 20), case="")

    def test_alpha_validation(self):
        with pytest.raises(ValueError, match="order"):
            StudyConfig(mode="ode", alphas=(1.5,), step_counts=(10, 20))
        with pytest.raises(ValueError, match="at least one"):
            StudyConfig(mode="ode", alphas=(), step_counts=(10, 20))

    def test_misc_validation(self):
        with pytest.raises(ValueError, match="mode"):
            StudyConfig(mode="heat", alphas=(0.5,), step_counts=(10, 20))
        with pytest.raises(ValueError, match="source"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(10, 20), source="??")
        with pytest.raises(ValueError, match="decay"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(10, 20), decay=-1.0)
        with pytest.raises(ValueError, match="worker"):
            StudyConfig(mode="ode", alphas=(0.5,), step_counts=(10, 20), jobs=0)
        with pytest.raises(ValueError, match="subdivisions"):
            StudyConfig(
                mode="pde1d", alphas=(0.5,), step_counts=(10, 20), case="a", subdivisions=1
            )

    def test_default_subdivisions_per_mode(self):
        line = StudyConfig(mode="pde1d", alphas=(0.5,), step_counts=(10, 20), case="a")
        square = StudyConfig(mode="pde2d", alphas=(0.5,), step_counts=(10, 20), case="e")
        assert line.resolved_subdivisions == 2000
        assert square.resolved_subdivisions == 100


class TestRunStudy:
    def test_stability_row_matches_benchmark(self):
        config = StudyConfig(
            mode="infsup", alphas=(0.5,), step_counts=(20, 40, 80, 160, 320, 640)
        )
        report = run_study(config)
        assert [row.n_steps for row in report.rows] == [20, 40, 80, 160, 320, 640]
        for row, expected in zip(report.rows, INFSUP_HALF_ROW):
            assert row.err_l2 == pytest.approx(expected, abs=1e-3)
            assert row.rate is None

    def test_scalar_problem_mean_rate(self):
        config = StudyConfig(
            mode="ode",
            alphas=(0.3,),
            step_counts=(10, 20, 40, 80, 160, 320),
            decay=1.0,
            source="exp",
            ref_steps=2000,
        )
        report = run_study(config)
        assert report.mean_rate("ode", "exp", 0.3) == pytest.approx(1.03, abs=0.05)

    def test_diffusion_study_full_scale_row(self):
        # one full-size row: growing-exponential load, order 0.7
        config = StudyConfig(
            mode="pde1d",
            alphas=(0.7,),
            step_counts=(10, 20, 40, 80, 160, 320),
            case="b",
            ref_steps=2000,
        )
        report = run_study(config)
        assert report.mean_rate("pde1d", "b", 0.7) == pytest.approx(1.50, abs=0.1)
        for row in report.rows:
            assert row.spacing == pytest.approx(1.0 / 2000)

    def test_row_structure(self):
        config = StudyConfig(
            mode="pde1d",
            alphas=(0.4, 0.6),
            step_counts=(4, 8),
            case="a",
            subdivisions=16,
            ref_steps=32,
        )
        report = run_study(config)
        assert len(report.rows) == 4
        for row in report.rows:
            assert row.mode == "pde1d" and row.case == "a"
            assert row.err_l2 >= 0.0 and row.err_aux >= 0.0
        by_alpha = dict(report.groups())
        for alpha in (0.4, 0.6):
            rows = by_alpha[("pde1d", "a", alpha)]
            assert rows[0].rate is None
            assert rows[1].rate is not None

    def test_reference_cached_once_per_alpha(self, monkeypatch):
        counts = []
        real = study.solve_ode

        def counting(problem):
            counts.append(problem.mesh.n_cells)
            return real(problem)

        monkeypatch.setattr(study, "solve_ode", counting)
        config = StudyConfig(
            mode="ode", alphas=(0.3, 0.7), step_counts=(4, 8), ref_steps=64
        )
        run_study(config)
        assert counts.count(64) == 2  # one reference per fractional order
        assert len(counts) == 2 + 2 * 2

    def test_deterministic_report(self):
        config = StudyConfig(
            mode="ode", alphas=(0.5,), step_counts=(4, 8, 16), ref_steps=64
        )
        first = emit_report(run_study(config), "csv")
        second = emit_report(run_study(config), "csv")
        assert first == second

    def test_failure_names_the_cell(self, monkeypatch):
        def explode(*args, **kwargs):
            raise NumericError("synthetic failure")

        monkeypatch.setattr(study, "step_solve", explode)
        config = StudyConfig(
            mode="pde1d",
            alphas=(0.5,),
            step_counts=(4, 8),
            case="c",
            subdivisions=8,
            ref_steps=16,
        )
        with pytest.raises(NumericError, match=r"case c, alpha=0.5, K=16"):
            run_study(config)

    def test_worker_pool_matches_serial(self):
        serial = StudyConfig(
            mode="ode", alphas=(0.3, 0.7), step_counts=(4, 8), ref_steps=32
        )
        parallel = StudyConfig(
            mode="ode", alphas=(0.3, 0.7), step_counts=(4, 8), ref_steps=32, jobs=2
        )
        assert run_study(serial) == run_study(parallel)


class TestTheoreticalRates:
    def test_scalar_problem_rates(self):
        assert theoretical_rate("ode", "exp", 0.3) == pytest.approx(1.1)
        assert theoretical_rate("ode", "exp", 0.5) == pytest.approx(1.5)
        assert theoretical_rate("ode", "exp", 0.7) == pytest.approx(1.7)
        assert theoretical_rate("ode", "exp", 0.9) == pytest.approx(1.9)
        assert theoretical_rate("ode", "exp", 0.3, "aux") == pytest.approx(0.8)
        assert theoretical_rate("ode", "exp", 0.7, "aux") == pytest.approx(1.0)

    def test_diffusion_rates(self):
        assert theoretical_rate("pde1d", "a", 0.3) == pytest.approx(1.3)
        assert theoretical_rate("pde1d", "b", 0.7) == pytest.approx(1.2)
        assert theoretical_rate("pde1d", "c", 0.9) == pytest.approx(1.1)
        assert theoretical_rate("pde1d", "d", 0.5) == pytest.approx(0.7)
        assert theoretical_rate("pde2d", "e", 0.9) == pytest.approx(1.9)
        assert theoretical_rate("pde2d", "f", 0.3) == pytest.approx(0.5)

    def test_unannotated_columns(self):
        assert theoretical_rate("pde1d", "c", 0.5, "aux") is None
        assert theoretical_rate("infsup", "", 0.5) is None

    def test_expected_rates_covers_groups(self):
        rows = (
            ReportRow("pde1d", "a", 0.3, 10, 0.1, 0.5, 0.5, None),
            ReportRow("pde1d", "a", 0.5, 10, 0.1, 0.5, 0.5, None),
        )
        annotations = expected_rates(ConvergenceReport(rows))
        assert annotations == {
            ("pde1d", "a", 0.3): pytest.approx(1.3),
            ("pde1d", "a", 0.5): pytest.approx(1.5),
        }


class TestTableStudies:
    def test_table_one_grid(self):
        configs, value = table_studies(1)
        assert value == "l2"
        (config,) = configs
        assert config.mode == "infsup"
        assert config.alphas == (0.3, 0.5, 0.7, 0.9, 0.98)
        assert config.step_counts == (20, 40, 80, 160, 320, 640)

    def test_table_two_reference(self):
        (config,), _ = table_studies(2)
        assert config.mode == "ode" and config.ref_steps == 2000
        (fast,), _ = table_studies(2, fast=True)
        assert fast.ref_steps == 1024

    def test_table_three_cases_and_fast_mesh(self):
        configs, value = table_studies(3)
        assert value == "l2"
        assert [c.case for c in configs] == ["a", "b", "c", "d"]
        assert all(c.resolved_subdivisions == 2000 for c in configs)
        fast_configs, _ = table_studies(3, fast=True)
        assert all(c.resolved_subdivisions == 512 for c in fast_configs)
        assert all(c.ref_steps == 1024 for c in fast_configs)

    def test_table_four_shows_final_time_column(self):
        configs, value = table_studies(4)
        assert value == "aux"
        assert [c.case for c in configs] == ["c", "d"]

    def test_table_five_square_meshes(self):
        configs, _ = table_studies(5)
        assert [c.case for c in configs] == ["e", "f"]
        assert all(c.resolved_subdivisions == 100 for c in configs)
        fast_configs, _ = table_studies(5, fast=True)
        assert all(c.resolved_subdivisions == 32 for c in fast_configs)

    def test_unknown_table_rejected(self):
        with pytest.raises(ValueError, match="table"):
            table_studies(7)


class TestCli:
    def test_stability_sweep_csv(self, tmp_path):
        out = tmp_path / "stability.csv"
        code = cli.main(
            [
                "infsup",
                "--alpha",
                "0.5",
                "--K",
                "20,40,80,160,320,640",
                "--format",
                "csv",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = parse_report(out.read_text())
        values = [row.err_l2 for row in report.rows]
        assert values == pytest.approx(INFSUP_HALF_ROW, abs=1e-3)

    def test_markdown_to_stdout(self, capsys):
        code = cli.main(["infsup", "--alpha", "0.5", "--K", "20,40"])
        assert code == 0
        output = capsys.readouterr().out
        assert "| alpha |" in output
        assert "4.75e-01" in output

    def test_config_file_supplies_defaults(self, tmp_path):
        config = tmp_path / "study.cfg"
        config.write_text("# defaults\nalpha=0.5\nK=20,40\nformat=csv\n")
        out = tmp_path / "out.csv"
        code = cli.main(["infsup", "--config", str(config), "--out", str(out)])
        assert code == 0
        report = parse_report(out.read_text())
        assert [row.n_steps for row in report.rows] == [20, 40]
        assert report.rows[0].alpha == 0.5

    def test_flags_override_config_file(self, tmp_path):
        config = tmp_path / "study.cfg"
        config.write_text("alpha=0.9\nK=20,40\nformat=csv\n")
        out = tmp_path / "out.csv"
        code = cli.main(
            ["infsup", "--config", str(config), "--alpha", "0.3", "--out", str(out)]
        )
        assert code == 0
        report = parse_report(out.read_text())
        assert all(row.alpha == 0.3 for row in report.rows)

    def test_unknown_config_key_is_config_error(self, tmp_path):
        config = tmp_path / "study.cfg"
        config.write_text("tolerance=1e-6\n")
        assert cli.main(["infsup", "--config", str(config)]) == 2

    def test_malformed_config_line_is_config_error(self, tmp_path):
        config = tmp_path / "study.cfg"
        config.write_text("alpha 0.5\n")
        assert cli.main(["infsup", "--config", str(config)]) == 2

    def test_missing_config_file_is_config_error(self, tmp_path):
        assert cli.main(["infsup", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_missing_case_is_config_error(self):
        assert cli.main(["pde1d", "--alpha", "0.5", "--K", "4,8"]) == 2

    def test_invalid_case_is_config_error(self):
        assert cli.main(["pde1d", "--case", "e", "--alpha", "0.5", "--K", "4,8"]) == 2

    def test_bad_step_list_is_config_error(self):
        assert cli.main(["infsup", "--alpha", "0.5", "--K", "ten,20"]) == 2

    def test_unknown_subcommand_is_config_error(self):
        assert cli.main(["heat"]) == 2

    def test_no_arguments_is_config_error(self):
        assert cli.main([]) == 2

    def test_help_exits_cleanly(self):
        assert cli.main(["--help"]) == 0

    def test_unknown_table_is_config_error(self):
        assert cli.main(["repro-table", "9"]) == 2

    def test_numeric_failure_maps_to_exit_three(self, monkeypatch):
        def explode(config):
            raise NumericError("synthetic blow-up")

        monkeypatch.setattr(cli, "run_study", explode)
        assert cli.main(["infsup", "--alpha", "0.5", "--K", "20,40"]) == 3

    def test_unwritable_output_is_config_error(self, tmp_path):
        out = tmp_path / "no-such-dir" / "x.csv"
        code = cli.main(["infsup", "--alpha", "0.5", "--K", "20,40", "--out", str(out)])
        assert code == 2

    def test_runs_are_bit_identical(self, tmp_path):
        args = ["ode", "--alpha", "0.4", "--K", "4,8", "--ref-K", "32", "--format", "csv"]
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(args + ["--out", str(first)]) == 0
        assert cli.main(args + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_fast_flag_halves_explicit_mesh(self, tmp_path):
        out = tmp_path / "fast.csv"
        code = cli.main(
            [
                "pde1d",
                "--case",
                "a",
                "--alpha",
                "0.5",
                "--K",
                "4,8",
                "--ref-K",
                "16",
                "--M",
                "64",
                "--fast",
                "--format",
                "csv",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = parse_report(out.read_text())
        assert all(row.spacing == pytest.approx(1.0 / 32) for row in report.rows)

    def test_table_one_through_cli(self, tmp_path):
        out = tmp_path / "table1.csv"
        assert cli.main(["repro-table", "1", "--format", "csv", "--out", str(out)]) == 0
        report = parse_report(out.read_text())
        assert len(report.rows) == 30
        half_row = [row.err_l2 for row in report.rows if row.alpha == 0.5]
        assert half_row == pytest.approx(INFSUP_HALF_ROW, abs=1e-3)
