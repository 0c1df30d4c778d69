"""
Tests for density and e-value plot emission
"""

import numpy as np
import pandas as pd
import pytest
import yaml
from scipy import integrate

from src.errors import DataValidationError
from src.exports.csv_exporter import CSVExporter
from src.reports.plot_generator import PlotGenerator, density_grid, silverman_density

from conftest import make_selection_result


@pytest.fixture
def select_run_dir(tiny_dataset, temp_dir):
    """A directory laid out like the output of a select run"""
    run_dir = temp_dir / "run"
    run_dir.mkdir()
    result = make_selection_result()
    exporter = CSVExporter()
    exporter.export_selection_report(result, tiny_dataset, run_dir / "selection_report.csv")
    exporter.export_distributions(result.reports, tiny_dataset.snp_ids, run_dir / "distributions.csv")
    report = result.per_predictor_evalues
    summary = {"thresholds": {q: report.threshold(q, 0.8) for q in report.q_list}}
    (run_dir / "run_summary.yaml").write_text(yaml.safe_dump(summary))
    return run_dir


def test_density_integrates_to_one():
    values = np.random.default_rng(0).beta(2, 5, size=500)
    grid = density_grid([values])
    density = silverman_density(values, grid)
    assert integrate.trapezoid(density, grid) == pytest.approx(1.0, abs=0.02)
    assert np.all(density >= 0)


def test_point_mass_becomes_a_spike():
    grid = np.linspace(0, 1, 101)
    density = silverman_density(np.full(50, 0.3), grid)
    assert np.count_nonzero(density) == 1
    assert grid[np.argmax(density)] == pytest.approx(0.3)
    assert integrate.trapezoid(density, grid) > 0


def test_density_grid_covers_all_samples():
    grid = density_grid([np.array([0.2, 0.4]), np.array([0.9])], n_points=64)
    assert grid.shape == (64,)
    assert grid[0] < 0.2 and grid[-1] > 0.9


def test_emit_plots_writes_one_pair_per_s(select_run_dir, temp_dir):
    out_dir = temp_dir / "plots"
    written = PlotGenerator().emit_plots(select_run_dir, out_dir)

    names = sorted(path.name for path in written)
    assert names == ["density_s0.2.csv", "density_s0.2.svg", "density_s1.csv", "density_s1.svg", "evalues.svg"]
    table = pd.read_csv(out_dir / "density_s0.2.csv")
    assert list(table.columns) == ["grid", "full", "snp1", "snp2", "snp3"]
    assert (table.drop(columns="grid") >= 0).all().all()


def test_plots_are_byte_identical_across_runs(select_run_dir, temp_dir):
    first = PlotGenerator().emit_plots(select_run_dir, temp_dir / "a")
    second = PlotGenerator().emit_plots(select_run_dir, temp_dir / "b")
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes()


def test_missing_distributions_explains_the_flag(select_run_dir, temp_dir):
    (select_run_dir / "distributions.csv").unlink()
    with pytest.raises(DataValidationError, match="--dump-distributions"):
        PlotGenerator().emit_plots(select_run_dir, temp_dir / "plots")


def test_missing_report(temp_dir):
    with pytest.raises(DataValidationError, match="select"):
        PlotGenerator().emit_plots(temp_dir, temp_dir / "plots")


def test_missing_summary_still_plots(select_run_dir, temp_dir, caplog):
    (select_run_dir / "run_summary.yaml").unlink()
    written = PlotGenerator().emit_plots(select_run_dir, temp_dir / "plots")
    assert (temp_dir / "plots" / "evalues.svg") in written
    assert "no cutoff line" in caplog.text


def test_report_without_selection_column(select_run_dir, temp_dir):
    path = select_run_dir / "selection_report.csv"
    pd.read_csv(path).drop(columns=["selected"]).to_csv(path, index=False)
    with pytest.raises(DataValidationError, match="selected"):
        PlotGenerator().emit_plots(select_run_dir, temp_dir / "plots")


def test_non_numeric_scores_are_rejected(select_run_dir, temp_dir):
    path = select_run_dir / "distributions.csv"
    lines = path.read_text().splitlines()
    lines[1] = lines[1].rsplit(",", 1)[0] + ",n/a-score"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataValidationError, match="numeric"):
        PlotGenerator().emit_plots(select_run_dir, temp_dir / "plots")
