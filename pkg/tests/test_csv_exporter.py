"""
Tests for CSV export of datasets, reports and study tables
"""

import math

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.exports.csv_exporter import (
    AGGREGATE_COLUMNS, REPLICATION_COLUMNS, CSVExporter, evalue_columns, load_distributions, load_selection_report,
)
from src.parsers.family_csv_parser import ingest

from conftest import make_selection_result


class TestCSVExporter:
    def setup_method(self):
        self.exporter = CSVExporter()

    def test_dataset_files_reload(self, small_dataset, temp_dir):
        dataset, _ = small_dataset
        paths = self.exporter.export_dataset(dataset, temp_dir / "data")
        assert "covariates" not in paths

        reloaded = ingest(paths["pedigree"], paths["phenotype"], paths["genotype"], snp_info_path=paths["snp_info"])
        assert reloaded.snp_ids == dataset.snp_ids
        assert reloaded.snp_positions == dataset.snp_positions
        for original, copy in zip(dataset.families, reloaded.families):
            assert copy.pedigree.family_id == original.pedigree.family_id
            assert copy.pedigree.member_ids == original.pedigree.member_ids
            assert copy.pedigree.child_type == original.pedigree.child_type
        assert_allclose(reloaded.stacked()[0], dataset.stacked()[0], rtol=1e-14)
        assert_array_equal(reloaded.stacked()[1], dataset.stacked()[1])

    def test_dataset_with_covariates(self, tiny_dataset, temp_dir):
        families = tiny_dataset.families
        for index, family in enumerate(families):
            family.covariates = np.full((family.size, 1), 0.1 * index)
        tiny_dataset.covariate_ids = ["dose"]

        paths = self.exporter.export_dataset(tiny_dataset, temp_dir)
        frame = pd.read_csv(paths["covariates"])
        assert list(frame.columns) == ["family_id", "member_id", "dose"]
        assert frame["dose"].iloc[-1] == pytest.approx(0.5)

    def test_pedigree_file_layout(self, tiny_dataset, temp_dir):
        paths = self.exporter.export_dataset(tiny_dataset, temp_dir)
        lines = paths["pedigree"].read_text().splitlines()
        assert lines[0] == "family_id,member_id,role,child_type"
        assert lines[1] == "F1,F1_P1,parent,"
        assert lines[3] == "F1,F1_C1,child,MZ"

    def test_truth_file(self, small_dataset, small_sim_config, temp_dir):
        dataset, truth = small_dataset
        path = temp_dir / "truth.csv"
        self.exporter.export_truth(truth, small_sim_config.blocks, dataset.snp_ids, path)
        frame = pd.read_csv(path)
        assert frame["causal"].sum() == 4
        assert frame.loc[frame["snp_id"] == "snp7", "block"].item() == 2
        assert frame.loc[frame["causal"] == 0, "beta"].eq(0).all()

    def test_selection_report(self, tiny_dataset, temp_dir):
        result = make_selection_result()
        path = temp_dir / "report.csv"
        self.exporter.export_selection_report(result, tiny_dataset, path, {"rfgls_bh": [1], "mbic2": []})

        frame = load_selection_report(path)
        assert list(frame.columns) == [
            "snp_id", "position", "evalue_q0.5", "evalue_q0.9", "selected", "association",
            "rfgls_bh_selected", "mbic2_selected",
        ]
        assert evalue_columns(frame) == ["evalue_q0.5", "evalue_q0.9"]
        assert frame["selected"].tolist() == [1, 0, 1]
        assert frame["rfgls_bh_selected"].tolist() == [0, 1, 0]
        assert frame["mbic2_selected"].sum() == 0
        assert_allclose(frame["evalue_q0.9"], result.per_predictor_evalues.dropone_quantiles[:, 1], rtol=1e-14)

    def test_pe_trace(self, temp_dir):
        path = temp_dir / "pe_trace.csv"
        self.exporter.export_pe_trace(make_selection_result(), path)
        frame = pd.read_csv(path)
        assert frame["s"].tolist() == [0.2, 1.0]
        assert frame["winner"].tolist() == [1, 0]
        assert frame["n_selected"].tolist() == [2, 1]

    def test_distributions_long_format(self, temp_dir):
        result = make_selection_result()
        path = temp_dir / "distributions.csv"
        self.exporter.export_distributions(result.reports, ["a", "b", "c"], path)

        frame = load_distributions(path)
        assert len(frame) == 2 * 4 * 100
        assert frame["s"].iloc[0] == 0.2
        block = frame[(frame["s"] == 1.0) & (frame["distribution"] == "b")]
        assert_allclose(block["score"].to_numpy(), result.reports[1.0].dropone_scores[:, 1], rtol=1e-14)

    def test_study_tables_have_fixed_columns(self, temp_dir):
        rows = pd.DataFrame([{
            "method": "mbic2", "kind": "", "t": math.nan, "h": 10.0, "replication": 0, "status": "ok",
            "error": "", "n_selected": 3, "tp": 0.5, "tn": 1.0, "rtp": 0.75, "rtn": 1.0, "winning_s": math.nan,
        }])
        path = temp_dir / "replications.csv"
        self.exporter.export_replications(rows[REPLICATION_COLUMNS[::-1]], path)
        assert path.read_text().splitlines()[0] == ",".join(REPLICATION_COLUMNS)

        aggregate = temp_dir / "aggregate.csv"
        self.exporter.export_aggregate(pd.DataFrame(columns=AGGREGATE_COLUMNS), aggregate)
        assert aggregate.read_text().strip() == ",".join(AGGREGATE_COLUMNS)