"""
Tests for CSV ingestion of family data
"""

import logging

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from src.errors import CrossReferenceError, DataValidationError
from src.models.family_data import ChildType
from src.parsers.family_csv_parser import FamilyCSVParser, ingest


def replace_line(path, line_number, text):
    lines = path.read_text().splitlines()
    lines[line_number - 1] = text
    path.write_text("\n".join(lines) + "\n")


class TestFamilyCSVParser:
    def setup_method(self):
        self.parser = FamilyCSVParser()

    def parse(self, files, covariates=True, snp_info=True):
        return self.parser.parse_files(
            files["pedigree"], files["phenotype"], files["genotype"],
            files["covariates"] if covariates else None,
            files["snp_info"] if snp_info else None,
        )

    def test_parse_toy_fixture(self, toy_family_files):
        dataset = self.parse(toy_family_files)

        assert dataset.n_families == 2
        assert dataset.n_individuals == 7
        assert dataset.snp_ids == ["rs1", "rs2"]
        assert dataset.covariate_ids == ["age"]
        assert dataset.snp_positions == ["1001", "2050"]

        family_a, family_b = dataset.families
        assert family_a.pedigree.family_id == "A"
        assert family_a.pedigree.child_type == ChildType.MZ
        assert family_b.pedigree.child_type == ChildType.DZ
        assert_array_equal(family_a.phenotype, [1.5, -0.25, 0.75, 0.5])
        assert_array_equal(family_b.genotypes, [[2, 0], [0, 0], [1, 0]])
        assert_array_equal(family_b.covariates[:, 0], [50, 49, 20])

    def test_optional_files_may_be_omitted(self, toy_family_files):
        dataset = self.parse(toy_family_files, covariates=False, snp_info=False)
        assert dataset.n_covariates == 0
        assert dataset.snp_positions is None
        assert dataset.families[0].covariates.shape == (4, 0)

    def test_member_order_follows_pedigree_file(self, toy_family_files):
        # Shuffle phenotype rows; values must still land on the right members
        path = toy_family_files["phenotype"]
        lines = path.read_text().splitlines()
        path.write_text("\n".join([lines[0]] + lines[1:][::-1]) + "\n")
        dataset = self.parse(toy_family_files)
        assert_array_equal(dataset.families[1].phenotype, [2.0, 0.1, -1.2])

    def test_invalid_genotype_reports_line(self, toy_family_files):
        replace_line(toy_family_files["genotype"], 7, "B,B_P2,3,0")
        with pytest.raises(DataValidationError) as excinfo:
            self.parse(toy_family_files)
        assert excinfo.value.line == 7
        assert excinfo.value.column == "rs1"
        assert "line 7" in str(excinfo.value)

    def test_non_numeric_phenotype(self, toy_family_files):
        replace_line(toy_family_files["phenotype"], 3, "A,A_P2,tall")
        with pytest.raises(DataValidationError) as excinfo:
            self.parse(toy_family_files)
        assert excinfo.value.line == 3
        assert excinfo.value.column == "value"

    def test_missing_required_column(self, toy_family_files):
        replace_line(toy_family_files["pedigree"], 1, "family_id,member_id,kind,child_type")
        with pytest.raises(DataValidationError, match="role"):
            self.parse(toy_family_files)

    def test_unknown_role(self, toy_family_files):
        replace_line(toy_family_files["pedigree"], 2, "A,A_P1,grandparent,")
        with pytest.raises(DataValidationError) as excinfo:
            self.parse(toy_family_files)
        assert excinfo.value.line == 2

    def test_child_needs_child_type(self, toy_family_files):
        replace_line(toy_family_files["pedigree"], 8, "B,B_C1,child,")
        with pytest.raises(DataValidationError, match="child_type"):
            self.parse(toy_family_files)

    def test_duplicate_member(self, toy_family_files):
        replace_line(toy_family_files["phenotype"], 3, "A,A_P1,0.0")
        with pytest.raises(DataValidationError, match="Duplicate"):
            self.parse(toy_family_files)

    def test_unknown_member_in_genotype_file(self, toy_family_files):
        replace_line(toy_family_files["genotype"], 8, "B,B_C9,1,0")
        with pytest.raises(CrossReferenceError):
            self.parse(toy_family_files)

    def test_missing_covariate_row(self, toy_family_files):
        path = toy_family_files["covariates"]
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(CrossReferenceError, match="B_C1"):
            self.parse(toy_family_files)

    def test_snp_missing_from_snp_info(self, toy_family_files):
        toy_family_files["snp_info"].write_text("snp_id,position\nrs1,1001\n")
        with pytest.raises(CrossReferenceError, match="rs2"):
            self.parse(toy_family_files)

    def test_snp_info_without_family_columns(self, toy_family_files):
        positions = self.parser.parse_snp_info(toy_family_files["snp_info"], ["rs2", "rs1"])
        assert positions == ["2050", "1001"]
        assert self.parser.file_summaries["snp_info.csv"] == (2, 2)

    def test_duplicate_snp_in_snp_info(self, toy_family_files):
        toy_family_files["snp_info"].write_text("snp_id,position\nrs1,1001\nrs2,2050\nrs1,1002\n")
        with pytest.raises(DataValidationError, match="Duplicate snp_id") as excinfo:
            self.parse(toy_family_files)
        assert excinfo.value.line == 4

    def test_family_with_missing_value_is_dropped(self, toy_family_files, caplog):
        replace_line(toy_family_files["phenotype"], 8, "B,B_C1,")
        with caplog.at_level(logging.WARNING):
            dataset = self.parse(toy_family_files)
        assert [f.pedigree.family_id for f in dataset.families] == ["A"]
        assert self.parser.dropped_families == ["B"]
        assert "Dropped 1 families" in caplog.text

    def test_all_families_incomplete(self, toy_family_files):
        replace_line(toy_family_files["covariates"], 2, "A,A_P1,")
        replace_line(toy_family_files["covariates"], 8, "B,B_C1,")
        with pytest.raises(DataValidationError, match="No complete families"):
            self.parse(toy_family_files)

    def test_missing_file(self, toy_family_files, temp_dir):
        toy_family_files["pedigree"] = temp_dir / "absent.csv"
        with pytest.raises(DataValidationError, match="not found"):
            self.parse(toy_family_files)

    def test_mixed_child_types(self, toy_family_files):
        path = toy_family_files["pedigree"]
        replace_line(path, 5, "A,A_C2,child,ADOPTED")
        dataset = self.parse(toy_family_files)
        family_a = dataset.families[0]
        assert family_a.pedigree.child_type == ChildType.MIXED
        assert family_a.pedigree.child_type_of(family_a.pedigree.members[3]) == ChildType.ADOPTED

    def test_file_summaries(self, toy_family_files):
        self.parse(toy_family_files)
        assert self.parser.file_summaries["genotype.csv"] == (7, 4)


def test_ingest_function(toy_family_files):
    dataset = ingest(toy_family_files["pedigree"], toy_family_files["phenotype"], toy_family_files["genotype"])
    assert dataset.n_snps == 2
    assert np.isfinite(dataset.stacked()[0]).all()
