"""
CSV ingestion for pedigree, phenotype, genotype and covariate files
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
import pandas as pd

from ..errors import CrossReferenceError, DataValidationError, StructuralError
from ..models.family_data import ChildType, Dataset, FamilyRecord, Member, PedigreeSpec, Role

logger = logging.getLogger(__name__)

KEY_COLUMNS = ["family_id", "member_id"]
PEDIGREE_COLUMNS = KEY_COLUMNS + ["role", "child_type"]
PHENOTYPE_COLUMNS = KEY_COLUMNS + ["value"]
SNP_INFO_COLUMNS = ["snp_id", "position"]

# Header occupies line 1; data row k (0-based) sits on line k + 2
HEADER_LINES = 1


def _line_of(row_index: int) -> int:
    return row_index + HEADER_LINES + 1


class FamilyCSVParser:
    """Reads the plain CSV family formats into a validated Dataset"""

    def __init__(self):
        self.file_summaries: Dict[str, Tuple[int, int]] = OrderedDict()
        self.dropped_families: List[str] = []

    def _read(self, path: Path, required: List[str], keys: Optional[List[str]] = None) -> pd.DataFrame:
        """Load one CSV as strings; identifiers must be non-empty and unique per `keys`"""
        keys = KEY_COLUMNS if keys is None else keys
        path = Path(path)
        if not path.exists():
            raise DataValidationError("File not found", file=str(path))
        try:
            frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
        except (ValueError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DataValidationError(f"Could not parse CSV ({e})", file=str(path))

        frame.columns = [str(column).strip() for column in frame.columns]
        missing = [column for column in required if column not in frame.columns]
        if missing:
            raise DataValidationError(f"Missing required columns {missing}", file=str(path), line=1)

        for column in keys:
            if column in frame.columns:
                blank = frame[column].isna()
                if blank.any():
                    row = int(np.flatnonzero(blank.to_numpy())[0])
                    raise DataValidationError("Empty identifier", file=str(path), line=_line_of(row), column=column)
                frame[column] = frame[column].str.strip()

        present = [column for column in keys if column in frame.columns]
        if present:
            duplicated = frame.duplicated(subset=present)
            if duplicated.any():
                row = int(np.flatnonzero(duplicated.to_numpy())[0])
                raise DataValidationError(f"Duplicate {'/'.join(present)}", file=str(path), line=_line_of(row))

        self.file_summaries[path.name] = frame.shape
        logger.info(f"Read {path.name}: {frame.shape[0]} rows, {frame.shape[1]} columns")
        return frame

    def _numeric_block(self, frame: pd.DataFrame, columns: List[str], path: Path,
                       allowed: Optional[Tuple[float, ...]] = None) -> np.ndarray:
        """Parse columns as floats; NaN marks missing, malformed cells raise"""
        values = frame[columns].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
        present = frame[columns].notna().to_numpy()

        malformed = present & np.isnan(values)
        if malformed.any():
            row, col = (int(v) for v in np.argwhere(malformed)[0])
            raise DataValidationError(
                f"Value '{frame[columns[col]].iloc[row]}' is not numeric",
                file=str(path), line=_line_of(row), column=columns[col],
            )

        if allowed is not None:
            invalid = present & ~np.isin(values, allowed)
            if invalid.any():
                row, col = (int(v) for v in np.argwhere(invalid)[0])
                raise DataValidationError(
                    f"Genotype value {frame[columns[col]].iloc[row]} outside {{0,1,2}}",
                    file=str(path), line=_line_of(row), column=columns[col],
                )
        return values

    def _parse_pedigrees(self, frame: pd.DataFrame, path: Path) -> "OrderedDict[str, PedigreeSpec]":
        members: "OrderedDict[str, List[Member]]" = OrderedDict()
        child_types: Dict[str, Set[ChildType]] = {}

        for row, record in enumerate(frame.itertuples(index=False)):
            record = record._asdict()
            fid = record["family_id"]
            role_text = str(record["role"]).strip().lower() if pd.notna(record["role"]) else ""
            try:
                role = Role(role_text)
            except ValueError:
                raise DataValidationError(
                    f"Unknown role '{record['role']}' (expected parent or child)",
                    file=str(path), line=_line_of(row), column="role",
                )

            child_type = None
            if role == Role.CHILD:
                if pd.isna(record["child_type"]):
                    raise DataValidationError("Child without child_type", file=str(path),
                                              line=_line_of(row), column="child_type")
                try:
                    child_type = ChildType.parse(record["child_type"])
                except StructuralError as e:
                    raise DataValidationError(str(e), file=str(path), line=_line_of(row), column="child_type")
                child_types.setdefault(fid, set()).add(child_type)

            members.setdefault(fid, []).append(Member(record["member_id"], role, child_type))

        pedigrees = OrderedDict()
        for fid, family_members in members.items():
            types = child_types.get(fid, set())
            family_type = next(iter(types)) if len(types) == 1 else (ChildType.MIXED if types else ChildType.MZ)
            try:
                pedigrees[fid] = PedigreeSpec(fid, tuple(family_members), family_type)
            except StructuralError as e:
                raise DataValidationError(str(e), file=str(path))
        return pedigrees

    def _check_keys(self, expected: Set[Tuple[str, str]], frame: pd.DataFrame, path: Path, name: str):
        found = set(zip(frame["family_id"], frame["member_id"]))
        unknown = sorted(found - expected)
        absent = sorted(expected - found)
        if unknown:
            raise CrossReferenceError(
                f"{name} lists members not in the pedigree file, e.g. {unknown[0]}", file=str(path)
            )
        if absent:
            raise CrossReferenceError(f"{name} has no row for pedigree member {absent[0]}", file=str(path))

    def parse_snp_info(self, path: Path, snp_ids: List[str]) -> List[str]:
        """Position passthrough column aligned to the genotype SNP order"""
        frame = self._read(path, SNP_INFO_COLUMNS, keys=["snp_id"])
        positions = dict(zip(frame["snp_id"], frame["position"].fillna("")))
        missing = [snp for snp in snp_ids if snp not in positions]
        if missing:
            raise CrossReferenceError(f"SNP {missing[0]} has no entry in the SNP info file", file=str(path))
        return [str(positions[snp]) for snp in snp_ids]

    def parse_files(self, pedigree_path: Path, phenotype_path: Path, genotype_path: Path,
                    covariate_path: Optional[Path] = None, snp_info_path: Optional[Path] = None) -> Dataset:
        """Read, cross-check and assemble a Dataset"""
        pedigree_path, phenotype_path, genotype_path = Path(pedigree_path), Path(phenotype_path), Path(genotype_path)

        pedigree_frame = self._read(pedigree_path, PEDIGREE_COLUMNS)
        pedigrees = self._parse_pedigrees(pedigree_frame, pedigree_path)
        expected = {(fid, mid) for fid, spec in pedigrees.items() for mid in spec.member_ids}

        phenotype_frame = self._read(phenotype_path, PHENOTYPE_COLUMNS)
        self._check_keys(expected, phenotype_frame, phenotype_path, "Phenotype file")
        phenotype = self._numeric_block(phenotype_frame, ["value"], phenotype_path)[:, 0]

        genotype_frame = self._read(genotype_path, KEY_COLUMNS)
        snp_ids = [column for column in genotype_frame.columns if column not in KEY_COLUMNS]
        if not snp_ids:
            raise DataValidationError("Genotype file has no SNP columns", file=str(genotype_path), line=1)
        self._check_keys(expected, genotype_frame, genotype_path, "Genotype file")
        genotypes = self._numeric_block(genotype_frame, snp_ids, genotype_path, allowed=(0.0, 1.0, 2.0))

        covariate_ids: List[str] = []
        covariates = None
        covariate_frame = None
        if covariate_path is not None:
            covariate_path = Path(covariate_path)
            covariate_frame = self._read(covariate_path, KEY_COLUMNS)
            covariate_ids = [column for column in covariate_frame.columns if column not in KEY_COLUMNS]
            self._check_keys(expected, covariate_frame, covariate_path, "Covariate file")
            covariates = self._numeric_block(covariate_frame, covariate_ids, covariate_path)

        phenotype_rows = self._row_lookup(phenotype_frame)
        genotype_rows = self._row_lookup(genotype_frame)
        covariate_rows = self._row_lookup(covariate_frame) if covariate_frame is not None else {}

        families = []
        self.dropped_families = []
        for fid, spec in pedigrees.items():
            keys = [(fid, mid) for mid in spec.member_ids]
            y = phenotype[[phenotype_rows[key] for key in keys]]
            G = genotypes[[genotype_rows[key] for key in keys]]
            C = covariates[[covariate_rows[key] for key in keys]] if covariates is not None \
                else np.zeros((spec.size, 0))

            if np.isnan(y).any() or np.isnan(G).any() or np.isnan(C).any():
                self.dropped_families.append(fid)
                continue
            families.append(FamilyRecord(pedigree=spec, phenotype=y, genotypes=G, covariates=C))

        if self.dropped_families:
            logger.warning(
                f"Dropped {len(self.dropped_families)} families with missing values: "
                f"{', '.join(self.dropped_families[:5])}{' ...' if len(self.dropped_families) > 5 else ''}"
            )
        if not families:
            raise DataValidationError("No complete families remain after dropping missing values")

        positions = self.parse_snp_info(Path(snp_info_path), snp_ids) if snp_info_path is not None else None

        dataset = Dataset(families=families, snp_ids=snp_ids, covariate_ids=covariate_ids, snp_positions=positions)
        logger.info(
            f"Loaded {dataset.n_families} families ({dataset.n_individuals} individuals), "
            f"{dataset.n_snps} SNPs, {dataset.n_covariates} covariates; child types {dataset.family_summary()}"
        )
        return dataset

    @staticmethod
    def _row_lookup(frame: pd.DataFrame) -> Dict[Tuple[str, str], int]:
        return {key: row for row, key in enumerate(zip(frame["family_id"], frame["member_id"]))}


def ingest(pedigree_path: Path, phenotype_path: Path, genotype_path: Path,
           covariate_path: Optional[Path] = None, snp_info_path: Optional[Path] = None) -> Dataset:
    return FamilyCSVParser().parse_files(pedigree_path, phenotype_path, genotype_path,
                                         covariate_path, snp_info_path)
