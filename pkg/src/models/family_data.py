"""
Data models for family-structured genotype/phenotype data
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import StructuralError


class Role(Enum):
    PARENT = "parent"
    CHILD = "child"


class ChildType(Enum):
    MZ = "MZ"
    DZ = "DZ"
    ADOPTED = "ADOPTED"
    BIO_SIB = "BIO_SIB"
    MIXED = "MIXED"

    @classmethod
    def parse(cls, value: str) -> "ChildType":
        """Parse a child type label, case-insensitive"""
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            valid = ", ".join(member.value for member in cls)
            raise StructuralError(f"Unknown child type '{value}' (expected one of {valid})")


@dataclass(frozen=True)
class Member:
    member_id: str
    role: Role
    # Only meaningful for children; None means "inherit the family child_type"
    child_type: Optional[ChildType] = None


@dataclass(frozen=True)
class PedigreeSpec:
    """One nuclear family: ordered members and the type of its children"""
    family_id: str
    members: Tuple[Member, ...]
    child_type: ChildType = ChildType.MZ

    def __post_init__(self):
        if len(self.members) < 1:
            raise StructuralError(f"Family {self.family_id} has no members")

        ids = [member.member_id for member in self.members]
        if len(set(ids)) != len(ids):
            raise StructuralError(f"Family {self.family_id} has duplicate member ids")

        if len(self.parents) > 2:
            raise StructuralError(
                f"Family {self.family_id} has {len(self.parents)} parents (at most 2 supported)"
            )

        if self.child_type == ChildType.MIXED:
            untyped = [m.member_id for m in self.children if m.child_type in (None, ChildType.MIXED)]
            if untyped:
                raise StructuralError(
                    f"Family {self.family_id} is MIXED but children {untyped} have no own child type"
                )

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def parents(self) -> List[Member]:
        return [m for m in self.members if m.role == Role.PARENT]

    @property
    def children(self) -> List[Member]:
        return [m for m in self.members if m.role == Role.CHILD]

    @property
    def member_ids(self) -> List[str]:
        return [m.member_id for m in self.members]

    def child_type_of(self, member: Member) -> ChildType:
        """Effective child type of a child member"""
        if member.child_type is not None and member.child_type != ChildType.MIXED:
            return member.child_type
        return self.child_type

    @classmethod
    def nuclear(cls, family_id: str, child_type: ChildType = ChildType.MZ,
                n_children: int = 2) -> "PedigreeSpec":
        """Two parents followed by n_children children of one type"""
        members = [
            Member(f"{family_id}_P1", Role.PARENT),
            Member(f"{family_id}_P2", Role.PARENT),
        ]
        members.extend(Member(f"{family_id}_C{k + 1}", Role.CHILD) for k in range(n_children))
        return cls(family_id=family_id, members=tuple(members), child_type=child_type)


@dataclass(frozen=True)
class AceVarianceComponents:
    """Polygenic, shared-environment and unique-environment variances"""
    sigma_a2: float
    sigma_c2: float
    sigma_e2: float

    def __post_init__(self):
        values = (self.sigma_a2, self.sigma_c2, self.sigma_e2)
        if not all(np.isfinite(v) for v in values):
            raise StructuralError(f"Variance components must be finite, got {values}")
        if self.sigma_a2 < 0 or self.sigma_c2 < 0:
            raise StructuralError(f"Variance components must be nonnegative, got {values}")
        if self.sigma_e2 <= 0:
            raise StructuralError(f"sigma_e2 must be strictly positive, got {self.sigma_e2}")

    @property
    def total(self) -> float:
        return self.sigma_a2 + self.sigma_c2 + self.sigma_e2

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma_a2, self.sigma_c2, self.sigma_e2], dtype=float)

    def scaled(self, factor: float) -> "AceVarianceComponents":
        return AceVarianceComponents(self.sigma_a2 * factor, self.sigma_c2 * factor, self.sigma_e2 * factor)


@dataclass
class FamilyRecord:
    pedigree: PedigreeSpec
    phenotype: np.ndarray
    genotypes: np.ndarray
    covariates: np.ndarray

    @property
    def size(self) -> int:
        return self.pedigree.size


@dataclass
class Dataset:
    """Families with phenotypes, 0/1/2 genotypes and covariates"""
    families: List[FamilyRecord]
    snp_ids: List[str]
    covariate_ids: List[str] = field(default_factory=list)
    snp_positions: Optional[List[str]] = None
    _kinship_cache: Optional[List[np.ndarray]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    @property
    def n_families(self) -> int:
        return len(self.families)

    @property
    def n_snps(self) -> int:
        return len(self.snp_ids)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_ids)

    @property
    def n_individuals(self) -> int:
        return sum(family.size for family in self.families)

    def validate(self):
        """Check row counts, column counts and genotype coding"""
        p_g = self.n_snps
        p = self.n_covariates

        if len(set(self.snp_ids)) != p_g:
            raise StructuralError("SNP ids must be unique")
        if self.snp_positions is not None and len(self.snp_positions) != p_g:
            raise StructuralError(
                f"Got {len(self.snp_positions)} SNP positions for {p_g} SNPs"
            )

        for family in self.families:
            fid = family.pedigree.family_id
            n_i = family.size
            try:
                family.phenotype = np.asarray(family.phenotype, dtype=float).reshape(-1)
                family.genotypes = np.asarray(family.genotypes, dtype=float).reshape(n_i, p_g)
                family.covariates = np.asarray(family.covariates, dtype=float).reshape(n_i, p)
            except ValueError as e:
                raise StructuralError(f"Family {fid}: inconsistent array shapes ({e})")

            if family.phenotype.shape[0] != n_i:
                raise StructuralError(f"Family {fid}: phenotype has {family.phenotype.shape[0]} rows, expected {n_i}")
            if family.genotypes.shape != (n_i, p_g):
                raise StructuralError(
                    f"Family {fid}: genotype matrix is {family.genotypes.shape}, expected {(n_i, p_g)}"
                )
            if not np.all(np.isin(family.genotypes, (0.0, 1.0, 2.0))):
                raise StructuralError(f"Family {fid}: genotype entries must be 0, 1 or 2")
            if not (np.all(np.isfinite(family.phenotype)) and np.all(np.isfinite(family.covariates))):
                raise StructuralError(f"Family {fid}: phenotype and covariates must be finite")

        family_ids = [family.pedigree.family_id for family in self.families]
        if len(set(family_ids)) != len(family_ids):
            raise StructuralError("Family ids must be unique")

    def subset_families(self, indices: Sequence[int]) -> "Dataset":
        """New dataset with the given families, in the given order"""
        return Dataset(
            families=[self.families[i] for i in indices],
            snp_ids=list(self.snp_ids),
            covariate_ids=list(self.covariate_ids),
            snp_positions=list(self.snp_positions) if self.snp_positions is not None else None,
        )

    def stacked(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Stack all families: (y, G, C, family index per row)"""
        if not self.families:
            return (np.zeros(0), np.zeros((0, self.n_snps)),
                    np.zeros((0, self.n_covariates)), np.zeros(0, dtype=int))

        y = np.concatenate([f.phenotype for f in self.families])
        G = np.vstack([f.genotypes for f in self.families])
        C = np.vstack([f.covariates for f in self.families])
        index = np.repeat(np.arange(self.n_families), [f.size for f in self.families])
        return y, G, C, index

    def family_summary(self) -> Dict[str, int]:
        """Counts of families by child type"""
        counts: Dict[str, int] = {}
        for family in self.families:
            key = family.pedigree.child_type.value
            counts[key] = counts.get(key, 0) + 1
        return counts
