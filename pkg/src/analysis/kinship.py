"""
Relationship (twice-kinship) matrices and per-family ACE covariance matrices
"""

import logging
from typing import List

import numpy as np

from ..errors import StructuralError
from ..models.family_data import AceVarianceComponents, ChildType, Dataset, Member, PedigreeSpec, Role

logger = logging.getLogger(__name__)

# Symmetric n_i x n_i matrix of twice-kinship coefficients
RelationshipMatrix = np.ndarray

PARENT_CHILD = 0.5
FULL_SIBLING = 0.5
IDENTICAL_TWIN = 1.0


def _pair_coefficient(pedigree: PedigreeSpec, a: Member, b: Member) -> float:
    """Twice-kinship coefficient for two distinct members"""
    if a.role == Role.PARENT and b.role == Role.PARENT:
        # Unrelated founders
        return 0.0

    if a.role == Role.CHILD and b.role == Role.CHILD:
        type_a = pedigree.child_type_of(a)
        type_b = pedigree.child_type_of(b)
        if ChildType.ADOPTED in (type_a, type_b):
            return 0.0
        if type_a == ChildType.MZ and type_b == ChildType.MZ:
            return IDENTICAL_TWIN
        return FULL_SIBLING

    if {a.role, b.role} == {Role.PARENT, Role.CHILD}:
        child = a if a.role == Role.CHILD else b
        if pedigree.child_type_of(child) == ChildType.ADOPTED:
            return 0.0
        return PARENT_CHILD

    raise StructuralError(
        f"Family {pedigree.family_id}: unsupported role combination "
        f"({a.member_id}={a.role}, {b.member_id}={b.role})"
    )


def build_kinship(pedigree: PedigreeSpec) -> RelationshipMatrix:
    """Build the twice-kinship matrix for one family, in member order"""
    members = pedigree.members
    n = len(members)
    phi = np.eye(n)

    for i in range(n):
        for j in range(i + 1, n):
            value = _pair_coefficient(pedigree, members[i], members[j])
            phi[i, j] = value
            phi[j, i] = value

    return phi


def ace_covariance(phi: RelationshipMatrix, vc: AceVarianceComponents) -> np.ndarray:
    """V_i = sigma_a2 * Phi_i + sigma_c2 * 11' + sigma_e2 * I"""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise StructuralError(f"Relationship matrix must be square, got shape {phi.shape}")

    n = phi.shape[0]
    return vc.sigma_a2 * phi + vc.sigma_c2 * np.ones((n, n)) + vc.sigma_e2 * np.eye(n)


def family_relationship_blocks(dataset: Dataset) -> List[RelationshipMatrix]:
    """Relationship matrices for every family, cached on the dataset"""
    if dataset._kinship_cache is None:
        dataset._kinship_cache = [build_kinship(family.pedigree) for family in dataset.families]
        logger.debug(f"Built {len(dataset._kinship_cache)} relationship matrices")
    return dataset._kinship_cache
