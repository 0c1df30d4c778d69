"""
Tests for relationship matrices and ACE covariance blocks
"""

import numpy as np
import pytest
from numpy.testing import assert_array_equal, assert_allclose

from src.analysis.kinship import ace_covariance, build_kinship, family_relationship_blocks
from src.errors import StructuralError
from src.models.family_data import AceVarianceComponents, ChildType, Member, PedigreeSpec, Role


def test_mz_family_kinship():
    phi = build_kinship(PedigreeSpec.nuclear("F1", ChildType.MZ))
    expected = np.array([
        [1.0, 0.0, 0.5, 0.5],
        [0.0, 1.0, 0.5, 0.5],
        [0.5, 0.5, 1.0, 1.0],
        [0.5, 0.5, 1.0, 1.0],
    ])
    assert_array_equal(phi, expected)


def test_dz_and_biological_siblings_share_half():
    for child_type in (ChildType.DZ, ChildType.BIO_SIB):
        phi = build_kinship(PedigreeSpec.nuclear("F1", child_type))
        assert phi[2, 3] == 0.5
        assert phi[0, 2] == 0.5


def test_adopted_children_are_unrelated():
    phi = build_kinship(PedigreeSpec.nuclear("F1", ChildType.ADOPTED))
    assert_array_equal(phi, np.eye(4))


def test_mixed_family_uses_member_types():
    members = (
        Member("P1", Role.PARENT),
        Member("P2", Role.PARENT),
        Member("C1", Role.CHILD, ChildType.BIO_SIB),
        Member("C2", Role.CHILD, ChildType.ADOPTED),
    )
    phi = build_kinship(PedigreeSpec("F1", members, ChildType.MIXED))
    assert phi[0, 2] == 0.5
    assert phi[0, 3] == 0.0
    assert phi[2, 3] == 0.0


def test_mixed_family_without_child_types_is_rejected():
    members = (Member("P1", Role.PARENT), Member("C1", Role.CHILD))
    with pytest.raises(StructuralError):
        PedigreeSpec("F1", members, ChildType.MIXED)


def test_kinship_is_symmetric_with_unit_diagonal():
    phi = build_kinship(PedigreeSpec.nuclear("F1", ChildType.DZ, n_children=3))
    assert phi.shape == (5, 5)
    assert_array_equal(phi, phi.T)
    assert_array_equal(np.diag(phi), np.ones(5))


def test_ace_covariance_mz_family():
    phi = build_kinship(PedigreeSpec.nuclear("F1", ChildType.MZ))
    V = ace_covariance(phi, AceVarianceComponents(4.0, 1.0, 1.0))
    assert_allclose(np.diag(V), 6.0)
    assert V[2, 3] == pytest.approx(5.0)   # twins: a + c
    assert V[0, 2] == pytest.approx(3.0)   # parent-child: a/2 + c
    assert V[0, 1] == pytest.approx(1.0)   # spouses: c
    assert np.all(np.linalg.eigvalsh(V) > 0)


def test_ace_covariance_rejects_non_square():
    with pytest.raises(StructuralError):
        ace_covariance(np.ones((2, 3)), AceVarianceComponents(1.0, 1.0, 1.0))


def test_variance_components_validation():
    with pytest.raises(StructuralError):
        AceVarianceComponents(1.0, 1.0, 0.0)
    with pytest.raises(StructuralError):
        AceVarianceComponents(-1.0, 1.0, 1.0)
    with pytest.raises(StructuralError):
        AceVarianceComponents(float("nan"), 1.0, 1.0)


def test_relationship_blocks_are_cached(tiny_dataset):
    first = family_relationship_blocks(tiny_dataset)
    second = family_relationship_blocks(tiny_dataset)
    assert first is second
    assert len(first) == tiny_dataset.n_families


def mixed_pedigree(*child_types):
    members = [Member("P1", Role.PARENT), Member("P2", Role.PARENT)]
    members.extend(Member(f"C{k + 1}", Role.CHILD, child_type) for k, child_type in enumerate(child_types))
    return PedigreeSpec("F1", tuple(members), ChildType.MIXED)


@pytest.mark.parametrize("pedigree", [
    *(PedigreeSpec.nuclear("F1", child_type, n_children=n)
      for child_type in (ChildType.MZ, ChildType.DZ, ChildType.ADOPTED, ChildType.BIO_SIB)
      for n in (1, 2, 3)),
    mixed_pedigree(ChildType.BIO_SIB, ChildType.ADOPTED),
    mixed_pedigree(ChildType.MZ, ChildType.MZ, ChildType.ADOPTED),
    mixed_pedigree(ChildType.MZ, ChildType.MZ, ChildType.BIO_SIB),
    mixed_pedigree(ChildType.DZ, ChildType.ADOPTED, ChildType.BIO_SIB),
])
def test_kinship_is_positive_semidefinite(pedigree):
    phi = build_kinship(pedigree)
    assert np.linalg.eigvalsh(phi).min() >= -1e-12

    V = ace_covariance(phi, AceVarianceComponents(4.0, 1.0, 1.0))
    assert np.linalg.eigvalsh(V).min() >= 1.0 - 1e-10
