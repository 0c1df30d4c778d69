"""
Pytest configuration and shared fixtures for the familial e-value selector tests
"""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
import yaml

from src.analysis.evaluation import EvaluationKind
from src.analysis.selector import EvalueReport, SelectionResult
from src.models.family_data import ChildType, Dataset, FamilyRecord, PedigreeSpec
from src.simulation.genotype_simulator import SimConfig, replicate_streams, simulate_dataset


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path)


def make_dataset(genotypes, phenotypes, child_type=ChildType.MZ, covariates=None, snp_ids=None):
    """Dataset of 4-member nuclear families from per-family arrays."""
    families = []
    for i, (G, y) in enumerate(zip(genotypes, phenotypes)):
        G = np.asarray(G, dtype=float)
        C = np.zeros((G.shape[0], 0)) if covariates is None else np.asarray(covariates[i], dtype=float)
        families.append(FamilyRecord(
            pedigree=PedigreeSpec.nuclear(f"F{i + 1}", child_type, G.shape[0] - 2),
            phenotype=np.asarray(y, dtype=float),
            genotypes=G,
            covariates=C,
        ))
    p_g = np.asarray(genotypes[0]).shape[1]
    p = 0 if covariates is None else np.asarray(covariates[0]).shape[1]
    return Dataset(
        families=families,
        snp_ids=snp_ids or [f"snp{j + 1}" for j in range(p_g)],
        covariate_ids=[f"cov{k + 1}" for k in range(p)],
    )


def make_selection_result(n_snps=3, q_list=(0.5, 0.9)):
    """Selection result over two s values with uniform synthetic scores"""
    rng = np.random.default_rng(0)
    reports = {}
    for s in (1.0, 0.2):
        reports[s] = EvalueReport(
            full_scores=rng.uniform(0.2, 1.0, size=100),
            dropone_scores=rng.uniform(0.05, 1.0, size=(100, n_snps)),
            q_list=q_list, kind=EvaluationKind.E2, s=s,
        )
    return SelectionResult(
        selected=(0, 2),
        winning_s=0.2,
        winning_t=0.8,
        pe_trace={(1.0, 0.8): 12.5, (0.2, 0.8): 11.0},
        per_predictor_evalues=reports[0.2],
        set_sizes={(1.0, 0.8): 1, (0.2, 0.8): 2},
        reports=reports,
    )


@pytest.fixture
def small_sim_config():
    """A 60-family MZ design with the default 50-SNP block layout."""
    return SimConfig(m=60, h=10.0, seed=11)


@pytest.fixture
def small_dataset(small_sim_config):
    """Simulated training data and its truth."""
    return simulate_dataset(small_sim_config, replicate_streams(11, 0, 0))


@pytest.fixture
def tiny_dataset():
    """Six families, three SNPs, deterministic values."""
    rng = np.random.default_rng(5)
    genotypes = [rng.integers(0, 3, size=(4, 3)) for _ in range(6)]
    phenotypes = [rng.normal(size=4) + G @ np.array([0.8, 0.0, -0.3]) for G in genotypes]
    return make_dataset(genotypes, phenotypes)


@pytest.fixture
def toy_family_files(temp_dir):
    """A two-family fixture in the CSV input formats."""
    files = {
        'pedigree.csv': (
            "family_id,member_id,role,child_type\n"
            "A,A_P1,parent,\n"
            "A,A_P2,parent,\n"
            "A,A_C1,child,MZ\n"
            "A,A_C2,child,MZ\n"
            "B,B_P1,parent,\n"
            "B,B_P2,parent,\n"
            "B,B_C1,child,DZ\n"
        ),
        'phenotype.csv': (
            "family_id,member_id,value\n"
            "A,A_P1,1.5\n"
            "A,A_P2,-0.25\n"
            "A,A_C1,0.75\n"
            "A,A_C2,0.5\n"
            "B,B_P1,2.0\n"
            "B,B_P2,0.1\n"
            "B,B_C1,-1.2\n"
        ),
        'genotype.csv': (
            "family_id,member_id,rs1,rs2\n"
            "A,A_P1,0,1\n"
            "A,A_P2,1,2\n"
            "A,A_C1,1,1\n"
            "A,A_C2,1,1\n"
            "B,B_P1,2,0\n"
            "B,B_P2,0,0\n"
            "B,B_C1,1,0\n"
        ),
        'covariates.csv': (
            "family_id,member_id,age\n"
            "A,A_P1,45\n"
            "A,A_P2,43\n"
            "A,A_C1,17\n"
            "A,A_C2,17\n"
            "B,B_P1,50\n"
            "B,B_P2,49\n"
            "B,B_C1,20\n"
        ),
        'snp_info.csv': (
            "snp_id,position\n"
            "rs1,1001\n"
            "rs2,2050\n"
        ),
    }
    paths = {}
    for filename, content in files.items():
        path = temp_dir / filename
        path.write_text(content)
        paths[filename.split('.')[0]] = path
    return paths


@pytest.fixture
def sample_config_file(temp_dir):
    """A small but complete run configuration."""
    config = {
        'seed': 3,
        'simulation': {'m': 40, 'h': 10.0},
        'resampling': {'R': 100, 'R1': 100, 's_grid': [0.2, 1.0]},
        'selection': {'kinds': ['E2'], 't': 0.8},
        'baselines': {'rfgls_bh': True, 'mbic2': True},
        'study': {'h_list': [10.0], 'replications': 1},
        'output': {'max_workers': 1},
    }
    config_file = temp_dir / 'test_config.yaml'
    with open(config_file, 'w') as f:
        yaml.dump(config, f)
    return config_file


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "integration: mark test as an end-to-end CLI run"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as a Monte-Carlo check"
    )


def pytest_collection_modifyitems(config, items):
    """Skip integration tests unless specifically requested."""
    if not config.getoption("--integration"):
        skip_integration = pytest.mark.skip(reason="need --integration option to run")
        for item in items:
            if "integration" in item.keywords:
                item.add_marker(skip_integration)


def pytest_addoption(parser):
    """Add custom command line options."""
    parser.addoption(
        "--integration",
        action="store_true",
        default=False,
        help="run end-to-end CLI tests"
    )
