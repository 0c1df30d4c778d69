"""
Monte-Carlo checks of the selector and its baselines on simulated studies

Replication counts and ensemble sizes are reduced; run with `pytest -m slow`.
"""

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from src.analysis.baselines import mbic2_backward, single_snp_gls_pvalues
from src.analysis.bootstrap import ResamplingConfig, build_ensemble
from src.analysis.evaluation import EvaluationKind
from src.analysis.lmm import fit_ace
from src.analysis.selector import evalue_report
from src.analysis.study_runner import StudyRunner
from src.config.config_manager import THREADS_ENV_VAR, ConfigManager
from src.models.family_data import AceVarianceComponents
from src.simulation.genotype_simulator import SimConfig, replicate_streams, simulate_dataset

pytestmark = pytest.mark.slow


def test_null_pvalues_are_uniform():
    config = SimConfig(m=100, h=0.0)
    pvalues = []
    for replication in range(60):
        dataset, _ = simulate_dataset(config, replicate_streams(101, replication))
        pvalues.append(single_snp_gls_pvalues(dataset).pvalues)
    result = stats.kstest(np.concatenate(pvalues), "uniform")
    assert result.statistic < 0.05


def test_mz_twin_phenotype_covariance():
    config = SimConfig(m=8000, h=0.0, vc=AceVarianceComponents(4.0, 1.0, 1.0))
    dataset, _ = simulate_dataset(config, replicate_streams(102, 0))
    twins = np.array([family.phenotype[2:4] for family in dataset.families])
    covariance = np.cov(twins.T)[0, 1]
    assert covariance == pytest.approx(5.0, abs=0.3)


@pytest.fixture
def scaled_study(sample_config_file, temp_dir, monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    config = ConfigManager(sample_config_file).get_config()
    config.simulation.m = 250
    config.resampling.R = config.resampling.R1 = 300
    config.resampling.s_grid = [0.2, 0.5, 1.0, 2.0]
    config.study.h_list = [10.0, 5.0, 2.0, 0.0]
    config.study.replications = 10
    config.baselines.mbic2 = True

    paths = StudyRunner(config, temp_dir / "study").run_study()
    return pd.read_csv(paths["aggregate"])


def rates(aggregate, method):
    return aggregate[aggregate["method"] == method].set_index("h")


def test_scaled_study_rates(scaled_study):
    assert (scaled_study["n_failed"] == 0).all()

    rfgls = rates(scaled_study, "rfgls-bh")
    assert rfgls.loc[10.0, "tp"] > rfgls.loc[5.0, "tp"] > rfgls.loc[2.0, "tp"]
    assert rfgls.loc[10.0, "tp"] >= 0.6

    evalue = rates(scaled_study, "evalue")
    assert evalue.loc[10.0, "tp"] > evalue.loc[2.0, "tp"]
    assert evalue.loc[10.0, "tp"] >= 0.5
    assert evalue.loc[10.0, "tn"] >= 0.7
    assert evalue.loc[0.0, "tn"] >= 0.9
    assert evalue.loc[0.0, "rtn"] >= 0.9

    assert (rates(scaled_study, "mbic2")["tn"] >= 0.88).all()


def test_mbic2_keeps_null_selections_small():
    config = SimConfig(m=250, h=0.0)
    sizes = [
        len(mbic2_backward(simulate_dataset(config, replicate_streams(103, replication))[0]))
        for replication in range(20)
    ]
    assert np.mean(sizes) <= 3.5


def test_causal_drop_quantile_shrinks_with_more_families():
    medians = []
    for m in (100, 250, 500):
        config = SimConfig(m=m, h=10.0)
        quantiles = []
        for replication in range(50):
            dataset, _ = simulate_dataset(config, replicate_streams(104, m, replication))
            resampling = ResamplingConfig(R=200, R1=200, s=1.0, seed=replication)
            ensemble = build_ensemble(fit_ace(dataset), dataset, resampling)
            quantiles.append(evalue_report(ensemble, EvaluationKind.E2, (0.9,)).dropone_quantiles[0, 0])
        medians.append(np.median(quantiles))
    assert medians[0] > medians[1] > medians[2]
