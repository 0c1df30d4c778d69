"""
Synthetic family GWAS data
Correlated haplotype blocks, Mendelian transmission to MZ/DZ/adopted children,
ACE-distributed phenotypes, and truth scoring of selected SNP sets.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from ..models.family_data import AceVarianceComponents, ChildType, Dataset, FamilyRecord, PedigreeSpec
from ..analysis.kinship import ace_covariance, build_kinship

logger = logging.getLogger(__name__)


class EffectScale(Enum):
    """How the per-SNP heritability h maps to a causal coefficient"""
    # beta^2 * 2pq = h / (100 * total variance): the closed-form formula as written
    FORMULA = "formula"
    # beta^2 * 2pq = h / 100: the SNP explains h / total percent of the phenotypic variance
    TOTAL_VARIANCE = "total_variance"

    @classmethod
    def parse(cls, value) -> "EffectScale":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(member.value for member in cls)
            raise ConfigError(f"Unknown effect scale '{value}' (expected one of {valid})")


@dataclass(frozen=True)
class BlockSpec:
    sizes: Tuple[int, ...] = (6, 4, 6, 4, 30)
    mafs: Tuple[float, ...] = (0.2, 0.4, 0.4, 0.25, 0.25)
    within_corr: float = 0.7

    def __post_init__(self):
        if len(self.sizes) != len(self.mafs):
            raise ConfigError(f"Got {len(self.sizes)} block sizes but {len(self.mafs)} MAFs")
        if not self.sizes or any(size < 1 for size in self.sizes):
            raise ConfigError(f"Block sizes must be positive, got {self.sizes}")
        if any(not 0 < maf <= 0.5 for maf in self.mafs):
            raise ConfigError(f"Block MAFs must lie in (0, 0.5], got {self.mafs}")
        if not 0 <= self.within_corr < 1:
            raise ConfigError(f"Within-block correlation must lie in [0, 1), got {self.within_corr}")

    @property
    def n_snps(self) -> int:
        return sum(self.sizes)

    @property
    def starts(self) -> List[int]:
        return [int(v) for v in np.concatenate([[0], np.cumsum(self.sizes)[:-1]])]

    def block_indices(self, block: int) -> List[int]:
        start = self.starts[block]
        return list(range(start, start + self.sizes[block]))

    def snp_mafs(self) -> np.ndarray:
        return np.repeat(np.asarray(self.mafs, dtype=float), self.sizes)

    def block_of(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.sizes)), self.sizes)


@dataclass
class TruthSpec:
    causal_indices: List[int]
    h: float
    beta: np.ndarray
    causal_blocks: Tuple[int, ...] = (0, 1, 2, 3)
    noise_block: int = 4


@dataclass
class Metrics:
    tp: Optional[float]
    tn: float
    rtp: Optional[float]
    rtn: float


@dataclass
class SimConfig:
    m: int = 250
    blocks: BlockSpec = field(default_factory=BlockSpec)
    h: float = 10.0
    causal_blocks: Tuple[int, ...] = (0, 1, 2, 3)
    noise_block: int = 4
    causal_indices: Optional[Tuple[int, ...]] = None
    vc: AceVarianceComponents = field(default_factory=lambda: AceVarianceComponents(4.0, 1.0, 1.0))
    family_type: ChildType = ChildType.MZ
    n_children: int = 2
    effect_scale: EffectScale = EffectScale.TOTAL_VARIANCE
    seed: int = 0

    def __post_init__(self):
        self.effect_scale = EffectScale.parse(self.effect_scale)
        if not isinstance(self.family_type, ChildType):
            self.family_type = ChildType.parse(self.family_type)
        if self.m < 1:
            raise ConfigError(f"Family count m must be >= 1, got {self.m}")
        if self.h < 0:
            raise ConfigError(f"Per-SNP heritability must be >= 0, got {self.h}")
        if self.family_type == ChildType.MIXED:
            raise ConfigError("Simulated families need a single child type")
        if self.n_children < 1:
            raise ConfigError(f"n_children must be >= 1, got {self.n_children}")

        n_blocks = len(self.blocks.sizes)
        for block in tuple(self.causal_blocks) + (self.noise_block,):
            if not 0 <= block < n_blocks:
                raise ConfigError(f"Block id {block} out of range for {n_blocks} blocks")
        if self.noise_block in self.causal_blocks:
            raise ConfigError("The noise block cannot also hold causal SNPs")

    @property
    def causal(self) -> List[int]:
        """Causal SNP indices; defaults to the first SNP of every causal block"""
        if self.causal_indices is not None:
            return sorted(int(j) for j in self.causal_indices)
        starts = self.blocks.starts
        return [starts[block] for block in self.causal_blocks]


def replicate_streams(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one replication job"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def simulate_haplotypes(n_haplotypes: int, blocks: BlockSpec, rng: np.random.Generator) -> np.ndarray:
    """0/1 haplotypes with equicorrelated entries inside each block

    Each block draws one common allele Z ~ Bernoulli(maf); every SNP copies Z
    with probability sqrt(within_corr) and otherwise draws its own allele.
    """
    copy_probability = math.sqrt(blocks.within_corr)
    haplotypes = np.empty((n_haplotypes, blocks.n_snps), dtype=np.int8)

    for block, (size, maf) in enumerate(zip(blocks.sizes, blocks.mafs)):
        start = blocks.starts[block]
        common = rng.binomial(1, maf, size=(n_haplotypes, 1))
        own = rng.binomial(1, maf, size=(n_haplotypes, size))
        copies = rng.random((n_haplotypes, size)) < copy_probability
        haplotypes[:, start:start + size] = np.where(copies, common, own)

    return haplotypes


def _transmit(parent_haplotypes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # One uniformly chosen haplotype of a (2, p) parent
    return parent_haplotypes[rng.integers(2)]


def simulate_family_genotypes(pedigree: PedigreeSpec, blocks: BlockSpec,
                              rng: np.random.Generator) -> np.ndarray:
    """Genotypes (n_i, p_g) in member order for a two-parent nuclear family"""
    parents = pedigree.parents
    founders = simulate_haplotypes(2 * len(parents), blocks, rng).reshape(len(parents), 2, blocks.n_snps)

    genotypes = {}
    for index, parent in enumerate(parents):
        genotypes[parent.member_id] = founders[index].sum(axis=0)

    shared_pair = None
    for child in pedigree.children:
        child_type = pedigree.child_type_of(child)
        if child_type == ChildType.ADOPTED or len(parents) < 2:
            genotypes[child.member_id] = simulate_haplotypes(2, blocks, rng).sum(axis=0)
            continue

        if child_type == ChildType.MZ and shared_pair is not None:
            pair = shared_pair
        else:
            pair = (_transmit(founders[0], rng), _transmit(founders[1], rng))
            if child_type == ChildType.MZ:
                shared_pair = pair
        genotypes[child.member_id] = pair[0] + pair[1]

    return np.vstack([genotypes[member_id] for member_id in pedigree.member_ids]).astype(float)


def simulate_genotypes(config: SimConfig, rng: np.random.Generator) -> Tuple[List[PedigreeSpec], List[np.ndarray]]:
    """Pedigrees and genotype matrices for config.m nuclear families"""
    pedigrees = [
        PedigreeSpec.nuclear(f"F{i + 1:04d}", config.family_type, config.n_children)
        for i in range(config.m)
    ]
    return pedigrees, [simulate_family_genotypes(pedigree, config.blocks, rng) for pedigree in pedigrees]


def effect_sizes(h: float, vc: AceVarianceComponents, mafs: Sequence[float],
                 scale: EffectScale = EffectScale.FORMULA) -> np.ndarray:
    """beta_k = sqrt(h / (100 * total variance * 2 maf_k (1 - maf_k)))

    With EffectScale.TOTAL_VARIANCE every beta_k is multiplied by
    sqrt(total variance), so SNP k explains h / total percent of the
    phenotypic variance.
    """
    scale = EffectScale.parse(scale)
    if h < 0:
        raise ValueError(f"Per-SNP heritability must be >= 0, got {h}")
    beta = []
    for maf in mafs:
        denominator = 100.0 * vc.total * 2.0 * maf * (1.0 - maf)
        if denominator == 0:
            raise ZeroDivisionError(f"MAF {maf} gives a monomorphic SNP with no effect size")
        beta.append(math.sqrt(h / denominator))
    beta = np.asarray(beta, dtype=float)
    if scale == EffectScale.TOTAL_VARIANCE:
        beta *= math.sqrt(vc.total)
    return beta


def simulate_dataset(config: SimConfig, rng: np.random.Generator) -> Tuple[Dataset, TruthSpec]:
    """y_i = G_i beta + eps_i, eps_i ~ N(0, V_i); no covariates"""
    causal = config.causal
    beta = np.zeros(config.blocks.n_snps)
    beta[causal] = effect_sizes(config.h, config.vc, config.blocks.snp_mafs()[causal], config.effect_scale)

    pedigrees, genotypes = simulate_genotypes(config, rng)
    families = []
    factors = {}
    for pedigree, G in zip(pedigrees, genotypes):
        key = pedigree.size
        if key not in factors:
            factors[key] = np.linalg.cholesky(ace_covariance(build_kinship(pedigree), config.vc))
        noise = factors[key] @ rng.standard_normal(pedigree.size)
        families.append(FamilyRecord(
            pedigree=pedigree,
            phenotype=G @ beta + noise,
            genotypes=G,
            covariates=np.zeros((pedigree.size, 0)),
        ))

    dataset = Dataset(
        families=families,
        snp_ids=[f"snp{j + 1}" for j in range(config.blocks.n_snps)],
        snp_positions=[str(j + 1) for j in range(config.blocks.n_snps)],
    )
    truth = TruthSpec(
        causal_indices=causal,
        h=config.h,
        beta=beta,
        causal_blocks=tuple(config.causal_blocks),
        noise_block=config.noise_block,
    )
    logger.debug(
        f"Simulated {config.m} {config.family_type.value} families, h={config.h} ({config.effect_scale.value} effects)"
    )
    return dataset, truth


def score_selection(selected: Sequence[int], truth: TruthSpec, blocks: BlockSpec) -> Metrics:
    """Strict and block-relaxed true positive/negative rates"""
    selected = {int(j) for j in selected}
    outside = [j for j in selected if not 0 <= j < blocks.n_snps]
    if outside:
        raise ValueError(f"Selected indices {sorted(outside)} are out of range for {blocks.n_snps} SNPs")

    causal = set(truth.causal_indices)
    noncausal = set(range(blocks.n_snps)) - causal
    noise = set(blocks.block_indices(truth.noise_block))

    tn = len(noncausal - selected) / len(noncausal) if noncausal else 1.0
    rtn = len(noise - selected) / len(noise)

    if truth.h == 0 or not causal:
        return Metrics(tp=None, tn=tn, rtp=None, rtn=rtn)

    tp = len(selected & causal) / len(causal)
    hits = [bool(selected & set(blocks.block_indices(block))) for block in truth.causal_blocks]
    rtp = sum(hits) / len(hits)
    return Metrics(tp=tp, tn=tn, rtp=rtp, rtn=rtn)
