"""
Configuration Manager for familial e-value runs
YAML-backed nested sections, named presets and an environment override for
the worker count.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from ..analysis.evaluation import EvaluationKind
from ..analysis.selector import (
    DEFAULT_Q_LIST, DEFAULT_S_GRID, GENE_LEVEL_S_GRID, GENE_LEVEL_T_GRID, T_GRID_PRESETS, SelectionConfig,
)
from ..errors import ConfigError
from ..models.family_data import AceVarianceComponents
from ..simulation.genotype_simulator import BlockSpec, SimConfig

THREADS_ENV_VAR = "EVALUE_THREADS"


@dataclass
class SimulationSection:
    """Synthetic data layout and generating model"""
    m: int = 250
    block_sizes: List[int] = field(default_factory=lambda: [6, 4, 6, 4, 30])
    block_mafs: List[float] = field(default_factory=lambda: [0.2, 0.4, 0.4, 0.25, 0.25])
    within_corr: float = 0.7
    causal_blocks: List[int] = field(default_factory=lambda: [0, 1, 2, 3])
    noise_block: int = 4
    sigma_a2: float = 4.0
    sigma_c2: float = 1.0
    sigma_e2: float = 1.0
    family_type: str = "MZ"
    n_children: int = 2
    h: float = 10.0
    effect_scale: str = "total_variance"


@dataclass
class ResamplingSection:
    R: int = 500
    R1: int = 500
    s_grid: List[float] = field(default_factory=lambda: list(DEFAULT_S_GRID))


@dataclass
class SelectionSection:
    """Evaluation maps, quantile levels and thresholds"""
    kinds: List[str] = field(default_factory=lambda: ["E2"])
    q_list: List[float] = field(default_factory=lambda: list(DEFAULT_Q_LIST))
    t: Optional[float] = None
    t_grid: Optional[List[float]] = None
    split_fraction: float = 0.75
    mean_evalue: bool = True


@dataclass
class BaselineSection:
    rfgls_bh: bool = True
    mbic2: bool = True
    fdr_level: float = 0.05
    mbic2_penalty_constant: float = 4.0


@dataclass
class StudySection:
    h_list: List[float] = field(default_factory=lambda: [10.0, 7.0, 5.0, 3.0, 2.0, 1.0, 0.0])
    replications: int = 100


@dataclass
class OutputSection:
    out_dir: str = "results"
    dump_distributions: bool = False
    max_workers: int = 1


@dataclass
class RunConfig:
    """Main run configuration"""
    simulation: SimulationSection = field(default_factory=SimulationSection)
    resampling: ResamplingSection = field(default_factory=ResamplingSection)
    selection: SelectionSection = field(default_factory=SelectionSection)
    baselines: BaselineSection = field(default_factory=BaselineSection)
    study: StudySection = field(default_factory=StudySection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0

    def validate(self):
        if not 0 < self.selection.split_fraction < 1:
            raise ConfigError(f"split_fraction must lie in (0, 1), got {self.selection.split_fraction}")
        if self.study.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.study.replications}")
        if not self.study.h_list:
            raise ConfigError("h_list must not be empty")
        if self.output.max_workers < 1:
            raise ConfigError(f"max_workers must be >= 1, got {self.output.max_workers}")
        if not 0 < self.baselines.fdr_level < 1:
            raise ConfigError(f"fdr_level must lie in (0, 1), got {self.baselines.fdr_level}")
        if not self.selection.kinds:
            raise ConfigError("At least one evaluation kind is required")

        # Building the derived objects runs their own checks
        for kind in self.kinds:
            self.selection_config(kind)
        self.sim_config()

    @property
    def kinds(self) -> List[EvaluationKind]:
        try:
            return [EvaluationKind.parse(kind) for kind in self.selection.kinds]
        except ValueError:
            raise ConfigError(f"Unknown evaluation kind in {self.selection.kinds} (expected E1 or E2)")

    def selection_config(self, kind: Optional[EvaluationKind] = None) -> SelectionConfig:
        kind = EvaluationKind.parse(kind) if kind is not None else self.kinds[0]
        return SelectionConfig(
            q_list=tuple(self.selection.q_list),
            t=self.selection.t,
            t_grid=tuple(self.selection.t_grid) if self.selection.t_grid is not None else None,
            s_grid=tuple(self.resampling.s_grid),
            kind=kind,
            R=self.resampling.R,
            R1=self.resampling.R1,
            seed=self.seed,
            max_workers=self.output.max_workers,
        )

    def sim_config(self, h: Optional[float] = None) -> SimConfig:
        sim = self.simulation
        try:
            vc = AceVarianceComponents(sim.sigma_a2, sim.sigma_c2, sim.sigma_e2)
        except ValueError as e:
            raise ConfigError(str(e))
        return SimConfig(
            m=sim.m,
            blocks=BlockSpec(tuple(sim.block_sizes), tuple(sim.block_mafs), sim.within_corr),
            h=sim.h if h is None else h,
            causal_blocks=tuple(sim.causal_blocks),
            noise_block=sim.noise_block,
            vc=vc,
            family_type=sim.family_type,
            n_children=sim.n_children,
            effect_scale=sim.effect_scale,
            seed=self.seed,
        )


SECTION_TYPES = {
    "simulation": SimulationSection,
    "resampling": ResamplingSection,
    "selection": SelectionSection,
    "baselines": BaselineSection,
    "study": StudySection,
    "output": OutputSection,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "table1_e1": {
        "description": "Simulation study with E1 over the exp(-1)..exp(-5) thresholds",
        "selection": {"kinds": ["E1"], "t_grid": list(T_GRID_PRESETS[EvaluationKind.E1])},
    },
    "table1_e2": {
        "description": "Simulation study with E2 over the 0.8..0.5 thresholds",
        "selection": {"kinds": ["E2"], "t_grid": list(T_GRID_PRESETS[EvaluationKind.E2])},
    },
    "gene_level": {
        "description": "Gene-level select workflow: E2 on the full (s, t) grid",
        "resampling": {"s_grid": list(GENE_LEVEL_S_GRID)},
        "selection": {"kinds": ["E2"], "t_grid": list(GENE_LEVEL_T_GRID)},
    },
}


def _build_section(name: str, data: Optional[Dict[str, Any]]):
    section_type = SECTION_TYPES[name]
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{name}' must be a mapping")
    known = {f.name for f in fields(section_type)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key '{name}.{unknown[0]}'")
    return section_type(**data)


def _apply_overrides(section, overrides: Dict[str, Any], name: str):
    known = {f.name for f in fields(section)}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"Unknown key '{name}.{key}'")
        setattr(section, key, value)


class ConfigManager:
    """Loads, overrides and saves RunConfig documents"""

    def __init__(self, config_file: Optional[Path] = None, preset: Optional[str] = None):
        self.logger = logging.getLogger(__name__)
        self.config_file = Path(config_file) if config_file is not None else None
        self._config = self._load_config()
        if preset:
            self.apply_preset(preset)
        self._apply_environment()
        self._config.validate()

    def _load_config(self) -> RunConfig:
        """Load configuration from file or fall back to defaults"""
        if self.config_file is None:
            return RunConfig()
        if not self.config_file.exists():
            raise ConfigError(f"Config file not found: {self.config_file}")

        try:
            with open(self.config_file, "r") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Could not parse {self.config_file}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"{self.config_file} must contain a mapping at top level")

        unknown = sorted(set(data) - set(SECTION_TYPES) - {"seed"})
        if unknown:
            raise ConfigError(f"Unknown key '{unknown[0]}'")

        try:
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {data.get('seed')!r}")

        sections = {name: _build_section(name, data.get(name)) for name in SECTION_TYPES}
        self.logger.info(f"Loaded configuration from {self.config_file}")
        return RunConfig(seed=seed, **sections)

    def _apply_environment(self):
        threads = os.environ.get(THREADS_ENV_VAR)
        if threads is None:
            return
        try:
            self._config.output.max_workers = int(threads)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got '{threads}'")
        self.logger.debug(f"Worker count set to {threads} from {THREADS_ENV_VAR}")

    def get_config(self) -> RunConfig:
        return self._config

    def get_presets(self) -> Dict[str, Dict[str, Any]]:
        return PRESETS

    def apply_preset(self, preset_name: str):
        """Overlay a named preset onto the loaded configuration"""
        if preset_name not in PRESETS:
            raise ConfigError(f"Unknown preset '{preset_name}' (available: {', '.join(sorted(PRESETS))})")

        for name, overrides in PRESETS[preset_name].items():
            if name == "description":
                continue
            _apply_overrides(getattr(self._config, name), overrides, name)
        self.logger.info(f"Applied preset '{preset_name}'")

    def save_config(self, path: Path):
        """Write the effective configuration as YAML"""
        with open(path, "w") as f:
            yaml.safe_dump(asdict(self._config), f, default_flow_style=False, sort_keys=True)
