"""
Configuration Management

Defines the system model constants, solver tolerances and experiment sweep.
Defaults are the simulation settings of the reference scenario: d_Sk = 1 m,
d_kD = 5 m, path-loss exponent 2, eta1 = 0.4, eta2 = 0.8, alpha = 1 and unit
noise powers.
"""

from dataclasses import dataclass, field, asdict, fields
from typing import Dict, List, Any
import json
import logging

from husrelay.core.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class SystemSection:
    """Relay network constants (the source power P comes from the SNR sweep)"""
    K: int = 2
    T: int = 10
    L: int = 4
    alpha: float = 1.0
    eta1: float = 0.4
    eta2: float = 0.8
    sigma_b2: float = 1.0
    sigma_D2: float = 1.0
    sigma_a2: float = 0.0
    m: int = 3
    log_base: float = 2.0


@dataclass
class FadingSection:
    """Large-scale geometry of the two hops"""
    d_sr: float = 1.0
    d_rd: float = 5.0
    path_loss_exp: float = 2.0


@dataclass
class SolverSection:
    """Alternating-Dinkelbach tolerances"""
    dinkelbach_tol: float = 1e-8
    alternating_tol: float = 1e-8
    bisection_tol: float = 1e-10
    max_dinkelbach_iters: int = 50
    max_alternating_iters: int = 50


@dataclass
class ExperimentSection:
    """Monte Carlo sweep and output settings"""
    strategies: List[str] = field(default_factory=lambda: ["optimal", "markov", "greedy"])
    # SNR is P / sigma in dB
    snr_start_db: float = 0.0
    snr_step_db: float = 5.0
    snr_stop_db: float = 20.0
    trials: int = 200
    master_seed: int = 2024
    output_dir: str = "results"
    workers: int = 1
    record_wall_time: bool = False

    # Size guards
    max_table_entries: int = 5_000_000
    max_exhaustive_sequences: int = 10_000_000

    convergence_instances: int = 1000


@dataclass
class ComparatorSection:
    """Baseline strategy knobs"""
    tau_step: float = 0.01
    fixed_ratio_lambda: float = 0.5
    selection_seed_salt: str = "relay-selection"
    # Bit targets of the delay comparison
    delay_targets: List[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])


@dataclass
class ExperimentConfig:
    """Root configuration object"""
    system: SystemSection = field(default_factory=SystemSection)
    fading: FadingSection = field(default_factory=FadingSection)
    solver: SolverSection = field(default_factory=SolverSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    comparators: ComparatorSection = field(default_factory=ComparatorSection)

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "ExperimentConfig":
        """Build a config from a parsed JSON document"""
        sections = {}
        for section in fields(ExperimentConfig):
            section_cls = section.default_factory
            values = data.get(section.name, {})
            known = {f.name for f in fields(section_cls)}
            unknown = set(values) - known
            if unknown:
                raise ConfigurationError(
                    f"{section.name}.{sorted(unknown)[0]}", "unknown field"
                )
            sections[section.name] = section_cls(**values)
        return ExperimentConfig(**sections)

    @staticmethod
    def load_from_file(config_path: str) -> "ExperimentConfig":
        """Load configuration from JSON file"""
        with open(config_path, 'r', encoding='utf-8') as f:
            data = json.load(f)

        config = ExperimentConfig.from_dict(data)
        logger.info(f"Configuration loaded from {config_path}")
        return config

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save_to_file(self, config_path: str) -> None:
        """Save configuration to JSON file"""
        with open(config_path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    def validate(self) -> "ExperimentConfig":
        """Check every field, naming the first offending one"""
        s, fd, sv, ex, cp = self.system, self.fading, self.solver, self.experiment, self.comparators

        checks = [
            ("system.K", s.K >= 1, "must be >= 1"),
            ("system.T", s.T >= 1, "must be >= 1"),
            ("system.L", s.L >= 1, "must be >= 1"),
            ("system.alpha", s.alpha > 0, "must be > 0"),
            ("system.eta1", 0 < s.eta1 <= 1, "must lie in (0, 1]"),
            ("system.eta2", 0 < s.eta2 <= 1, "must lie in (0, 1]"),
            ("system.sigma_b2", s.sigma_b2 > 0, "must be > 0"),
            ("system.sigma_D2", s.sigma_D2 > 0, "must be > 0"),
            ("system.sigma_a2", s.sigma_a2 == 0, "antenna noise is fixed to 0"),
            ("system.m", s.m >= 1, "must be >= 1"),
            ("system.log_base", s.log_base > 1, "must be > 1"),
            ("fading.d_sr", fd.d_sr > 0, "must be > 0"),
            ("fading.d_rd", fd.d_rd > 0, "must be > 0"),
            ("fading.path_loss_exp", fd.path_loss_exp >= 0, "must be >= 0"),
            ("solver.dinkelbach_tol", sv.dinkelbach_tol > 0, "must be > 0"),
            ("solver.alternating_tol", sv.alternating_tol > 0, "must be > 0"),
            ("solver.bisection_tol", sv.bisection_tol > 0, "must be > 0"),
            ("solver.max_dinkelbach_iters", sv.max_dinkelbach_iters >= 1, "must be >= 1"),
            ("solver.max_alternating_iters", sv.max_alternating_iters >= 1, "must be >= 1"),
            ("experiment.strategies", len(ex.strategies) > 0, "must name at least one strategy"),
            ("experiment.snr_step_db", ex.snr_step_db > 0, "must be > 0"),
            ("experiment.snr_stop_db", ex.snr_stop_db >= ex.snr_start_db, "must be >= snr_start_db"),
            ("experiment.trials", ex.trials >= 1, "must be >= 1"),
            ("experiment.workers", ex.workers >= 1, "must be >= 1"),
            ("experiment.max_table_entries", ex.max_table_entries >= 1, "must be >= 1"),
            ("experiment.max_exhaustive_sequences", ex.max_exhaustive_sequences >= 1, "must be >= 1"),
            ("experiment.convergence_instances", ex.convergence_instances >= 1, "must be >= 1"),
            ("comparators.tau_step", 0 < cp.tau_step < 1, "must lie in (0, 1)"),
            ("comparators.fixed_ratio_lambda", 0 <= cp.fixed_ratio_lambda <= 1, "must lie in [0, 1]"),
            ("comparators.delay_targets", all(x > 0 for x in cp.delay_targets), "must be > 0"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigurationError(name, message)

        # Strategy names are checked lazily against the registry to avoid an import cycle
        from husrelay.comparators.baselines import Strategy
        for tag in ex.strategies:
            try:
                Strategy(tag)
            except ValueError:
                raise ConfigurationError("experiment.strategies", f"unknown strategy '{tag}'")

        return self

    def snr_points(self) -> List[float]:
        """SNR sweep in dB, stop value included"""
        ex = self.experiment
        points = []
        i = 0
        while True:
            value = ex.snr_start_db + i * ex.snr_step_db
            if value > ex.snr_stop_db + 1e-9:
                break
            points.append(round(value, 10))
            i += 1
        return points

    def source_power(self, snr_db: float) -> float:
        """P such that P / sigma equals the requested SNR"""
        return self.system.sigma_b2 * 10.0 ** (snr_db / 10.0)


def get_default_config() -> ExperimentConfig:
    """Get default configuration"""
    return ExperimentConfig()
