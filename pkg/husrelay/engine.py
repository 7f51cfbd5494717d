"""
HUS Relay Experiment Engine

Orchestrates Monte Carlo sweeps: per (strategy, SNR, trial) it derives the
seeds, samples the shared channel trace, executes the strategy and collects
a ResultRow. Also builds lookup tables and solver convergence traces.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple, Any

from husrelay.core.config import ExperimentConfig, get_default_config
from husrelay.core.errors import TableMismatchError
from husrelay.core.performance import EvaluationCounter, TimerContext
from husrelay.channel.fading import FadingParams, ChannelTrace, sample_trace, derive_seed, make_rng
from husrelay.channel.markov import ChannelQuantizer
from husrelay.model.system import SystemParams, BatteryState, EnergyVariation, feasible_variations
from husrelay.solver.embedded import SolverSettings, solve_embedded
from husrelay.planner.dynamic import PlanResult, backward_induction, exhaustive_search, run_greedy
from husrelay.planner.markov_policy import PolicyTable, build_lookup_table, load_table, params_hash, run_online_markov
from husrelay.comparators.baselines import (
    Strategy,
    ComparatorConfig,
    run_comparator,
    delay_comparison,
    mean_delay,
)
from husrelay.reporting.reporter import ResultRow, summarize

logger = logging.getLogger(__name__)

# (strategy tag, snr index, trial)
Task = Tuple[str, int, int]


class ExperimentEngine:
    """Runs strategies over the configured SNR sweep"""

    def __init__(self, config: Optional[ExperimentConfig] = None):
        self.config = (config or get_default_config()).validate()
        self.settings = SolverSettings.from_section(self.config.solver)
        self.fading = FadingParams.from_section(self.config.fading)
        self.snr_points = self.config.snr_points()
        self.counter = EvaluationCounter()
        self.tables: Dict[int, PolicyTable] = {}
        self._quantizer: Optional[ChannelQuantizer] = None

        logger.info(f"Engine ready: K={self.config.system.K}, T={self.config.system.T}, "
                    f"L={self.config.system.L}, SNR points {self.snr_points}")

    @property
    def quantizer(self) -> ChannelQuantizer:
        if self._quantizer is None:
            self._quantizer = ChannelQuantizer.from_fading(self.fading, self.config.system.m,
                                                           self.config.system.K)
        return self._quantizer

    def params_for(self, snr_db: float) -> SystemParams:
        return SystemParams.from_section(self.config.system, self.config.source_power(snr_db))

    def trace_seed(self, snr_index: int, trial: int) -> int:
        """Shared by every strategy so comparisons are paired"""
        return derive_seed(self.config.experiment.master_seed, "trace", snr_index, trial)

    def strategy_seed(self, tag: str, snr_index: int, trial: int) -> int:
        salt = self.config.comparators.selection_seed_salt
        return derive_seed(self.config.experiment.master_seed, salt, tag, snr_index, trial)

    def comparator_config(self, strategy: Strategy, seed: int = 0) -> ComparatorConfig:
        cp = self.config.comparators
        return ComparatorConfig(strategy=strategy, tau_step=cp.tau_step,
                                fixed_ratio_lambda=cp.fixed_ratio_lambda, selection_seed=seed)

    def build_table(self, snr_db: float) -> PolicyTable:
        """Lookup table for one source power"""
        params = self.params_for(snr_db)
        with TimerContext(self.counter, "build_table") as timer:
            table = build_lookup_table(self.quantizer, params, self.settings,
                                       max_entries=self.config.experiment.max_table_entries,
                                       counter=self.counter)
        logger.info(f"Table at {snr_db} dB: {table.entry_count} entries in {timer.elapsed_seconds:.2f}s")
        logger.info(f"Expected r_total from empty batteries: "
                    f"{table.expected_value(0, BatteryState.empty(params.K)):.4f}")
        return table

    def table_hash(self, snr_index: int) -> str:
        return params_hash(self.params_for(self.snr_points[snr_index]), self.quantizer, self.settings)

    def load_tables(self, paths: Sequence[str]) -> None:
        """Reuse persisted tables; each must match one SNR point of the sweep"""
        hashes = {self.table_hash(i): i for i in range(len(self.snr_points))}
        for path in paths:
            table = load_table(path)
            snr_index = hashes.get(table.params_hash)
            if snr_index is None:
                raise TableMismatchError(f"{path} was built for parameters outside this sweep",
                                         found=table.params_hash)
            self.tables[snr_index] = table
            logger.info(f"Loaded policy table for {self.snr_points[snr_index]} dB from {path}")

    def table_for(self, snr_index: int) -> PolicyTable:
        if snr_index not in self.tables:
            self.tables[snr_index] = self.build_table(self.snr_points[snr_index])
        return self.tables[snr_index]

    def sample(self, snr_index: int, trial: int) -> Tuple[ChannelTrace, SystemParams, int]:
        params = self.params_for(self.snr_points[snr_index])
        seed = self.trace_seed(snr_index, trial)
        return sample_trace(params, self.fading, seed), params, seed

    def execute(self, strategy: Strategy, trace: ChannelTrace, params: SystemParams,
                snr_index: int, trial: int) -> PlanResult:
        """Run one strategy on one trace"""
        if strategy is Strategy.OPTIMAL:
            return backward_induction(trace, params, self.settings)
        if strategy is Strategy.EXHAUSTIVE:
            return exhaustive_search(trace, params, self.settings,
                                     max_sequences=self.config.experiment.max_exhaustive_sequences)
        if strategy is Strategy.MARKOV:
            return run_online_markov(trace, self.table_for(snr_index), params, self.quantizer, self.settings)
        if strategy is Strategy.GREEDY:
            return run_greedy(trace, params, self.settings)
        seed = 0
        if strategy is Strategy.RANDOM_RELAY:
            seed = self.strategy_seed(strategy.value, snr_index, trial)
        return run_comparator(trace, params, self.comparator_config(strategy, seed), self.settings)

    def run_task(self, task: Task) -> ResultRow:
        tag, snr_index, trial = task
        strategy = Strategy(tag)
        trace, params, seed = self.sample(snr_index, trial)

        with TimerContext(self.counter, tag) as timer:
            plan = self.execute(strategy, trace, params, snr_index, trial)

        logger.debug(f"{tag} snr={self.snr_points[snr_index]} trial={trial}: r_total={plan.r_total:.6f}")
        wall = timer.elapsed_seconds if self.config.experiment.record_wall_time else None
        return ResultRow.from_plan(tag, self.snr_points[snr_index], trial, seed, plan, wall)

    def tasks(self, strategies: Sequence[str]) -> List[Task]:
        return [
            (tag, snr_index, trial)
            for tag in strategies
            for snr_index in range(len(self.snr_points))
            for trial in range(self.config.experiment.trials)
        ]

    def run(self, strategies: Optional[Sequence[str]] = None) -> List[ResultRow]:
        """Every (strategy, SNR, trial) cell, sorted deterministically"""
        strategies = list(strategies or self.config.experiment.strategies)
        for tag in strategies:
            Strategy(tag)

        if Strategy.MARKOV.value in strategies:
            for snr_index in range(len(self.snr_points)):
                self.table_for(snr_index)

        tasks = self.tasks(strategies)
        workers = self.config.experiment.workers
        logger.info(f"Running {len(tasks)} tasks on {workers} worker(s)")

        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                     initargs=(self.config.to_dict(), self.tables)) as pool:
                rows = list(pool.map(_run_worker_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            rows = [self.run_task(task) for task in tasks]

        order = {tag: i for i, tag in enumerate(strategies)}
        rows.sort(key=lambda r: (order[r.strategy], self.snr_points.index(r.snr_db), r.trial))
        return rows

    def delay_study(self, targets: Optional[Sequence[float]] = None) -> Dict[str, Any]:
        """Mean slots to reach each bit target, power splitting vs time switching.

        A trial that never reaches a target within T slots counts as T + 1;
        the fraction of trials that did reach it is reported alongside.
        """
        targets = list(targets or self.config.comparators.delay_targets)
        cfg = self.comparator_config(Strategy.TIME_SWITCHING)
        study: Dict[str, Any] = {"targets": targets, "horizon": self.config.system.T, "points": []}

        for snr_index, snr_db in enumerate(self.snr_points):
            slots: Dict[str, List[List[Optional[int]]]] = {"power_splitting": [], "time_switching": []}
            for trial in range(self.config.experiment.trials):
                trace, params, _ = self.sample(snr_index, trial)
                result = delay_comparison(trace, params, self.settings, cfg, targets)
                for name, counts in result.items():
                    slots[name].append(counts)

            point = {"snr_db": snr_db}
            for name, per_trial in slots.items():
                summaries = [mean_delay([c[i] for c in per_trial], self.config.system.T)
                             for i in range(len(targets))]
                point[name] = [mean for mean, _ in summaries]
                point[f"{name}_reached"] = [fraction for _, fraction in summaries]
            study["points"].append(point)
        return study

    def convergence(self, instances: Optional[int] = None, snr_db: float = 10.0) -> List[Dict[str, Any]]:
        """Iteration traces of the embedded solver on random single-slot instances"""
        instances = instances or self.config.experiment.convergence_instances
        params = replace(self.params_for(snr_db), T=1)
        settings = replace(self.settings, record_trace=True)
        records: List[Dict[str, Any]] = []
        within_ten = 0
        runs = 0

        for instance in range(instances):
            seed = derive_seed(self.config.experiment.master_seed, "convergence", instance)
            trace = sample_trace(params, self.fading, seed)
            ch = trace.slot(0)

            rng = make_rng(seed)
            state = BatteryState(tuple(int(x) for x in rng.integers(0, params.L + 1, size=params.K)))
            options = feasible_variations(state, ch, params)
            v = EnergyVariation(options[int(rng.integers(0, len(options)))])

            solution = solve_embedded(v, ch, params, settings)
            # Iterations used by each (sweep, relay) Dinkelbach run
            lengths: Dict[Tuple[int, int], int] = {}
            for rec in solution.trace:
                records.append({"instance": instance, "sweep": rec.sweep, "relay": rec.relay,
                                "iteration": rec.iteration, "q": rec.q, "F": rec.F, "J": rec.J})
                lengths[(rec.sweep, rec.relay)] = rec.iteration
            runs += len(lengths)
            within_ten += sum(1 for n in lengths.values() if n <= 10)

        if runs:
            logger.info(f"{within_ten}/{runs} Dinkelbach runs converged within 10 iterations")
        return records

    def print_summary(self, rows: List[ResultRow]) -> None:
        """Print mean throughput per cell"""
        print("\n=== HUSRELAY SUMMARY ===")
        for cell in summarize(rows):
            spread = f" +/- {cell.sem:.4f}" if cell.sem is not None else ""
            print(f"{cell.strategy:18} {cell.snr_db:6.1f} dB  mean r_total {cell.mean:.4f}{spread}  (n={cell.count})")
        print("========================\n")


_WORKER_ENGINE: Optional[ExperimentEngine] = None


def _init_worker(config_dict: Dict[str, Any], tables: Dict[int, PolicyTable]) -> None:
    global _WORKER_ENGINE
    _WORKER_ENGINE = ExperimentEngine(ExperimentConfig.from_dict(config_dict))
    _WORKER_ENGINE.tables = dict(tables)


def _run_worker_task(task: Task) -> ResultRow:
    return _WORKER_ENGINE.run_task(task)


def create_engine(config_path: Optional[str] = None) -> ExperimentEngine:
    """Factory function to create engine with optional config"""
    if config_path:
        config = ExperimentConfig.load_from_file(config_path)
    else:
        config = get_default_config()

    return ExperimentEngine(config)
