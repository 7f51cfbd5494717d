"""
Baseline Strategies

Comparators for the harvest-use-store power-splitting planners: time
switching relaying, harvest-store-use, battery-free harvest-use, single
relay selection and a fixed split ratio.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from husrelay.core.errors import ConfigurationError
from husrelay.core.performance import EvaluationCounter, TimerContext
from husrelay.channel.fading import ChannelTrace, make_rng
from husrelay.model.system import (
    SystemParams,
    BatteryState,
    EnergyVariation,
    Decision,
    PowerManagement,
    realize_slot,
    received_power,
)
from husrelay.solver.embedded import SolverSettings
from husrelay.planner.dynamic import PlanResult, backward_induction, run_greedy

logger = logging.getLogger(__name__)


class Strategy(Enum):
    """Strategy tags accepted in experiment configs"""
    OPTIMAL = "optimal"
    EXHAUSTIVE = "exhaustive"
    MARKOV = "markov"
    GREEDY = "greedy"
    TIME_SWITCHING = "time_switching"
    HARVEST_STORE_USE = "harvest_store_use"
    HARVEST_USE = "harvest_use"
    BEST_RELAY = "best_relay"
    RANDOM_RELAY = "random_relay"
    FIXED_RATIO = "fixed_ratio"


COMPARATOR_STRATEGIES = [
    Strategy.OPTIMAL,
    Strategy.TIME_SWITCHING,
    Strategy.HARVEST_STORE_USE,
    Strategy.HARVEST_USE,
    Strategy.BEST_RELAY,
    Strategy.RANDOM_RELAY,
]


@dataclass(frozen=True)
class ComparatorConfig:
    """Knobs of the baseline strategies"""
    strategy: Strategy = Strategy.TIME_SWITCHING
    tau_step: float = 0.01
    fixed_ratio_lambda: float = 0.5
    selection_seed: int = 0

    def __post_init__(self):
        if not 0 < self.tau_step < 1:
            raise ConfigurationError("comparators.tau_step", "must lie in (0, 1)")
        if not 0 <= self.fixed_ratio_lambda <= 1:
            raise ConfigurationError("comparators.fixed_ratio_lambda", "must lie in [0, 1]")

    @property
    def tau_grid(self) -> np.ndarray:
        """Interior grid of (0, 1)"""
        n = int(round(1.0 / self.tau_step))
        grid = np.arange(1, n) * self.tau_step
        return grid[(grid > 0) & (grid < 1)]


def time_switching_rates(h: np.ndarray, g: np.ndarray, params: SystemParams,
                         taus: np.ndarray) -> np.ndarray:
    """Rate of one slot for every tau; full information split, no battery"""
    rx = np.array([received_power(hk, params) for hk in h])
    taus = np.asarray(taus, dtype=float)[:, None]

    p_R = 2.0 * params.eta1 * taus * rx / (1.0 - taus)
    beta2 = p_R / (rx + params.sigma_b2)
    amplitude = np.sum(np.sqrt(beta2) * np.abs(h * g), axis=1)
    noise = np.sum(beta2 * np.abs(g) ** 2 * params.sigma_b2, axis=1) + params.sigma_D2
    snr = params.P * amplitude ** 2 / noise

    return (1.0 - taus[:, 0]) * 0.5 * np.log1p(snr) / np.log(params.log_base)


def _battery_free_result(decisions: List[Decision], payoffs: List[float], K: int,
                         counter: EvaluationCounter) -> PlanResult:
    empty = BatteryState.empty(K)
    return PlanResult(decisions=decisions, battery_trajectory=[empty] * (len(decisions) + 1),
                      per_slot_payoff=payoffs, solver_stats=counter.get_stats())


def run_time_switching(trace: ChannelTrace, params: SystemParams, cfg: ComparatorConfig) -> PlanResult:
    """Harvest for tau, then receive and forward in equal halves of 1 - tau"""
    counter = EvaluationCounter()
    taus = cfg.tau_grid
    decisions: List[Decision] = []
    payoffs: List[float] = []
    chosen: List[float] = []

    with TimerContext(counter, "time_switching"):
        for t in range(trace.T):
            rates = time_switching_rates(trace.h[t], trace.g[t], params, taus)
            best = int(np.argmax(rates))
            chosen.append(float(taus[best]))
            payoffs.append(float(rates[best]))
            decisions.append(Decision(EnergyVariation.zeros(params.K), tuple([1.0] * params.K)))
            counter.increment("tau_evaluations", len(taus))

    result = _battery_free_result(decisions, payoffs, params.K, counter)
    result.details["tau"] = chosen
    return result


def run_harvest_store_use(trace: ChannelTrace, params: SystemParams,
                          settings: Optional[SolverSettings] = None) -> PlanResult:
    """Optimal schedule when every harvested joule passes through the battery"""
    return backward_induction(trace, params, settings, mode=PowerManagement.HARVEST_STORE_USE)


def run_harvest_use(trace: ChannelTrace, params: SystemParams,
                    settings: Optional[SolverSettings] = None) -> PlanResult:
    """Battery-free harvest-use; the greedy policy never stores energy"""
    return run_greedy(trace, params, settings)


def select_relays(trace: ChannelTrace, mode: str, seed: int = 0) -> np.ndarray:
    """Relay index per slot: strongest composite gain, or uniform at random"""
    if mode == "best":
        return np.argmax(np.abs(trace.h * trace.g), axis=1)
    if mode == "random":
        return make_rng(seed).integers(0, trace.K, size=trace.T)
    raise ConfigurationError("relay_selection.mode", f"unknown mode '{mode}'")


def run_relay_selection(trace: ChannelTrace, params: SystemParams, mode: str,
                        settings: Optional[SolverSettings] = None,
                        cfg: Optional[ComparatorConfig] = None) -> PlanResult:
    """Joint optimization restricted to one relay per slot"""
    seed = cfg.selection_seed if cfg is not None else 0
    selected = select_relays(trace, mode, seed)
    reduced_params = replace(params, K=1)
    result = backward_induction(trace.select_relays(selected), reduced_params, settings)
    result.details["selected_relay"] = [int(k) for k in selected]
    return result


def run_fixed_ratio(trace: ChannelTrace, params: SystemParams, cfg: ComparatorConfig) -> PlanResult:
    """Constant split ratio at every relay, no battery use"""
    counter = EvaluationCounter()
    state = BatteryState.empty(params.K)
    decision = Decision(EnergyVariation.zeros(params.K), tuple([cfg.fixed_ratio_lambda] * params.K))
    payoffs = []
    outcomes = []

    for t in range(trace.T):
        outcome = realize_slot(state, decision, trace.slot(t), params)
        outcomes.append(outcome)
        payoffs.append(outcome.payoff)

    result = _battery_free_result([decision] * trace.T, payoffs, params.K, counter)
    result.outcomes = outcomes
    return result


def run_comparator(trace: ChannelTrace, params: SystemParams, cfg: ComparatorConfig,
                   settings: Optional[SolverSettings] = None) -> PlanResult:
    """Dispatch on cfg.strategy"""
    strategy = cfg.strategy
    if strategy is Strategy.TIME_SWITCHING:
        return run_time_switching(trace, params, cfg)
    if strategy is Strategy.FIXED_RATIO:
        return run_fixed_ratio(trace, params, cfg)
    if strategy is Strategy.HARVEST_STORE_USE:
        return run_harvest_store_use(trace, params, settings)
    if strategy is Strategy.HARVEST_USE:
        return run_harvest_use(trace, params, settings)
    if strategy is Strategy.BEST_RELAY:
        return run_relay_selection(trace, params, "best", settings, cfg)
    if strategy is Strategy.RANDOM_RELAY:
        return run_relay_selection(trace, params, "random", settings, cfg)
    raise ConfigurationError("comparators.strategy", f"'{strategy.value}' is not a baseline")


def min_slots_for_target(per_slot_payoff: Sequence[float], target: float) -> Optional[int]:
    """Fewest leading slots whose payoffs add up to the target; None if never"""
    if target <= 0:
        return 0
    cumulative = np.cumsum(np.asarray(per_slot_payoff, dtype=float))
    reached = np.nonzero(cumulative >= target)[0]
    if reached.size == 0:
        return None
    return int(reached[0]) + 1


def mean_delay(slot_counts: Sequence[Optional[int]], horizon: int) -> Tuple[float, float]:
    """(mean slots, fraction reached); a trial that never reaches the target counts as horizon + 1"""
    if not slot_counts:
        raise ValueError("mean_delay needs at least one trial")
    counts = np.array([horizon + 1 if c is None else c for c in slot_counts], dtype=float)
    reached = sum(1 for c in slot_counts if c is not None)
    return float(counts.mean()), reached / len(slot_counts)


def delay_comparison(trace: ChannelTrace, params: SystemParams, settings: Optional[SolverSettings],
                     cfg: ComparatorConfig, targets: Sequence[float]) -> Dict[str, List[Optional[int]]]:
    """Slots the harvest-use-store plan and time switching need for each bit target"""
    ps = backward_induction(trace, params, settings)
    ts = run_time_switching(trace, params, cfg)
    return {
        "power_splitting": [min_slots_for_target(ps.per_slot_payoff, x) for x in targets],
        "time_switching": [min_slots_for_target(ts.per_slot_payoff, x) for x in targets],
    }
