"""
Trace Planners

Battery schedules over a known channel trace:

- exhaustive_search: enumerates every feasible variation sequence (oracle)
- backward_induction: Bellman recursion over the (L+1)^K battery states
- run_greedy: never touches the battery, v = 0 in every slot

Once v is fixed the slot payoff does not depend on the battery state, so
embedded optima are memoized per (slot, v). "embedded_evaluations" counts
payoff consumptions, "embedded_solves" counts actual solver runs.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Any

import numpy as np

from husrelay.core.errors import PlanSizeError
from husrelay.core.performance import EvaluationCounter, TimerContext
from husrelay.channel.fading import ChannelTrace
from husrelay.model.system import (
    SystemParams,
    BatteryState,
    EnergyVariation,
    Decision,
    SlotOutcome,
    PowerManagement,
    battery_step,
    feasible_variations,
    rate_from_snr,
    realize_slot,
)
from husrelay.solver.embedded import SolverSettings, EmbeddedSolution, solve_embedded

logger = logging.getLogger(__name__)

DEFAULT_MAX_SEQUENCES = 10_000_000


@dataclass
class PlanResult:
    """A realized T-slot schedule"""
    decisions: List[Decision]
    battery_trajectory: List[BatteryState]
    per_slot_payoff: List[float]
    solver_stats: Dict[str, Any] = field(default_factory=dict)
    outcomes: List[SlotOutcome] = field(default_factory=list)
    details: Dict[str, list] = field(default_factory=dict)

    @property
    def r_total(self) -> float:
        return math.fsum(self.per_slot_payoff)

    @property
    def variations(self) -> List[Tuple[int, ...]]:
        return [d.variation.v for d in self.decisions]


class SlotPayoffCache:
    """Embedded optima of one trace, keyed by (slot, variation)"""

    def __init__(self, trace: ChannelTrace, params: SystemParams, settings: SolverSettings,
                 counter: EvaluationCounter,
                 mode: PowerManagement = PowerManagement.HARVEST_USE_STORE):
        self.trace = trace
        self.params = params
        self.settings = settings
        self.counter = counter
        self.mode = mode
        self._solutions: Dict[Tuple[int, Tuple[int, ...]], EmbeddedSolution] = {}

    def solution(self, t: int, v: Tuple[int, ...]) -> EmbeddedSolution:
        key = (t, v)
        cached = self._solutions.get(key)
        if cached is None:
            cached = solve_embedded(EnergyVariation(v), self.trace.slot(t), self.params,
                                    self.settings, self.mode)
            self._solutions[key] = cached
            self.counter.increment("embedded_solves")
            self.counter.increment("dinkelbach_iterations", cached.dinkelbach_iterations)
            self.counter.increment("alternating_sweeps", cached.iterations)
        return cached

    def payoff(self, t: int, v: Tuple[int, ...]) -> float:
        self.counter.increment("embedded_evaluations")
        return rate_from_snr(self.solution(t, v).snr, self.params)


def realize_plan(trace: ChannelTrace, variations: List[Tuple[int, ...]], cache: SlotPayoffCache,
                 params: SystemParams, counter: EvaluationCounter) -> PlanResult:
    """Walk a variation sequence from empty batteries and record every slot"""
    state = BatteryState.empty(params.K)
    decisions: List[Decision] = []
    trajectory = [state]
    payoffs: List[float] = []
    outcomes: List[SlotOutcome] = []

    for t, v in enumerate(variations):
        sol = cache.solution(t, v)
        decision = Decision(EnergyVariation(v), sol.lambda_I)
        outcome = realize_slot(state, decision, trace.slot(t), params, cache.mode)
        state = outcome.next_state

        decisions.append(decision)
        trajectory.append(state)
        payoffs.append(rate_from_snr(sol.snr, params))
        outcomes.append(outcome)

    return PlanResult(decisions=decisions, battery_trajectory=trajectory, per_slot_payoff=payoffs,
                      solver_stats=counter.get_stats(), outcomes=outcomes)


def _state_variations(t: int, state: BatteryState, trace: ChannelTrace,
                      params: SystemParams, drain_last_slot: bool = True) -> List[Tuple[int, ...]]:
    """Candidate variations; the last slot drains every battery unless told otherwise"""
    if drain_last_slot and t == trace.T - 1:
        return [state.levels]
    return feasible_variations(state, trace.slot(t), params)


def backward_induction(trace: ChannelTrace, params: SystemParams,
                       settings: Optional[SolverSettings] = None,
                       mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> PlanResult:
    """Optimal schedule with the whole trace known in advance"""
    settings = settings or SolverSettings()
    counter = EvaluationCounter()
    cache = SlotPayoffCache(trace, params, settings, counter, mode)

    T, K, L = trace.T, params.K, params.L
    n_states = params.n_battery_states
    states = [BatteryState.from_index(s, K, L) for s in range(n_states)]

    value = np.zeros((T + 1, n_states))
    policy: List[List[Tuple[int, ...]]] = [[()] * n_states for _ in range(T)]

    with TimerContext(counter, "backward_induction"):
        for t in range(T - 1, -1, -1):
            for s, state in enumerate(states):
                best_value = -math.inf
                best_v: Tuple[int, ...] = ()
                for v in _state_variations(t, state, trace, params):
                    nxt = battery_step(state, EnergyVariation(v), params).index(L)
                    candidate = cache.payoff(t, v) + value[t + 1, nxt]
                    if candidate > best_value:
                        best_value, best_v = candidate, v
                value[t, s] = best_value
                policy[t][s] = best_v
            logger.debug(f"Backward induction slot {t}: U*(0) = {value[t, 0]:.6f}")

    state = BatteryState.empty(K)
    path: List[Tuple[int, ...]] = []
    for t in range(T):
        v = policy[t][state.index(L)]
        path.append(v)
        state = battery_step(state, EnergyVariation(v), params)

    result = realize_plan(trace, path, cache, params, counter)
    result.details["value"] = [float(value[0, 0])]
    return result


def exhaustive_search(trace: ChannelTrace, params: SystemParams,
                      settings: Optional[SolverSettings] = None,
                      max_sequences: int = DEFAULT_MAX_SEQUENCES,
                      mode: PowerManagement = PowerManagement.HARVEST_USE_STORE,
                      drain_last_slot: bool = True) -> PlanResult:
    """Best variation sequence by full enumeration.

    With drain_last_slot=False the last slot may keep or even charge energy,
    so the enumeration also covers plans that leave batteries non-empty.
    """
    T, K, L = trace.T, params.K, params.L
    bound = (2 * L + 1) ** (K * T)
    if bound > max_sequences:
        raise PlanSizeError("exhaustive search", bound, max_sequences)

    settings = settings or SolverSettings()
    counter = EvaluationCounter()
    cache = SlotPayoffCache(trace, params, settings, counter, mode)

    best_total = -math.inf
    best_path: List[Tuple[int, ...]] = []
    path: List[Tuple[int, ...]] = []
    sequences = 0

    def descend(t: int, state: BatteryState) -> None:
        nonlocal best_total, best_path, sequences
        if t == T:
            sequences += 1
            total = sum(cache.payoff(slot, v) for slot, v in enumerate(path))
            if total > best_total:
                best_total, best_path = total, list(path)
            return
        for v in _state_variations(t, state, trace, params, drain_last_slot):
            path.append(v)
            descend(t + 1, battery_step(state, EnergyVariation(v), params))
            path.pop()

    with TimerContext(counter, "exhaustive_search"):
        descend(0, BatteryState.empty(K))

    counter.increment("sequences", sequences)
    logger.debug(f"Exhaustive search enumerated {sequences} sequences (bound {bound})")
    return realize_plan(trace, best_path, cache, params, counter)


def run_greedy(trace: ChannelTrace, params: SystemParams,
               settings: Optional[SolverSettings] = None) -> PlanResult:
    """Harvest and spend in the same slot; batteries stay empty"""
    settings = settings or SolverSettings()
    counter = EvaluationCounter()
    cache = SlotPayoffCache(trace, params, settings, counter)

    zero = EnergyVariation.zeros(params.K).v
    with TimerContext(counter, "greedy"):
        for t in range(trace.T):
            cache.payoff(t, zero)

    return realize_plan(trace, [zero] * trace.T, cache, params, counter)
