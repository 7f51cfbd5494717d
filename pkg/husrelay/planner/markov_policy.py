"""
Markov Lookup-Table Policy

Offline: a Bellman recursion over (slot, battery state, quantized channel
state) using representative gains and a uniform expectation over the next
channel state. Online: quantize the true gains, look up v, then re-optimize
the information split with the true gains.
"""

import hashlib
import json
import math
import logging
from dataclasses import dataclass, asdict
from typing import Dict, Optional, Tuple

import numpy as np

from husrelay.core.errors import PlanSizeError, TableMismatchError
from husrelay.core.performance import EvaluationCounter, TimerContext
from husrelay.channel.fading import ChannelTrace
from husrelay.channel.markov import ChannelQuantizer
from husrelay.model.system import (
    SystemParams,
    BatteryState,
    EnergyVariation,
    PowerManagement,
    battery_step,
    feasible_variations,
    max_charge_levels,
    rate_from_snr,
)
from husrelay.solver.embedded import SolverSettings, EmbeddedSolution, solve_embedded
from husrelay.planner.dynamic import PlanResult, SlotPayoffCache, realize_plan

logger = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1
DEFAULT_MAX_ENTRIES = 5_000_000


def params_hash(params: SystemParams, quantizer: ChannelQuantizer,
                settings: SolverSettings) -> str:
    """SHA-256 over the canonical JSON of everything a table depends on"""
    solver = asdict(settings)
    solver.pop("record_trace", None)
    payload = {
        "system": asdict(params),
        "quantizer": {
            "m": quantizer.m,
            "K": quantizer.K,
            "mean_sr": quantizer.source.mean_power,
            "mean_rd": quantizer.relay.mean_power,
        },
        "solver": solver,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(eq=False)
class PolicyTable:
    """Best variation and expected payoff sum per (slot, battery state, channel state)"""
    v_star: np.ndarray
    u_star: np.ndarray
    params_hash: str
    K: int
    L: int
    m: int

    @property
    def T(self) -> int:
        return self.u_star.shape[0]

    @property
    def entry_count(self) -> int:
        return int(self.u_star.size)

    def lookup(self, t: int, state: BatteryState, channel_index: int) -> EnergyVariation:
        return EnergyVariation(tuple(int(x) for x in self.v_star[t, state.index(self.L), channel_index]))

    def expected_value(self, t: int, state: BatteryState) -> float:
        """U averaged over the channel states of slot t"""
        return float(self.u_star[t, state.index(self.L)].mean())

    def to_dict(self) -> Dict:
        return {
            "format_version": TABLE_FORMAT_VERSION,
            "params_hash": self.params_hash,
            "T": self.T,
            "K": self.K,
            "L": self.L,
            "m": self.m,
            "v_star": self.v_star.tolist(),
            "u_star": self.u_star.tolist(),
        }

    def save(self, path: str) -> None:
        """Canonical JSON; identical tables give identical bytes"""
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, sort_keys=True, separators=(",", ":"))
        logger.info(f"Policy table with {self.entry_count} entries saved to {path}")


def load_table(path: str, expected_hash: Optional[str] = None) -> PolicyTable:
    """Load a persisted table, refusing one built for other parameters"""
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)

    version = data.get("format_version")
    if version != TABLE_FORMAT_VERSION:
        raise TableMismatchError(f"unsupported table format {version}",
                                 str(TABLE_FORMAT_VERSION), str(version))
    if expected_hash is not None and data["params_hash"] != expected_hash:
        raise TableMismatchError("policy table was built for different parameters",
                                 expected_hash, data["params_hash"])

    v_star = np.asarray(data["v_star"], dtype=np.int64)
    u_star = np.asarray(data["u_star"], dtype=float)
    T, K, L, m = data["T"], data["K"], data["L"], data["m"]
    expected_shape = (T, (L + 1) ** K, m ** (2 * K))
    if u_star.shape != expected_shape or v_star.shape != expected_shape + (K,):
        raise TableMismatchError(f"table arrays do not match shape {expected_shape}")

    return PolicyTable(v_star=v_star, u_star=u_star, params_hash=data["params_hash"], K=K, L=L, m=m)


class _StatePayoffCache:
    """Embedded optima keyed by (channel state, variation); shared by every slot"""

    def __init__(self, quantizer: ChannelQuantizer, params: SystemParams, settings: SolverSettings,
                 counter: EvaluationCounter, mode: PowerManagement):
        self.quantizer = quantizer
        self.params = params
        self.settings = settings
        self.counter = counter
        self.mode = mode
        self._payoffs: Dict[Tuple[int, Tuple[int, ...]], float] = {}

    def payoff(self, channel_flat: int, channel, v: Tuple[int, ...]) -> float:
        self.counter.increment("embedded_evaluations")
        key = (channel_flat, v)
        cached = self._payoffs.get(key)
        if cached is None:
            sol: EmbeddedSolution = solve_embedded(EnergyVariation(v), channel, self.params,
                                                   self.settings, self.mode)
            cached = rate_from_snr(sol.snr, self.params)
            self._payoffs[key] = cached
            self.counter.increment("embedded_solves")
            self.counter.increment("dinkelbach_iterations", sol.dinkelbach_iterations)
        return cached


def build_lookup_table(quantizer: ChannelQuantizer, params: SystemParams,
                       settings: Optional[SolverSettings] = None,
                       max_entries: int = DEFAULT_MAX_ENTRIES,
                       mode: PowerManagement = PowerManagement.HARVEST_USE_STORE,
                       counter: Optional[EvaluationCounter] = None) -> PolicyTable:
    """Expected-payoff dynamic program over quantized channel states"""
    settings = settings or SolverSettings()
    counter = counter or EvaluationCounter()

    T, K, L = params.T, params.K, params.L
    n_states = params.n_battery_states
    n_channels = quantizer.n_states
    entries = T * n_states * n_channels
    if entries > max_entries:
        raise PlanSizeError("lookup table", entries, max_entries)

    logger.info(f"Building lookup table: T={T}, {n_states} battery states, "
                f"{n_channels} channel states ({entries} entries)")

    cache = _StatePayoffCache(quantizer, params, settings, counter, mode)
    states = [BatteryState.from_index(s, K, L) for s in range(n_states)]
    channels = [quantizer.representative_channel(c) for c in quantizer.all_states()]

    v_star = np.zeros((T, n_states, n_channels, K), dtype=np.int64)
    u_star = np.zeros((T, n_states, n_channels))
    expected_next = np.zeros(n_states)

    with TimerContext(counter, "build_lookup_table"):
        for t in range(T - 1, -1, -1):
            for c, channel in enumerate(channels):
                for s, state in enumerate(states):
                    if t == T - 1:
                        candidates = [state.levels]
                    else:
                        candidates = feasible_variations(state, channel, params)

                    best_value = -math.inf
                    best_v = state.levels
                    for v in candidates:
                        nxt = battery_step(state, EnergyVariation(v), params).index(L)
                        value = cache.payoff(c, channel, v) + expected_next[nxt]
                        if value > best_value:
                            best_value, best_v = value, v
                    u_star[t, s, c] = best_value
                    v_star[t, s, c] = best_v

            expected_next = u_star[t].mean(axis=1)
            logger.debug(f"Lookup table slot {t} done, E[U](0) = {expected_next[0]:.6f}")

    return PolicyTable(v_star=v_star, u_star=u_star,
                       params_hash=params_hash(params, quantizer, settings), K=K, L=L, m=quantizer.m)


def _clamp_charge(v: EnergyVariation, trace: ChannelTrace, t: int, params: SystemParams) -> Tuple[int, ...]:
    """Limit each charge to what the true gain can harvest"""
    h = trace.h[t]
    clamped = []
    for k, dv in enumerate(v.v):
        if dv < 0:
            dv = max(dv, -max_charge_levels(h[k], params))
        clamped.append(int(dv))
    return tuple(clamped)


def run_online_markov(trace: ChannelTrace, table: PolicyTable, params: SystemParams,
                      quantizer: ChannelQuantizer, settings: Optional[SolverSettings] = None,
                      mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> PlanResult:
    """Follow the table on the true channel, re-solving the split with exact gains"""
    settings = settings or SolverSettings()
    expected = params_hash(params, quantizer, settings)
    if table.params_hash != expected:
        raise TableMismatchError("policy table was built for different parameters",
                                 expected, table.params_hash)
    if table.T != trace.T or table.K != trace.K:
        raise TableMismatchError(f"table is {table.T}x{table.K}, trace is {trace.T}x{trace.K}")

    counter = EvaluationCounter()
    cache = SlotPayoffCache(trace, params, settings, counter, mode)

    state = BatteryState.empty(params.K)
    path = []
    clamps = 0
    with TimerContext(counter, "online_markov"):
        for t in range(trace.T):
            channel_index = quantizer.channel_state(trace.slot(t))
            looked_up = table.lookup(t, state, channel_index.flat)
            v = _clamp_charge(looked_up, trace, t, params)
            if v != looked_up.v:
                clamps += 1
            cache.payoff(t, v)
            path.append(v)
            state = battery_step(state, EnergyVariation(v), params)

    counter.increment("charge_clamps", clamps)
    return realize_plan(trace, path, cache, params, counter)
