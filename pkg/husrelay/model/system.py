"""
System Model

Domain types and the closed-form physics of one time slot: power splitting,
battery charge/discharge on a discrete level grid, distributed beamforming
SNR and the half-duplex payoff.

All energies are slot-normalized, so power and energy are interchangeable.
Battery levels are integers 0..L; energy = level * step.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Sequence, List

import numpy as np

from husrelay.core.errors import (
    ConfigurationError,
    InfeasibleDecisionError,
    BatteryRangeError,
)

# Relative slack for comparisons that are exact in real arithmetic but not in floating point
FEASIBILITY_RTOL = 1e-12
LAMBDA_ATOL = 1e-9
GRID_EPS = 1e-9


class PowerManagement(Enum):
    """How harvested energy reaches the relay transmitter"""
    HARVEST_USE_STORE = "harvest_use_store"
    HARVEST_STORE_USE = "harvest_store_use"


@dataclass(frozen=True)
class BatteryGrid:
    """Discrete battery with L+1 levels {0, step, ..., b_max}"""
    b_max: float
    L: int

    @property
    def step(self) -> float:
        return self.b_max / self.L

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.L + 1) * self.step

    def energy(self, level: int) -> float:
        return level * self.step


@dataclass(frozen=True)
class SystemParams:
    """All scalar constants of the relay network model"""
    P: float
    K: int
    T: int
    L: int
    alpha: float = 1.0
    eta1: float = 0.4
    eta2: float = 0.8
    sigma_b2: float = 1.0
    sigma_D2: float = 1.0
    sigma_a2: float = 0.0
    m: int = 3
    log_base: float = 2.0

    def __post_init__(self):
        checks = [
            ("P", self.P > 0, "must be > 0"),
            ("K", self.K >= 1, "must be >= 1"),
            ("T", self.T >= 1, "must be >= 1"),
            ("L", self.L >= 1, "must be >= 1"),
            ("alpha", self.alpha > 0, "must be > 0"),
            ("eta1", 0 < self.eta1 <= 1, "must lie in (0, 1]"),
            ("eta2", 0 < self.eta2 <= 1, "must lie in (0, 1]"),
            ("sigma_b2", self.sigma_b2 > 0, "must be > 0"),
            ("sigma_D2", self.sigma_D2 > 0, "must be > 0"),
            ("sigma_a2", self.sigma_a2 == 0, "antenna noise is fixed to 0"),
            ("m", self.m >= 1, "must be >= 1"),
            ("log_base", self.log_base > 1, "must be > 1"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigurationError(f"system.{name}", message)

    @property
    def grid(self) -> BatteryGrid:
        return BatteryGrid(b_max=self.alpha * self.P, L=self.L)

    @property
    def n_battery_states(self) -> int:
        return (self.L + 1) ** self.K

    @staticmethod
    def from_section(section, P: float) -> "SystemParams":
        """Build from the config 'system' section plus a source power"""
        return SystemParams(
            P=P, K=section.K, T=section.T, L=section.L, alpha=section.alpha,
            eta1=section.eta1, eta2=section.eta2, sigma_b2=section.sigma_b2,
            sigma_D2=section.sigma_D2, sigma_a2=section.sigma_a2, m=section.m,
            log_base=section.log_base,
        )


@dataclass(frozen=True)
class BatteryState:
    """Battery level index of every relay"""
    levels: Tuple[int, ...]

    @staticmethod
    def empty(K: int) -> "BatteryState":
        return BatteryState(tuple([0] * K))

    def energy(self, grid: BatteryGrid) -> np.ndarray:
        return np.asarray(self.levels, dtype=float) * grid.step

    def index(self, L: int) -> int:
        """Flat index in the (L+1)^K state space"""
        return int(np.ravel_multi_index(self.levels, (L + 1,) * len(self.levels)))

    @staticmethod
    def from_index(index: int, K: int, L: int) -> "BatteryState":
        return BatteryState(tuple(int(i) for i in np.unravel_index(index, (L + 1,) * K)))


@dataclass(frozen=True)
class EnergyVariation:
    """Net level change per relay: positive discharges, negative charges"""
    v: Tuple[int, ...]

    @staticmethod
    def zeros(K: int) -> "EnergyVariation":
        return EnergyVariation(tuple([0] * K))

    def energy(self, grid: BatteryGrid) -> np.ndarray:
        return np.asarray(self.v, dtype=float) * grid.step


@dataclass(frozen=True)
class SplitRatios:
    """Information / forwarding / battery shares of the received power"""
    lambda_I: Tuple[float, ...]
    lambda_F: Tuple[float, ...]
    lambda_B: Tuple[float, ...]


@dataclass(frozen=True)
class Decision:
    """Energy level variation paired with the information split"""
    variation: EnergyVariation
    lambda_I: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SlotChannel:
    """Complex link gains of one slot"""
    h: np.ndarray
    g: np.ndarray

    @property
    def K(self) -> int:
        return len(self.h)

    @property
    def h_power(self) -> np.ndarray:
        return np.abs(self.h) ** 2

    @property
    def g_power(self) -> np.ndarray:
        return np.abs(self.g) ** 2


@dataclass(frozen=True)
class SlotOutcome:
    """Everything that happens at the relays during one slot"""
    next_state: BatteryState
    splits: SplitRatios
    relay_power: Tuple[float, ...]
    charged_levels: Tuple[int, ...]
    discharged_levels: Tuple[int, ...]
    snr: float
    payoff: float


def beamforming_phase(h_k: complex, g_k: complex) -> float:
    """Phase rotation that makes the composite gain real and nonnegative"""
    if h_k == 0 or g_k == 0:
        return 0.0
    return -(float(np.angle(h_k)) + float(np.angle(g_k)))


def received_power(h_k: complex, params: SystemParams) -> float:
    return params.P * abs(h_k) ** 2 + params.sigma_a2


def charge_cap(h_k: complex, params: SystemParams) -> float:
    """Largest energy one slot of harvesting can put into the battery"""
    return params.eta1 * params.eta2 * received_power(h_k, params)


def max_charge_levels(h_k: complex, params: SystemParams) -> int:
    """Largest charge, in grid steps, that the harvest cap allows"""
    n = math.floor(charge_cap(h_k, params) / params.grid.step * (1 + FEASIBILITY_RTOL) + GRID_EPS)
    return min(max(n, 0), params.L)


def charge_quantize(headroom_levels: int, gross_stored_power: float,
                    grid: BatteryGrid, eta2: float) -> int:
    """Levels actually charged from a gross stored power"""
    n = math.floor(eta2 * gross_stored_power / grid.step + GRID_EPS)
    return max(0, min(headroom_levels, n))


def _charge_exceeds_cap(charge: float, cap: float) -> bool:
    return charge > cap * (1 + FEASIBILITY_RTOL) + GRID_EPS * FEASIBILITY_RTOL


def split_from_variation(v_k: float, h_k: complex, params: SystemParams) -> Tuple[float, float]:
    """Discharged energy and battery split ratio implied by a variation (energy units)"""
    b_discharge = max(0.0, v_k)
    if v_k >= 0:
        return b_discharge, 0.0

    cap = charge_cap(h_k, params)
    if cap <= 0 or _charge_exceeds_cap(-v_k, cap):
        raise InfeasibleDecisionError(
            f"charge {-v_k:.6g} exceeds harvestable {cap:.6g}"
        )
    return b_discharge, min(1.0, -v_k / cap)


def lambda_upper(v_k: float, h_k: complex, params: SystemParams) -> float:
    """Upper bound of lambda_I once the charge is reserved"""
    _, lambda_B = split_from_variation(v_k, h_k, params)
    return 1.0 - lambda_B


def relay_transmit_power(lambda_I_k: float, v_k: float, h_k: complex, params: SystemParams,
                         mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> float:
    """Transmit power of one relay for a split and a variation (energy units)"""
    harvested = params.eta1 * (1.0 - lambda_I_k) * received_power(h_k, params)
    if mode is PowerManagement.HARVEST_STORE_USE:
        p_R = params.eta2 * harvested + v_k
    else:
        p_R = harvested + min(0.0, v_k / params.eta2) + max(0.0, v_k)

    scale = harvested + abs(v_k)
    if p_R < -FEASIBILITY_RTOL * max(1.0, scale) - GRID_EPS * FEASIBILITY_RTOL:
        raise InfeasibleDecisionError(
            f"negative relay power {p_R:.6g} (lambda_I={lambda_I_k:.6g}, v={v_k:.6g})"
        )
    return max(0.0, p_R)


def amplification_gain(lambda_I_k: float, p_R_k: float, h_k: complex, params: SystemParams) -> float:
    """Amplify-and-forward gain beta"""
    denominator = lambda_I_k * received_power(h_k, params) + params.sigma_b2
    return math.sqrt(p_R_k / denominator)


def rate_from_snr(snr: float, params: SystemParams) -> float:
    """Half-duplex throughput of one slot"""
    return 0.5 * math.log1p(snr) / math.log(params.log_base)


def _check_lambda(lambda_I_k: float, v_k: float, h_k: complex, params: SystemParams, k: int) -> None:
    upper = lambda_upper(v_k, h_k, params)
    if lambda_I_k < -LAMBDA_ATOL or lambda_I_k > upper + LAMBDA_ATOL:
        raise InfeasibleDecisionError(
            f"relay {k}: lambda_I={lambda_I_k:.6g} outside [0, {upper:.6g}]"
        )


def slot_snr(ch: SlotChannel, decision: Decision, params: SystemParams,
             mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> float:
    """Received SNR at the destination with distributed beamforming"""
    v_energy = decision.variation.energy(params.grid)
    amplitude_sum = 0.0
    noise = params.sigma_D2

    for k in range(ch.K):
        h_k, g_k = ch.h[k], ch.g[k]
        lam = min(max(decision.lambda_I[k], 0.0), 1.0)
        _check_lambda(decision.lambda_I[k], v_energy[k], h_k, params, k)

        p_R = relay_transmit_power(lam, v_energy[k], h_k, params, mode)
        beta = amplification_gain(lam, p_R, h_k, params)
        amplitude_sum += beta * abs(h_k * g_k) * math.sqrt(lam)
        noise += beta ** 2 * abs(g_k) ** 2 * params.sigma_b2

    return params.P * amplitude_sum ** 2 / noise


def payoff(ch: SlotChannel, decision: Decision, params: SystemParams,
           mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> float:
    """Throughput of one slot in bits per channel use (for log_base 2)"""
    return rate_from_snr(slot_snr(ch, decision, params, mode), params)


def battery_step(state: BatteryState, v: EnergyVariation, params: SystemParams) -> BatteryState:
    """Next battery state: S(t+1) = S(t) - v(t)"""
    if len(state.levels) != len(v.v):
        raise BatteryRangeError(f"state has {len(state.levels)} relays, variation has {len(v.v)}")

    nxt = tuple(level - dv for level, dv in zip(state.levels, v.v))
    for k, level in enumerate(nxt):
        if level < 0 or level > params.L:
            raise BatteryRangeError(
                f"relay {k}: level {state.levels[k]} - {v.v[k]} leaves [0, {params.L}]"
            )
    return BatteryState(nxt)


def variation_bounds(level: int, L: int) -> Tuple[int, int]:
    """Range of v that keeps one relay on its battery grid"""
    return level - L, level


def decision_feasible(state: BatteryState, v: EnergyVariation, ch: SlotChannel,
                      params: SystemParams) -> bool:
    """True iff v is on the grid, keeps every battery in range and respects the charge cap"""
    if len(v.v) != len(state.levels) or len(v.v) != ch.K:
        return False

    step = params.grid.step
    for k, (level, dv) in enumerate(zip(state.levels, v.v)):
        if int(dv) != dv:
            return False
        lo, hi = variation_bounds(level, params.L)
        if dv < lo or dv > hi:
            return False
        if dv < 0:
            cap = charge_cap(ch.h[k], params)
            if cap <= 0 or _charge_exceeds_cap(-dv * step, cap):
                return False
    return True


def feasible_variations(state: BatteryState, ch: SlotChannel, params: SystemParams) -> List[Tuple[int, ...]]:
    """All feasible variation vectors for a state, in lexicographic order"""
    per_relay: List[Sequence[int]] = []
    for k, level in enumerate(state.levels):
        lo, hi = variation_bounds(level, params.L)
        lo = max(lo, -max_charge_levels(ch.h[k], params))
        per_relay.append(range(lo, hi + 1))

    grids = np.meshgrid(*per_relay, indexing='ij')
    stacked = np.stack([g.ravel() for g in grids], axis=1)
    return [tuple(int(x) for x in row) for row in stacked]


def realize_slot(state: BatteryState, decision: Decision, ch: SlotChannel, params: SystemParams,
                 mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> SlotOutcome:
    """Apply a decision: split ratios, battery mechanics, SNR and payoff"""
    grid = params.grid
    v_energy = decision.variation.energy(grid)

    lambda_F: List[float] = []
    lambda_B: List[float] = []
    relay_power: List[float] = []
    charged: List[int] = []
    discharged: List[int] = []

    for k in range(ch.K):
        lam = decision.lambda_I[k]
        _check_lambda(lam, v_energy[k], ch.h[k], params, k)
        _, lam_B = split_from_variation(v_energy[k], ch.h[k], params)
        lambda_B.append(lam_B)
        lambda_F.append(max(0.0, 1.0 - lam - lam_B))
        relay_power.append(relay_transmit_power(lam, v_energy[k], ch.h[k], params, mode))

        headroom = params.L - state.levels[k]
        gross = params.eta1 * lam_B * received_power(ch.h[k], params)
        n_charged = charge_quantize(headroom, gross, grid, params.eta2)
        if n_charged != max(0, -decision.variation.v[k]):
            raise InfeasibleDecisionError(
                f"relay {k}: stored {n_charged} levels, variation asks {-decision.variation.v[k]}"
            )
        charged.append(n_charged)
        discharged.append(max(0, decision.variation.v[k]))

    snr = slot_snr(ch, decision, params, mode)
    return SlotOutcome(
        next_state=battery_step(state, decision.variation, params),
        splits=SplitRatios(tuple(decision.lambda_I), tuple(lambda_F), tuple(lambda_B)),
        relay_power=tuple(relay_power),
        charged_levels=tuple(charged),
        discharged_levels=tuple(discharged),
        snr=snr,
        payoff=rate_from_snr(snr, params),
    )
