"""
Embedded SNR Solver

Maximizes the destination SNR of one slot over the information split ratios
with the battery variation held fixed. The problem is rewritten in the
variable x_k = lambda_I,k * P|h_k|^2 + sigma_b^2, each coordinate is solved
as a fractional program by the Dinkelbach transform, and the coordinates are
swept cyclically until the objective stops improving.

Each Dinkelbach step maximizes the concave function F1 - q*F2 on a closed
interval by bisection on the sign of its derivative.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from husrelay.core.errors import SolverError
from husrelay.model.system import (
    SystemParams,
    SlotChannel,
    EnergyVariation,
    PowerManagement,
    lambda_upper,
    received_power,
)

logger = logging.getLogger(__name__)

# Bisection starts this fraction of the interval inside each endpoint
ENDPOINT_NUDGE = 1e-12
BOUNDS_RTOL = 1e-9


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and iteration caps of the alternating-Dinkelbach solver"""
    dinkelbach_tol: float = 1e-8
    alternating_tol: float = 1e-8
    bisection_tol: float = 1e-10
    max_dinkelbach_iters: int = 50
    max_alternating_iters: int = 50
    record_trace: bool = False

    @staticmethod
    def from_section(section, record_trace: bool = False) -> "SolverSettings":
        return SolverSettings(
            dinkelbach_tol=section.dinkelbach_tol,
            alternating_tol=section.alternating_tol,
            bisection_tol=section.bisection_tol,
            max_dinkelbach_iters=section.max_dinkelbach_iters,
            max_alternating_iters=section.max_alternating_iters,
            record_trace=record_trace,
        )


@dataclass(frozen=True, eq=False)
class EmbeddedContext:
    """Per-slot constants of the embedded problem in x coordinates"""
    a: np.ndarray
    x_hi: np.ndarray
    x_lo: float
    gains: np.ndarray
    sigma_b2: float
    sigma_D2: float
    rx_power: np.ndarray
    lambda_hi: np.ndarray

    @property
    def K(self) -> int:
        return len(self.a)


@dataclass
class DinkelbachResult:
    x: float
    q: float
    iterations: int
    converged: bool
    trace: List[Tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class IterationRecord:
    """One Dinkelbach iteration inside one coordinate update"""
    sweep: int
    relay: int
    iteration: int
    q: float
    F: float
    J: float


@dataclass
class EmbeddedSolution:
    """Optimal information split of one slot"""
    lambda_I: Tuple[float, ...]
    snr: float
    iterations: int
    dinkelbach_iterations: int
    converged: bool
    x: Optional[np.ndarray] = None
    trace: List[IterationRecord] = field(default_factory=list)


def build_context(v: EnergyVariation, ch: SlotChannel, params: SystemParams,
                  mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> EmbeddedContext:
    """Translate a variation and a channel into x-space constants.

    Raises InfeasibleDecisionError when a charge exceeds the harvest cap.
    """
    v_energy = v.energy(params.grid)
    sigma = params.sigma_b2
    K = ch.K

    a = np.empty(K)
    x_hi = np.empty(K)
    gains = np.empty(K)
    rx = np.empty(K)
    lam_hi = np.empty(K)

    for k in range(K):
        rx[k] = received_power(ch.h[k], params)
        lam_hi[k] = lambda_upper(v_energy[k], ch.h[k], params)
        x_hi[k] = lam_hi[k] * rx[k] + sigma
        g_power = abs(ch.g[k]) ** 2
        if mode is PowerManagement.HARVEST_STORE_USE:
            a[k] = rx[k] + sigma + v_energy[k] / (params.eta1 * params.eta2)
            gains[k] = params.eta1 * params.eta2 * g_power
        else:
            a[k] = (rx[k] + sigma + max(0.0, v_energy[k]) / params.eta1
                    + min(0.0, v_energy[k]) / (params.eta1 * params.eta2))
            gains[k] = params.eta1 * g_power

    # p_R = gain * (a - x) must stay nonnegative on the whole box
    a = np.maximum(a, x_hi)

    return EmbeddedContext(
        a=a, x_hi=x_hi, x_lo=sigma, gains=gains, sigma_b2=sigma,
        sigma_D2=params.sigma_D2, rx_power=rx, lambda_hi=lam_hi,
    )


def _numerator_terms(x: np.ndarray, ctx: EmbeddedContext) -> np.ndarray:
    terms = ctx.gains * (ctx.a - x) * (1.0 - ctx.sigma_b2 / x)
    return np.maximum(terms, 0.0)


def _noise_terms(x: np.ndarray, ctx: EmbeddedContext) -> np.ndarray:
    return ctx.gains * np.maximum(ctx.a - x, 0.0) * ctx.sigma_b2 / x


def fractional_parts(x: np.ndarray, ctx: EmbeddedContext) -> Tuple[float, float]:
    """(F1, F2) with J = F1 / F2"""
    f1 = float(np.sum(np.sqrt(_numerator_terms(x, ctx)))) ** 2
    f2 = float(np.sum(_noise_terms(x, ctx))) + ctx.sigma_D2
    return f1, f2


def _check_bounds(x: np.ndarray, ctx: EmbeddedContext) -> None:
    slack = BOUNDS_RTOL * np.maximum(1.0, ctx.x_hi)
    if np.any(x < ctx.x_lo - slack) or np.any(x > ctx.x_hi + slack):
        raise SolverError(f"x={x.tolist()} outside [{ctx.x_lo}, {ctx.x_hi.tolist()}]")


def objective_j(x, ctx: EmbeddedContext) -> float:
    """Destination SNR expressed in x coordinates"""
    x = np.asarray(x, dtype=float)
    _check_bounds(x, ctx)
    f1, f2 = fractional_parts(x, ctx)
    return f1 / f2


def _p4_slope(xj: float, j: int, q: float, others_sum: float, ctx: EmbeddedContext) -> float:
    """Derivative of F1 - q*F2 in coordinate j"""
    c, a, sigma = ctx.gains[j], ctx.a[j], ctx.sigma_b2
    n = c * (a + sigma - xj - a * sigma / xj)
    dn = c * (a * sigma / xj ** 2 - 1.0)
    dd = -c * a * sigma / xj ** 2

    if others_sum <= 0.0:
        scale = 1.0
    elif n <= 0.0:
        if dn == 0.0:
            return -q * dd
        return math.copysign(math.inf, dn)
    else:
        scale = 1.0 + others_sum / math.sqrt(n)
    return dn * scale - q * dd


def solve_p4(q: float, j: int, x_fixed: np.ndarray, ctx: EmbeddedContext,
             settings: SolverSettings) -> float:
    """Maximize F1(x_j) - q*F2(x_j) over [x_lo, x_hi_j] by derivative bisection"""
    lo, hi = ctx.x_lo, float(ctx.x_hi[j])
    if hi - lo <= 0.0:
        return lo

    terms = np.sqrt(_numerator_terms(np.asarray(x_fixed, dtype=float), ctx))
    others_sum = float(np.sum(terms) - terms[j])

    nudge = ENDPOINT_NUDGE * (hi - lo)
    if _p4_slope(lo + nudge, j, q, others_sum, ctx) <= 0.0:
        return lo
    if _p4_slope(hi - nudge, j, q, others_sum, ctx) >= 0.0:
        return hi

    left, right = lo + nudge, hi - nudge
    while right - left > settings.bisection_tol:
        mid = 0.5 * (left + right)
        if _p4_slope(mid, j, q, others_sum, ctx) > 0.0:
            left = mid
        else:
            right = mid
    return 0.5 * (left + right)


def dinkelbach(j: int, x_fixed: np.ndarray, ctx: EmbeddedContext,
               settings: SolverSettings) -> DinkelbachResult:
    """Maximize J over coordinate j with the others fixed"""
    x = np.array(x_fixed, dtype=float)
    q = 0.0
    trace: List[Tuple[float, float]] = []
    converged = False

    for _ in range(settings.max_dinkelbach_iters):
        x[j] = solve_p4(q, j, x, ctx, settings)
        f1, f2 = fractional_parts(x, ctx)
        f = f1 - q * f2
        trace.append((q, f))
        if f < settings.dinkelbach_tol:
            converged = True
            break
        q = f1 / f2

    if not converged:
        logger.warning(f"Dinkelbach on relay {j} stopped after {len(trace)} iterations")

    f1, f2 = fractional_parts(x, ctx)
    return DinkelbachResult(x=float(x[j]), q=f1 / f2, iterations=len(trace),
                            converged=converged, trace=trace)


def _lambda_from_x(x: np.ndarray, ctx: EmbeddedContext) -> Tuple[float, ...]:
    lambdas = []
    for k in range(ctx.K):
        if ctx.rx_power[k] <= 0.0:
            lambdas.append(0.0)
            continue
        lam = (x[k] - ctx.sigma_b2) / ctx.rx_power[k]
        lambdas.append(float(min(max(lam, 0.0), ctx.lambda_hi[k])))
    return tuple(lambdas)


def solve_context(ctx: EmbeddedContext, settings: Optional[SolverSettings] = None) -> EmbeddedSolution:
    """Cyclic coordinate ascent over the relays"""
    settings = settings or SolverSettings()
    x = np.full(ctx.K, ctx.x_lo)
    J = objective_j(x, ctx)

    active = [k for k in range(ctx.K) if ctx.gains[k] > 0.0 and ctx.x_hi[k] > ctx.x_lo]
    trace: List[IterationRecord] = []
    dinkelbach_iterations = 0
    sweeps = 0
    converged = not active

    if active:
        for sweeps in range(1, settings.max_alternating_iters + 1):
            j_before = J
            for j in active:
                result = dinkelbach(j, x, ctx, settings)
                dinkelbach_iterations += result.iterations

                candidate = x.copy()
                candidate[j] = result.x
                j_candidate = objective_j(candidate, ctx)
                if j_candidate >= J:
                    x, J = candidate, j_candidate

                if settings.record_trace:
                    for n, (q, f) in enumerate(result.trace, start=1):
                        trace.append(IterationRecord(sweeps, j, n, q, f, J))

            if J - j_before < settings.alternating_tol:
                converged = True
                break
        else:
            logger.warning(f"Alternating optimization stopped after {sweeps} sweeps (J={J:.6g})")

    return EmbeddedSolution(
        lambda_I=_lambda_from_x(x, ctx),
        snr=J,
        iterations=sweeps,
        dinkelbach_iterations=dinkelbach_iterations,
        converged=converged,
        x=x,
        trace=trace,
    )


def solve_embedded(v: EnergyVariation, ch: SlotChannel, params: SystemParams,
                   settings: Optional[SolverSettings] = None,
                   mode: PowerManagement = PowerManagement.HARVEST_USE_STORE) -> EmbeddedSolution:
    """Best information split and SNR for a fixed battery variation"""
    ctx = build_context(v, ch, params, mode)
    return solve_context(ctx, settings)


def j_upper(ctx: EmbeddedContext) -> float:
    """Upper bound on J with full information power and full forwarding power"""
    b = ctx.rx_power + ctx.sigma_b2
    power = ctx.gains * np.maximum(ctx.a - ctx.sigma_b2, 0.0)
    numerator = float(np.sum(np.sqrt(power * (1.0 - ctx.sigma_b2 / b)))) ** 2
    denominator = float(np.sum(power * ctx.sigma_b2 / b)) + ctx.sigma_D2
    return numerator / denominator
