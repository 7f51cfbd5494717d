"""
Embedded Solver Tests

Dinkelbach inner loop, alternating sweeps, concavity and the J upper bound.
"""

import math
import unittest

import numpy as np


def worked_context():
    """K=1, eta1=0.4, P=10, |h|^2=|g|^2=1, unit noise, v=0: a=11, box [1, 11]"""
    from husrelay.model.system import SystemParams, SlotChannel, EnergyVariation
    from husrelay.solver.embedded import build_context

    params = SystemParams(P=10.0, K=1, T=1, L=4)
    ch = SlotChannel(h=np.array([1.0 + 0j]), g=np.array([1.0 + 0j]))
    return build_context(EnergyVariation((0,)), ch, params), params, ch


def random_instance(rng, K=2, P=10.0, eta2=0.8):
    """Random channel and random feasible variation at the default geometry"""
    from husrelay.model.system import (
        SystemParams, SlotChannel, BatteryState, EnergyVariation, feasible_variations,
    )

    params = SystemParams(P=P, K=K, T=1, L=4, eta2=eta2)
    h = np.sqrt(rng.exponential(1.0, K)) * np.exp(2j * np.pi * rng.random(K))
    g = np.sqrt(rng.exponential(0.04, K)) * np.exp(2j * np.pi * rng.random(K))
    ch = SlotChannel(h=h, g=g)
    state = BatteryState(tuple(int(x) for x in rng.integers(0, params.L + 1, K)))
    options = feasible_variations(state, ch, params)
    v = EnergyVariation(options[int(rng.integers(0, len(options)))])
    return v, ch, params


def grid_objective(ctx, lambdas):
    """Vectorized J over a grid of lambda_I for K=1 or K=2"""
    sigma = ctx.sigma_b2
    if ctx.K == 1:
        xs = [lambdas[0] * ctx.rx_power[0] + sigma]
    else:
        l0, l1 = np.meshgrid(lambdas[0], lambdas[1], indexing='ij')
        xs = [l0 * ctx.rx_power[0] + sigma, l1 * ctx.rx_power[1] + sigma]

    amplitude = 0.0
    noise = ctx.sigma_D2
    for k, x in enumerate(xs):
        power = ctx.gains[k] * np.maximum(ctx.a[k] - x, 0.0)
        amplitude = amplitude + np.sqrt(np.maximum(power * (1.0 - sigma / x), 0.0))
        noise = noise + power * sigma / x
    return amplitude ** 2 / noise


class TestObjective(unittest.TestCase):
    """Test the x-space objective"""

    def test_worked_values(self):
        """Test worked context constants"""
        from husrelay.solver.embedded import objective_j

        ctx, _, _ = worked_context()
        self.assertAlmostEqual(ctx.a[0], 11.0)
        self.assertAlmostEqual(ctx.x_hi[0], 11.0)
        self.assertEqual(objective_j([1.0], ctx), 0.0)
        self.assertAlmostEqual(objective_j([11.0], ctx), 0.0)
        self.assertAlmostEqual(objective_j([5.0], ctx), 1.92 / 1.48, places=10)

    def test_out_of_box_rejected(self):
        """Test rejection of points outside the box"""
        from husrelay.solver.embedded import objective_j
        from husrelay.core.errors import SolverError

        ctx, _, _ = worked_context()
        with self.assertRaises(SolverError):
            objective_j([0.5], ctx)
        with self.assertRaises(SolverError):
            objective_j([12.0], ctx)

    def test_matches_slot_snr(self):
        """Test J against the slot SNR"""
        from husrelay.model.system import Decision, slot_snr
        from husrelay.solver.embedded import build_context, objective_j

        rng = np.random.default_rng(21)
        for _ in range(100):
            v, ch, params = random_instance(rng)
            ctx = build_context(v, ch, params)
            lambdas = tuple(float(rng.random() * ctx.lambda_hi[k]) for k in range(params.K))
            x = np.array(lambdas) * ctx.rx_power + params.sigma_b2
            expected = slot_snr(ch, Decision(v, lambdas), params)
            self.assertAlmostEqual(objective_j(x, ctx), expected, delta=1e-9 * max(1.0, expected))


class TestDinkelbach(unittest.TestCase):
    """Test the fractional-programming inner loop"""

    def test_worked_instance(self):
        """Test Dinkelbach on the worked instance"""
        from husrelay.solver.embedded import SolverSettings, dinkelbach

        ctx, _, _ = worked_context()
        result = dinkelbach(0, np.array([1.0]), ctx, SolverSettings())

        # Root of 0.24x^2 + 3.52x - 23.76 = 0
        x_star = (-3.52 + math.sqrt(3.52 ** 2 + 4 * 0.24 * 23.76)) / (2 * 0.24)
        self.assertAlmostEqual(result.x, x_star, delta=1e-6)
        self.assertAlmostEqual(result.x, 5.0271, delta=1e-3)
        self.assertAlmostEqual(result.q, 1.2973, delta=1e-3)
        self.assertTrue(result.converged)

    def test_agrees_with_grid_oracle(self):
        """Test a coordinate step against a grid oracle"""
        from husrelay.solver.embedded import SolverSettings, dinkelbach

        ctx, _, _ = worked_context()
        xs = np.linspace(1.0, 11.0, 100_001)
        values = 0.4 * (11.0 - xs) * (1.0 - 1.0 / xs) / (0.4 * (11.0 - xs) / xs + 1.0)
        result = dinkelbach(0, np.array([1.0]), ctx, SolverSettings())

        self.assertAlmostEqual(result.x, float(xs[np.argmax(values)]), delta=1e-3)
        self.assertGreaterEqual(result.q, float(values.max()) - 1e-9)

    def test_collapsed_interval(self):
        """Test a collapsed interval"""
        from husrelay.model.system import SystemParams, SlotChannel, EnergyVariation
        from husrelay.solver.embedded import SolverSettings, build_context, dinkelbach

        # One level of 3.2 equals the whole harvest cap: no power left for information
        params = SystemParams(P=10.0, K=1, T=1, L=1, alpha=0.32)
        ch = SlotChannel(h=np.array([1.0 + 0j]), g=np.array([1.0 + 0j]))
        ctx = build_context(EnergyVariation((-1,)), ch, params)
        result = dinkelbach(0, np.array([1.0]), ctx, SolverSettings())

        self.assertAlmostEqual(result.x, 1.0, places=9)
        self.assertAlmostEqual(result.q, 0.0, places=9)

    def test_zero_gain_relay_returns_lower_end(self):
        """Test a relay with zero gain"""
        from husrelay.model.system import SystemParams, SlotChannel, EnergyVariation
        from husrelay.solver.embedded import SolverSettings, build_context, solve_p4

        params = SystemParams(P=10.0, K=2, T=1, L=4)
        ch = SlotChannel(h=np.array([1.0 + 0j, 1.0 + 0j]), g=np.array([1.0 + 0j, 0j]))
        ctx = build_context(EnergyVariation((0, 0)), ch, params)
        x = np.array([5.0, 3.0])
        self.assertEqual(solve_p4(0.7, 1, x, ctx, SolverSettings()), ctx.x_lo)

    def test_monotone_q_and_f_on_random_instances(self):
        """Test monotone q and F on random instances"""
        from husrelay.solver.embedded import SolverSettings, build_context, dinkelbach

        rng = np.random.default_rng(5)
        settings = SolverSettings()
        runs = 0
        within_ten = 0

        for _ in range(1000):
            v, ch, params = random_instance(rng)
            ctx = build_context(v, ch, params)
            x = np.full(params.K, ctx.x_lo)
            for j in range(params.K):
                result = dinkelbach(j, x, ctx, settings)
                x[j] = result.x
                qs = [q for q, _ in result.trace]
                fs = [f for _, f in result.trace]
                for a, b in zip(qs, qs[1:]):
                    self.assertGreater(b, a)
                for a, b in zip(fs, fs[1:]):
                    self.assertLessEqual(b, a + 1e-9)
                self.assertLess(abs(fs[-1]), 1e-6)
                runs += 1
                within_ten += result.iterations <= 10

        self.assertGreaterEqual(within_ten, 0.95 * runs)


class TestConcavity(unittest.TestCase):
    """F1 - q*F2 is concave in each coordinate"""

    def test_second_differences(self):
        """Test concavity by second differences"""
        from husrelay.solver.embedded import build_context, fractional_parts, j_upper

        rng = np.random.default_rng(13)
        step = 1e-4
        checked = 0

        while checked < 1000:
            v, ch, params = random_instance(rng)
            ctx = build_context(v, ch, params)
            j = int(rng.integers(0, params.K))
            lo, hi = ctx.x_lo, float(ctx.x_hi[j])
            if hi - lo < 10 * step:
                continue

            x = np.array([rng.uniform(ctx.x_lo, ctx.x_hi[k]) for k in range(params.K)])
            q = float(rng.uniform(0.0, j_upper(ctx)))
            centre = rng.uniform(lo + 2 * step, hi - 2 * step)

            def phi(xj):
                point = x.copy()
                point[j] = xj
                f1, f2 = fractional_parts(point, ctx)
                return f1 - q * f2

            second = phi(centre + step) - 2 * phi(centre) + phi(centre - step)
            self.assertLessEqual(second, 1e-6)
            checked += 1


class TestSolveEmbedded(unittest.TestCase):
    """Test the alternating optimization"""

    def test_worked_instance(self):
        """Test the alternating solver on the worked instance"""
        from husrelay.model.system import EnergyVariation
        from husrelay.solver.embedded import solve_embedded

        _, params, ch = worked_context()
        solution = solve_embedded(EnergyVariation((0,)), ch, params)
        self.assertAlmostEqual(solution.lambda_I[0], 0.40271, delta=1e-3)
        self.assertAlmostEqual(solution.snr, 1.2973, delta=1e-3)
        self.assertTrue(solution.converged)

    def test_all_source_gains_zero(self):
        """Test zero source gains"""
        from husrelay.model.system import SystemParams, SlotChannel, EnergyVariation
        from husrelay.solver.embedded import solve_embedded, build_context, j_upper

        params = SystemParams(P=10.0, K=2, T=1, L=4)
        ch = SlotChannel(h=np.zeros(2, dtype=complex), g=np.ones(2, dtype=complex))
        solution = solve_embedded(EnergyVariation((0, 0)), ch, params)
        self.assertEqual(solution.lambda_I, (0.0, 0.0))
        self.assertEqual(solution.snr, 0.0)
        self.assertEqual(j_upper(build_context(EnergyVariation((0, 0)), ch, params)), 0.0)

    def test_infeasible_variation_rejected(self):
        """Test rejection of an infeasible variation"""
        from husrelay.model.system import EnergyVariation
        from husrelay.solver.embedded import solve_embedded
        from husrelay.core.errors import InfeasibleDecisionError

        # step 2.5, two levels need 5.0 > cap 3.2
        _, params, ch = worked_context()
        with self.assertRaises(InfeasibleDecisionError):
            solve_embedded(EnergyVariation((-2,)), ch, params)

    def test_identical_relays_get_equal_splits(self):
        """Test equal splits for identical relays"""
        from husrelay.model.system import SystemParams, SlotChannel, EnergyVariation
        from husrelay.solver.embedded import SolverSettings, solve_embedded

        params = SystemParams(P=10.0, K=2, T=1, L=4)
        ch = SlotChannel(h=np.array([0.9 + 0.2j] * 2), g=np.array([0.3 - 0.1j] * 2))
        tight = SolverSettings(dinkelbach_tol=1e-14, alternating_tol=1e-14, max_alternating_iters=500)
        solution = solve_embedded(EnergyVariation((1, 1)), ch, params, tight)
        self.assertAlmostEqual(solution.lambda_I[0], solution.lambda_I[1], delta=1e-6)

    def test_ascent_and_upper_bound(self):
        """Test ascent and the upper bound"""
        from husrelay.solver.embedded import SolverSettings, build_context, solve_context, j_upper

        rng = np.random.default_rng(17)
        settings = SolverSettings(record_trace=True)

        for _ in range(1000):
            v, ch, params = random_instance(rng)
            ctx = build_context(v, ch, params)
            solution = solve_context(ctx, settings)
            js = [rec.J for rec in solution.trace]
            for a, b in zip(js, js[1:]):
                self.assertGreaterEqual(b, a - 1e-10)
            self.assertLessEqual(solution.snr, j_upper(ctx) * (1 + 1e-9))

    def test_worked_upper_bound(self):
        """Test the worked upper bound"""
        from husrelay.solver.embedded import j_upper

        ctx, _, _ = worked_context()
        self.assertAlmostEqual(j_upper(ctx), (40.0 / 11.0) / (15.0 / 11.0), places=10)
        self.assertAlmostEqual(j_upper(ctx), 2.6667, places=3)

    def test_matches_grid_search(self):
        """Test the solver against a grid search"""
        from husrelay.solver.embedded import build_context, solve_context

        rng = np.random.default_rng(23)
        for K in (1, 2):
            for _ in range(20):
                v, ch, params = random_instance(rng, K=K)
                ctx = build_context(v, ch, params)
                solution = solve_context(ctx)
                grids = [np.linspace(0.0, ctx.lambda_hi[k], 1001 if K == 1 else 201) for k in range(K)]
                best = float(np.max(grid_objective(ctx, grids)))
                self.assertGreaterEqual(solution.snr, best - 1e-6 * max(1.0, best))

    def test_storage_modes_agree_without_storage_loss(self):
        """Test storage modes without storage loss"""
        from husrelay.model.system import PowerManagement
        from husrelay.solver.embedded import solve_embedded

        rng = np.random.default_rng(29)
        for _ in range(50):
            v, ch, params = random_instance(rng, eta2=1.0)
            hus = solve_embedded(v, ch, params)
            hsu = solve_embedded(v, ch, params, mode=PowerManagement.HARVEST_STORE_USE)
            self.assertEqual(hus.snr, hsu.snr)
            self.assertEqual(hus.lambda_I, hsu.lambda_I)


if __name__ == '__main__':
    unittest.main()
