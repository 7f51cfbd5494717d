"""
System Model Tests

Single-slot physics: splitting, battery mechanics, SNR and payoff.
"""

import math
import unittest

import numpy as np


def worked_params(**overrides):
    """P=10, eta1=0.4, eta2=0.8, unit noise"""
    from husrelay.model.system import SystemParams
    values = dict(P=10.0, K=1, T=1, L=4)
    values.update(overrides)
    return SystemParams(**values)


def one_relay(h=1.0, g=1.0):
    from husrelay.model.system import SlotChannel
    return SlotChannel(h=np.array([h], dtype=complex), g=np.array([g], dtype=complex))


class TestSystemParams(unittest.TestCase):
    """Test parameter validation and the battery grid"""

    def test_invalid_efficiency_names_field(self):
        """Test that a bad efficiency names its field"""
        from husrelay.model.system import SystemParams
        from husrelay.core.errors import ConfigurationError

        with self.assertRaises(ConfigurationError) as ctx:
            SystemParams(P=10.0, K=1, T=1, L=4, eta1=0.0)
        self.assertEqual(ctx.exception.field_name, "system.eta1")

    def test_antenna_noise_fixed_to_zero(self):
        """Test that antenna noise must be zero"""
        from husrelay.model.system import SystemParams
        from husrelay.core.errors import ConfigurationError

        with self.assertRaises(ConfigurationError):
            SystemParams(P=10.0, K=1, T=1, L=4, sigma_a2=0.1)

    def test_grid_step(self):
        """Test the battery grid step"""
        params = worked_params()
        self.assertAlmostEqual(params.grid.step, 2.5)
        self.assertAlmostEqual(params.grid.step * params.L, params.grid.b_max)
        np.testing.assert_allclose(params.grid.levels, [0.0, 2.5, 5.0, 7.5, 10.0])

    def test_state_index_roundtrip(self):
        """Test battery state indexing"""
        from husrelay.model.system import BatteryState

        for index in range(5 ** 3):
            state = BatteryState.from_index(index, K=3, L=4)
            self.assertEqual(state.index(4), index)


class TestSlotPhysics(unittest.TestCase):
    """Test the closed-form single-slot operations"""

    def test_beamforming_phase(self):
        """Test the beamforming phase"""
        from husrelay.model.system import beamforming_phase

        self.assertAlmostEqual(beamforming_phase(1, 1), 0.0)
        self.assertAlmostEqual(beamforming_phase(1j, 1), -math.pi / 2)
        w = np.exp(1j * math.pi / 4)
        self.assertAlmostEqual(beamforming_phase(w, w), -math.pi / 2)
        self.assertEqual(beamforming_phase(0, 1j), 0.0)

    def test_charge_quantize(self):
        """Test charge quantization"""
        from husrelay.model.system import BatteryGrid, charge_quantize

        grid = BatteryGrid(b_max=4.0, L=4)
        eta2 = 0.8
        self.assertEqual(charge_quantize(1, 2.5 / eta2, grid, eta2), 1)
        self.assertEqual(charge_quantize(4, 0.7 / eta2, grid, eta2), 0)
        self.assertEqual(charge_quantize(0, 10.0 / eta2, grid, eta2), 0)

    def test_split_from_variation(self):
        """Test split ratios implied by a variation"""
        from husrelay.model.system import split_from_variation
        from husrelay.core.errors import InfeasibleDecisionError

        params = worked_params()
        self.assertEqual(split_from_variation(1.0, 1.0, params), (1.0, 0.0))

        b, lam_b = split_from_variation(-2.0, 1.0, params)
        self.assertEqual(b, 0.0)
        self.assertAlmostEqual(lam_b, 0.625)

        with self.assertRaises(InfeasibleDecisionError):
            split_from_variation(-4.0, 1.0, params)

    def test_relay_transmit_power(self):
        """Test relay transmit power"""
        from husrelay.model.system import relay_transmit_power

        params = worked_params()
        self.assertAlmostEqual(relay_transmit_power(0.5, 0.0, 1.0, params), 2.0)
        self.assertAlmostEqual(relay_transmit_power(0.0, -2.0, 1.0, params), 1.5)
        self.assertAlmostEqual(relay_transmit_power(0.5, 1.0, 1.0, params), 3.0)

    def test_amplification_gain(self):
        """Test the amplification gain"""
        from husrelay.model.system import amplification_gain

        params = worked_params()
        self.assertAlmostEqual(amplification_gain(0.5, 2.0, 1.0, params), math.sqrt(1.0 / 3.0))
        self.assertEqual(amplification_gain(0.7, 0.0, 1.0, params), 0.0)
        self.assertAlmostEqual(amplification_gain(0.0, 1.0, 1.0, params), 1.0)

    def test_slot_snr_worked_instance(self):
        """Test the slot SNR worked instance"""
        from husrelay.model.system import Decision, EnergyVariation, slot_snr

        params = worked_params()
        ch = one_relay()
        zero = EnergyVariation((0,))
        self.assertAlmostEqual(slot_snr(ch, Decision(zero, (0.5,)), params), 1.25)
        self.assertAlmostEqual(slot_snr(ch, Decision(zero, (0.0,)), params), 0.0)
        self.assertAlmostEqual(slot_snr(ch, Decision(zero, (1.0,)), params), 0.0)

    def test_slot_snr_rejects_infeasible_split(self):
        """Test rejection of an infeasible split"""
        from husrelay.model.system import Decision, EnergyVariation, slot_snr
        from husrelay.core.errors import InfeasibleDecisionError

        # step 2.5, cap 3.2: charging one level leaves lambda_I <= 1 - 2.5/3.2
        params = worked_params()
        with self.assertRaises(InfeasibleDecisionError):
            slot_snr(one_relay(), Decision(EnergyVariation((-1,)), (0.5,)), params)

    def test_rate_from_snr(self):
        """Test the rate of an SNR"""
        from husrelay.model.system import rate_from_snr

        params = worked_params()
        self.assertEqual(rate_from_snr(0.0, params), 0.0)
        self.assertAlmostEqual(rate_from_snr(1.25, params), 0.5 * math.log2(2.25))
        self.assertAlmostEqual(rate_from_snr(3.0, params), 1.0)

    def test_payoff_matches_rate_of_snr(self):
        """Test payoff against the rate of the SNR"""
        from husrelay.model.system import Decision, EnergyVariation, payoff

        params = worked_params()
        value = payoff(one_relay(), Decision(EnergyVariation((0,)), (0.5,)), params)
        self.assertAlmostEqual(value, 0.5 * math.log2(2.25))


class TestBattery(unittest.TestCase):
    """Test battery transitions and feasibility"""

    def test_battery_step(self):
        """Test a battery transition"""
        from husrelay.model.system import BatteryState, EnergyVariation, battery_step
        from husrelay.core.errors import BatteryRangeError

        params = worked_params()
        self.assertEqual(battery_step(BatteryState((2,)), EnergyVariation((1,)), params).levels, (1,))
        self.assertEqual(battery_step(BatteryState((2,)), EnergyVariation((2,)), params).levels, (0,))
        with self.assertRaises(BatteryRangeError):
            battery_step(BatteryState((2,)), EnergyVariation((3,)), params)

    def test_step_then_reverse_is_identity(self):
        """Test that a step and its reverse cancel"""
        from husrelay.model.system import BatteryState, EnergyVariation, battery_step

        params = worked_params(K=2)
        start = BatteryState((2, 1))
        moved = battery_step(start, EnergyVariation((1, -1)), params)
        self.assertEqual(moved.levels, (1, 2))
        self.assertEqual(battery_step(moved, EnergyVariation((-1, 1)), params), start)

    def test_decision_feasible(self):
        """Test decision feasibility"""
        from husrelay.model.system import BatteryState, EnergyVariation, decision_feasible

        # P=4, L=4 gives step 1; |h|^2 = 2.5 gives cap 0.32 * 4 * 2.5 = 3.2
        params = worked_params(P=4.0)
        ch = one_relay(h=math.sqrt(2.5))

        self.assertTrue(decision_feasible(BatteryState((0,)), EnergyVariation((0,)), ch, params))
        self.assertFalse(decision_feasible(BatteryState((0,)), EnergyVariation((1,)), ch, params))
        self.assertFalse(decision_feasible(BatteryState((4,)), EnergyVariation((-4,)), ch, params))
        self.assertTrue(decision_feasible(BatteryState((0,)), EnergyVariation((-3,)), ch, params))
        self.assertFalse(decision_feasible(BatteryState((0,)), EnergyVariation((-4,)), ch, params))

    def test_feasible_variations_respect_charge_cap(self):
        """Test that variations respect the charge cap"""
        from husrelay.model.system import BatteryState, feasible_variations, max_charge_levels

        params = worked_params(P=4.0)
        ch = one_relay(h=math.sqrt(2.5))

        self.assertEqual(max_charge_levels(ch.h[0], params), 3)
        self.assertEqual(feasible_variations(BatteryState((0,)), ch, params), [(-3,), (-2,), (-1,), (0,)])
        self.assertEqual(feasible_variations(BatteryState((4,)), ch, params), [(0,), (1,), (2,), (3,), (4,)])

    def test_zero_source_gain_cannot_charge(self):
        """Test that a dead source link cannot charge"""
        from husrelay.model.system import BatteryState, feasible_variations

        params = worked_params()
        options = feasible_variations(BatteryState((1,)), one_relay(h=0.0), params)
        self.assertEqual(options, [(0,), (1,)])


class TestModelProperties(unittest.TestCase):
    """Randomized checks of the model invariants"""

    def _random_decision(self, rng, params):
        from husrelay.model.system import (
            BatteryState, Decision, EnergyVariation, SlotChannel, feasible_variations, lambda_upper,
        )

        h = np.sqrt(rng.exponential(1.0, params.K)) * np.exp(2j * np.pi * rng.random(params.K))
        g = np.sqrt(rng.exponential(0.04, params.K)) * np.exp(2j * np.pi * rng.random(params.K))
        ch = SlotChannel(h=h, g=g)
        state = BatteryState(tuple(int(x) for x in rng.integers(0, params.L + 1, params.K)))
        options = feasible_variations(state, ch, params)
        v = EnergyVariation(options[int(rng.integers(0, len(options)))])
        v_energy = v.energy(params.grid)
        lambdas = tuple(float(rng.random() * lambda_upper(v_energy[k], h[k], params)) for k in range(params.K))
        return state, Decision(v, lambdas), ch

    def test_split_ratios_and_power_balance(self):
        """Test split ratios and power balance"""
        from husrelay.model.system import realize_slot

        params = worked_params(K=2)
        rng = np.random.default_rng(7)
        step = params.grid.step

        for _ in range(200):
            state, decision, ch = self._random_decision(rng, params)
            outcome = realize_slot(state, decision, ch, params)
            for k in range(params.K):
                total = outcome.splits.lambda_I[k] + outcome.splits.lambda_F[k] + outcome.splits.lambda_B[k]
                self.assertAlmostEqual(total, 1.0, places=12)

                expected = (params.eta1 * outcome.splits.lambda_F[k] * params.P * abs(ch.h[k]) ** 2
                            + outcome.discharged_levels[k] * step)
                self.assertAlmostEqual(outcome.relay_power[k], expected,
                                       delta=1e-12 * max(1.0, expected) + 1e-12)

    def test_charge_and_discharge_balance_the_battery(self):
        """Test that charge and discharge balance the battery"""
        from husrelay.model.system import realize_slot

        params = worked_params(K=2)
        rng = np.random.default_rng(11)

        for _ in range(100):
            state, decision, ch = self._random_decision(rng, params)
            outcome = realize_slot(state, decision, ch, params)
            for k in range(params.K):
                change = outcome.next_state.levels[k] - state.levels[k]
                self.assertEqual(change, outcome.charged_levels[k] - outcome.discharged_levels[k])

    def test_snr_nondecreasing_in_source_power(self):
        """Test SNR against source power"""
        from husrelay.model.system import Decision, EnergyVariation, SlotChannel, slot_snr

        rng = np.random.default_rng(3)
        for _ in range(50):
            h = np.sqrt(rng.exponential(1.0, 2)).astype(complex)
            g = np.sqrt(rng.exponential(0.04, 2)).astype(complex)
            decision = Decision(EnergyVariation((0, 0)), tuple(rng.random(2)))
            ch = SlotChannel(h=h, g=g)
            low = slot_snr(ch, decision, worked_params(K=2, P=5.0))
            high = slot_snr(ch, decision, worked_params(K=2, P=50.0))
            self.assertGreaterEqual(high, low)

    def test_silent_relay_matches_reduced_system(self):
        """Test that a silent relay adds nothing"""
        from husrelay.model.system import Decision, EnergyVariation, SlotChannel, slot_snr

        two = SlotChannel(h=np.array([0.8 + 0.3j, 1.1j]), g=np.array([0.2 - 0.1j, 0.0]))
        one = SlotChannel(h=two.h[:1], g=two.g[:1])
        reduced = slot_snr(one, Decision(EnergyVariation((0,)), (0.4,)), worked_params())

        for other in (0.0, 0.3, 0.9):
            full = slot_snr(two, Decision(EnergyVariation((0, 0)), (0.4, other)), worked_params(K=2))
            self.assertAlmostEqual(full, reduced, places=12)

    def test_harvest_store_use_equals_harvest_use_store_without_storage_loss(self):
        """Test storage modes without storage loss"""
        from husrelay.model.system import PowerManagement, relay_transmit_power

        params = worked_params(eta2=1.0)
        for lam, v in [(0.3, 0.0), (0.2, 1.5), (0.0, -2.0)]:
            hus = relay_transmit_power(lam, v, 1.0, params)
            hsu = relay_transmit_power(lam, v, 1.0, params, PowerManagement.HARVEST_STORE_USE)
            self.assertAlmostEqual(hus, hsu, places=12)


if __name__ == '__main__':
    unittest.main()
