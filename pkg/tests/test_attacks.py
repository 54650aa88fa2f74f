import io

import numpy as np
import pytest

from pmucorrect import (
    AttackVector,
    MeasurementVector,
    StateVector,
    apply_attack,
    build_measurement_system,
    flat_state,
    generate_measurements,
    read_measurements_csv,
    sample_state,
    transform_alternative,
    wrap_angle,
    write_measurements_csv,
)

DEG = np.pi / 180.0


class TestStateSampling:
    def test_zero_variance_returns_base(self):
        base = flat_state(4, 1.02)
        out = sample_state(base, 0.0, 0.0, rng_seed=1)
        assert np.array_equal(out.x, base.x)

    def test_same_seed_same_output(self):
        base = flat_state(10)
        a = sample_state(base, 0.01, 0.1, rng_seed=42)
        b = sample_state(base, 0.01, 0.1, rng_seed=42)
        assert np.array_equal(a.x, b.x)

    def test_angle_std_matches_parameters(self):
        # one draw over many buses is statistically the same as many draws
        base = flat_state(10_000)
        out = sample_state(base, 0.01, 5.73 * DEG, rng_seed=7)
        assert np.std(out.angles) == pytest.approx(5.73 * DEG, rel=0.05)
        assert np.std(out.magnitudes) == pytest.approx(0.01, rel=0.05)

    def test_magnitudes_stay_positive(self):
        base = flat_state(2000, 0.02)
        out = sample_state(base, 0.01, 0.0, rng_seed=3)
        assert np.all(out.magnitudes > 0)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            sample_state(flat_state(2), -0.1, 0.0)

    def test_retry_budget_exhaustion_raises(self):
        # seed 4 draws a negative magnitude for this base on the first try
        with pytest.raises(ValueError, match="positive magnitudes"):
            sample_state(flat_state(1, 1e-12), 1.0, 0.0, rng_seed=4, max_retries=0)


class TestMeasurementGeneration:
    def test_noiseless_flat_state_current_rows(self, fivebus_lossy):
        ms = build_measurement_system(fivebus_lossy)
        z = generate_measurements(ms, flat_state(5), 0.0)
        # x_i - x_l = 0, so only the charging term j*bs/2 remains
        for row in ms.current_rows:
            tag = ms.row_index[row]
            _, bs = fivebus_lossy.branch_params[(tag.bus_from, tag.bus_to)]
            assert z.z[row] == pytest.approx(0.5j * bs)

    def test_noiseless_in_range_of_h(self, twozone_ms):
        rng = np.random.default_rng(5)
        x = sample_state(flat_state(twozone_ms.n_buses), 0.01, 0.1, rng)
        z = generate_measurements(twozone_ms, x, 0.0)
        q, _ = np.linalg.qr(twozone_ms.h)
        resid = z.z - q @ (q.conj().T @ z.z)
        assert np.linalg.norm(resid) < 1e-12 * np.linalg.norm(z.z)

    def test_noise_power(self, fivebus_ms):
        sigma = 0.01
        x = flat_state(5)
        clean = generate_measurements(fivebus_ms, x, 0.0)
        draws = []
        for i in range(2000):
            noisy = generate_measurements(fivebus_ms, x, sigma, rng_seed=i)
            draws.append(np.abs(noisy.z - clean.z) ** 2)
        assert np.mean(draws) == pytest.approx(sigma**2, rel=0.05)


class TestApplyAttack:
    def test_zero_attack_is_identity(self, fivebus_ms):
        z = MeasurementVector(np.arange(1, 7) + 1j)
        out = apply_attack(z, AttackVector.zeros(3), fivebus_ms)
        assert np.array_equal(out.z, z.z)

    def test_pi_attack_negates_rows(self, fivebus_ms):
        z = MeasurementVector(np.arange(1, 7) + 0.5j)
        alpha = AttackVector(np.array([np.pi, 0.0, 0.0]))
        out = apply_attack(z, alpha, fivebus_ms)
        rows = fivebus_ms.rows_of_pmu(0)
        assert np.allclose(out.z[rows], -z.z[rows])
        assert np.allclose(np.abs(out.z), np.abs(z.z))
        others = np.setdiff1d(np.arange(6), rows)
        assert np.array_equal(out.z[others], z.z[others])

    def test_inverse_rotation_round_trip(self, fivebus_ms):
        rng = np.random.default_rng(9)
        z = MeasurementVector(rng.normal(size=6) + 1j * rng.normal(size=6))
        alpha = rng.uniform(-np.pi, np.pi, 3)
        fwd = apply_attack(z, AttackVector(alpha), fivebus_ms)
        back = apply_attack(fwd, AttackVector(-alpha), fivebus_ms)
        assert np.allclose(back.z, z.z, atol=1e-15)

    def test_group_action(self, fivebus_ms):
        rng = np.random.default_rng(10)
        z = MeasurementVector(rng.normal(size=6) + 1j * rng.normal(size=6))
        a = rng.uniform(-1, 1, 3)
        b = rng.uniform(-1, 1, 3)
        once = apply_attack(apply_attack(z, AttackVector(a), fivebus_ms),
                            AttackVector(b), fivebus_ms)
        combined = apply_attack(z, AttackVector(wrap_angle(a + b)), fivebus_ms)
        assert np.allclose(once.z, combined.z, atol=1e-14)


class TestAlternativeTransform:
    def _state_and_clean(self, net, ms, seed=0):
        rng = np.random.default_rng(seed)
        x = sample_state(flat_state(net.n_buses), 0.02, 0.3, rng)
        z = generate_measurements(ms, x, 0.0)
        return x, z

    def test_attack_free_w_delta_is_angle_difference(self, fivebus_lossy):
        ms = build_measurement_system(fivebus_lossy)
        x, z = self._state_and_clean(fivebus_lossy, ms)
        alt = transform_alternative(z, fivebus_lossy, ms)
        theta = x.angles
        for j, row in enumerate(ms.current_rows):
            tag = ms.row_index[row]
            expected = (
                theta[ms.bus_index[tag.bus_from]] - theta[ms.bus_index[tag.bus_to]]
            )
            assert alt.w_delta[j] == pytest.approx(wrap_angle(expected), abs=1e-12)

    def test_spoofed_voltage_angle_and_invariant_differences(self, fivebus_lossy):
        ms = build_measurement_system(fivebus_lossy)
        x, z = self._state_and_clean(fivebus_lossy, ms, seed=4)
        alpha = AttackVector(np.array([20.0 * DEG, 0.0, -35.0 * DEG]))
        z_bar = apply_attack(z, alpha, ms)
        clean = transform_alternative(z, fivebus_lossy, ms)
        spoofed = transform_alternative(z_bar, fivebus_lossy, ms)
        theta = x.angles
        for k, pmu in enumerate(fivebus_lossy.pmus):
            expected = theta[ms.bus_index[pmu.bus]] + alpha.alpha[k]
            assert spoofed.w_angle_v[k] == pytest.approx(wrap_angle(expected), abs=1e-12)
        assert np.allclose(
            wrap_angle(spoofed.w_delta - clean.w_delta), 0.0, atol=1e-12
        )

    def test_w_delta_invariant_to_common_rotation(self, fivebus_lossy):
        ms = build_measurement_system(fivebus_lossy)
        rng = np.random.default_rng(8)
        for _ in range(20):
            _, z = self._state_and_clean(fivebus_lossy, ms, seed=rng.integers(1 << 30))
            phi = rng.uniform(-np.pi, np.pi, 3)
            rotated = apply_attack(z, AttackVector(phi), ms)
            a = transform_alternative(z, fivebus_lossy, ms)
            b = transform_alternative(rotated, fivebus_lossy, ms)
            assert np.allclose(wrap_angle(b.w_delta - a.w_delta), 0.0, atol=1e-10)

    def test_linear_model_consistency(self, fivebus_lossy):
        # assembled w equals [H_angle_v; H_delta] theta + [alpha; 0] mod 2pi
        ms = build_measurement_system(fivebus_lossy)
        x, z = self._state_and_clean(fivebus_lossy, ms, seed=6)
        alpha = AttackVector(np.array([-1.1, 0.4, 0.0]))
        z_bar = apply_attack(z, alpha, ms)
        alt = transform_alternative(z_bar, fivebus_lossy, ms)
        theta = x.angles
        model = np.concatenate(
            [
                ms.h_angle_v @ theta + alpha.alpha,
                ms.h_delta @ theta,
            ]
        )
        assert np.allclose(wrap_angle(alt.stacked - model), 0.0, atol=1e-12)

    def test_zero_voltage_rejected(self, fivebus, fivebus_ms):
        z = np.ones(6, dtype=complex)
        z[0] = 0.0
        with pytest.raises(ValueError, match="zero voltage"):
            transform_alternative(MeasurementVector(z), fivebus, fivebus_ms)


class TestAttackVectorType:
    def test_wrapping_and_support(self):
        alpha = AttackVector(np.array([2 * np.pi, 0.5, 0.0]))
        assert alpha.alpha[0] == pytest.approx(0.0, abs=1e-15)
        assert alpha.support == {1}
        assert alpha.sparsity == 1

    def test_zero_phasor_state_rejected(self):
        with pytest.raises(ValueError, match="zero phasor"):
            StateVector(np.array([1.0, 0.0], dtype=complex))


def test_measurement_csv_round_trip(fivebus, fivebus_ms):
    rng = np.random.default_rng(12)
    z = MeasurementVector(rng.normal(size=6) + 1j * rng.normal(size=6))
    buf = io.StringIO()
    write_measurements_csv(buf, z, fivebus_ms)
    buf.seek(0)
    back = read_measurements_csv(buf, fivebus_ms)
    assert np.array_equal(back.z, z.z)


def test_measurement_csv_validates_rows(fivebus_ms):
    text = "row_id,pmu,kind,bus_i,bus_l,re,im\n0,1,V,4,,1.0,0.0\n"
    with pytest.raises(ValueError, match="does not match"):
        read_measurements_csv(io.StringIO(text), fivebus_ms)
