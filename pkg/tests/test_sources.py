import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghzsim.config import PRESETS, resolve, source_from
from ghzsim.experiments import TARGETS, pair_truth, plan_from_preset
from ghzsim.qcore import DensityMatrix, expectation, ghz_state, ket, pauli_word
from ghzsim.sources import (
    SourceConfig,
    balance_angle,
    calibrate_pair_noise,
    cascade,
    cascade_map,
    ghz_exp_state,
    implied_conversion_efficiency,
    noisy_state,
    pair_metrics,
    phi_pair_state,
    predicted_triplet_rate,
    psi_pair_state,
    source_state,
    triplet_state,
)

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
unit = st.floats(0, 1)
SQ = 1 / math.sqrt(2)


class TestSourceConfig:
    def test_defaults(self):
        c = SourceConfig()
        assert c.pair_rate_1 == 3e6 and c.pair_rate_2 == 1.5e4
        assert c.triplet_rate == pytest.approx(10 / 3600)
        assert c.channel_efficiency == (0.30, 0.16, 0.13)
        assert c.dark_rate == 5.0

    @pytest.mark.parametrize("field,value", [
        ("dark_rate", -1.0),
        ("white_noise", 1.5),
        ("dephasing_visibility", -0.1),
        ("coincidence_window", 0.0),
        ("channel_efficiency", (0.3, 1.2, 0.1)),
    ])
    def test_invalid(self, field, value):
        with pytest.raises(ValueError):
            SourceConfig(**{field: value})

    def test_phase_modes(self):
        c = SourceConfig(phi=0.3, phi_prime=0.4)
        assert c.Phi == pytest.approx(0.7)
        assert c.replace(triplet_phase=1.0).Phi == 1.0

    def test_dict_round_trip(self):
        c = SourceConfig(theta=0.5, channel_efficiency=(0.1, 0.2, 0.3))
        assert SourceConfig(**c.to_dict()) == c


class TestPairStates:
    def test_singlet(self):
        assert np.allclose(psi_pair_state(math.pi / 4, math.pi).amplitudes, [0, SQ, -SQ, 0])

    def test_psi_theta_zero(self):
        assert np.allclose(psi_pair_state(0, 1.234).amplitudes, ket("HV").amplitudes)

    def test_psi_quarter_phase(self):
        assert np.allclose(psi_pair_state(math.pi / 4, math.pi / 2).amplitudes, [0, SQ, 1j * SQ, 0])

    def test_phi_plus(self):
        assert np.allclose(phi_pair_state(math.pi / 4, 0).amplitudes, [SQ, 0, 0, SQ])

    def test_phi_vv(self):
        # equal up to the global phase exp(2i)
        overlap = np.vdot(ket("VV").amplitudes, phi_pair_state(math.pi / 2, 2.0).amplitudes)
        assert abs(overlap) == pytest.approx(1, abs=1e-12)

    def test_phi_third(self):
        assert np.allclose(phi_pair_state(math.pi / 3, math.pi).amplitudes, [0.5, 0, 0, -math.sqrt(3) / 2])

    @given(angles, angles)
    def test_normalized(self, t, p):
        for s in (psi_pair_state(t, p), phi_pair_state(t, p)):
            assert np.linalg.norm(s.amplitudes) == pytest.approx(1, abs=1e-12)


class TestCascade:
    def test_map(self):
        assert np.allclose(cascade_map("H").amplitudes, ket("VV").amplitudes)
        assert np.allclose(cascade_map("V").amplitudes, ket("HH").amplitudes)
        with pytest.raises(ValueError):
            cascade_map("D")

    def test_linearity(self):
        phase = 0.7
        out = cascade([SQ, SQ], phase)
        assert np.allclose(out.amplitudes, [np.exp(1j * phase) * SQ, 0, 0, SQ])


class TestTripletState:
    def test_ghz(self):
        assert np.allclose(ghz_exp_state(math.pi / 4, 0).amplitudes, ghz_state().amplitudes)

    def test_phase_flip(self):
        s = ghz_exp_state(math.pi / 4, math.pi)
        assert np.allclose(s.amplitudes[[0, 7]], [SQ, -SQ])
        assert expectation(s, pauli_word("XXX")) == pytest.approx(-1, abs=1e-12)

    def test_z_parity_independent_of_theta(self):
        assert expectation(ghz_exp_state(math.pi / 6, 0), pauli_word("1ZZ")) == pytest.approx(1)

    def test_from_config(self):
        s = triplet_state(SourceConfig(phi=0.2, phi_prime=0.3))
        assert np.allclose(s.amplitudes, ghz_exp_state(math.pi / 4, 0.5).amplitudes)

    @given(angles, angles)
    def test_closed_form(self, theta, phase):
        s = ghz_exp_state(theta, phase)
        assert expectation(s, pauli_word("XXX")) == pytest.approx(math.sin(2 * theta) * math.cos(phase), abs=1e-12)
        for w in ("1ZZ", "Z1Z", "ZZ1"):
            assert expectation(s, pauli_word(w)) == pytest.approx(1, abs=1e-12)


class TestNoisyState:
    def test_identity_channel(self):
        rho = noisy_state(ghz_state(), 0, 1)
        assert np.allclose(rho.matrix, ghz_state().density().matrix)

    def test_full_white_noise(self):
        assert np.allclose(noisy_state(ghz_state(), 1, 0.3).matrix, np.eye(8) / 8)

    def test_dephasing_only_hits_x_parity(self):
        rho = noisy_state(ghz_state(), 0, 0.92)
        assert expectation(rho, pauli_word("XXX")) == pytest.approx(0.92, abs=1e-12)
        assert expectation(rho, pauli_word("1ZZ")) == pytest.approx(1, abs=1e-12)

    def test_leak_goes_outside_support(self):
        rho = noisy_state(ghz_state(), 0, 1, leak=0.1)
        assert rho.matrix[1, 1].real == pytest.approx(0.1)
        assert np.trace(rho.matrix).real == pytest.approx(1)

    def test_leak_needs_empty_basis_state(self):
        with pytest.raises(ValueError):
            noisy_state(ket("DD"), 0, 1, leak=0.1)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            noisy_state(ghz_state(), 1.2, 1)

    @given(angles, angles, unit, unit, unit)
    def test_always_valid(self, theta, phase, p, v, leak):
        rho = noisy_state(ghz_exp_state(theta, phase), p, v, leak)
        DensityMatrix(rho.matrix)  # re-validate
        assert rho.eigenvalues().min() >= 0

    @given(angles, unit)
    def test_fringe(self, phase, v):
        rho = noisy_state(ghz_exp_state(math.pi / 4, phase), 0, v)
        assert expectation(rho, pauli_word("XXX")) == pytest.approx(v * math.cos(phase), abs=1e-12)

    def test_source_state_uses_config(self):
        c = SourceConfig(white_noise=0.1, dephasing_visibility=0.9)
        assert np.allclose(source_state(ghz_state(), c).matrix, noisy_state(ghz_state(), 0.1, 0.9).matrix)


class TestRates:
    def test_zero_coupling(self):
        assert predicted_triplet_rate(SourceConfig(cascade_coupling=0), 1e-6) == 0

    def test_linear_in_coupling(self):
        c = SourceConfig(cascade_coupling=0.3)
        half = predicted_triplet_rate(c.replace(cascade_coupling=0.15), 1e-7)
        assert half == pytest.approx(predicted_triplet_rate(c, 1e-7) / 2)

    def test_implied_efficiency(self):
        c = SourceConfig()
        eta = implied_conversion_efficiency(c, 10 / 3600)
        # 3e6 / 0.30 * 0.30 * eta * 0.16 * 0.13 = 62400 * eta
        assert eta == pytest.approx((10 / 3600) / 62400, rel=1e-12)
        assert predicted_triplet_rate(c, eta) == pytest.approx(10 / 3600, rel=1e-12)

    def test_balance_angle(self):
        assert balance_angle(1.0) == pytest.approx(math.pi / 4)
        with pytest.raises(ValueError):
            balance_angle(0)


class TestPairCalibration:
    @pytest.mark.parametrize("preset,targets", [
        ("ppktp", (0.9645, 0.9561, 0.9147)),
        ("ppln", (0.9506, 0.937, 0.866)),
    ])
    def test_presets_hit_targets(self, preset, targets):
        plan = plan_from_preset("pair_tomography", preset)
        rho, _, target = pair_truth(plan)
        got = pair_metrics(rho, TARGETS[target]())
        assert np.allclose(got, targets, rtol=0, atol=1e-9)

    def test_white_noise_plus_dephasing_cannot_reach_targets(self):
        # for these X-states F - C/2 = 1/2 identically, but the targets give 0.486
        cal = calibrate_pair_noise("psi-", (0.9645, 0.9561, 0.9147), ("theta", "white_noise", "dephasing_visibility"))
        assert cal["residual"] > 1e-4

    def test_calibration_reproduces_preset(self):
        cal = calibrate_pair_noise("psi-", (0.9645, 0.9561, 0.9147),
                                   ("phase_error", "dephasing_visibility", "leak_fraction"))
        assert cal["residual"] < 1e-10
        src = source_from(resolve("ppktp"))
        assert cal["dephasing_visibility"] == pytest.approx(src.dephasing_visibility, abs=1e-8)
        assert math.pi + cal["phase_error"] == pytest.approx(src.phi, abs=1e-8)

    def test_presets_are_valid_configs(self):
        for name in PRESETS:
            source_from(resolve(name))
