import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ghzsim.estimation import (
    BootstrapError,
    Estimate,
    FitError,
    bootstrap_metrics,
    fidelity_bound,
    fit_sinusoid,
    ghz_witness,
    linear_inversion,
    mle_reconstruct,
    witness_from_records,
    witness_operator,
    witness_value,
)
from ghzsim.estimation.tomography import t_from_rho
from ghzsim.measurement import CountRecord, multinomial_sigma, parity_expectation, pauli_settings
from ghzsim.qcore import (
    expectation,
    fidelity,
    ghz_state,
    ket,
    random_density_matrix,
    random_pure_state,
    trace_distance,
)
from ghzsim.simulator import expected_counts, sample_counts

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _noiseless(rho, n, total=10**6):
    return [expected_counts(rho, s, total) for s in pauli_settings(n)]


def _xz_records(x_even, x_odd, z_counts):
    x = np.zeros(8, dtype=int)
    x[0], x[1] = x_even, x_odd  # "+++" even, "++-" odd
    return CountRecord.from_array("XXX", x), CountRecord.from_array("ZZZ", z_counts)


class TestLinearInversion:
    def test_exact_on_noiseless(self):
        rho = random_density_matrix(2, np.random.default_rng(1))
        est = linear_inversion(_noiseless(rho, 2, 10**9))
        assert np.allclose(est, rho.matrix, atol=1e-6)

    def test_requires_complete_settings(self):
        recs = _noiseless(ghz_state().density(), 3)[:-1]
        with pytest.raises(ValueError, match="missing"):
            linear_inversion(recs)


class TestMLE:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_pure_state_recovered(self, n):
        psi = random_pure_state(n, np.random.default_rng(n))
        res = mle_reconstruct(_noiseless(psi.density(), n), replicas=0)
        assert res.converged
        assert trace_distance(res.rho, psi.density()) < 0.01

    def test_single_qubit_h(self):
        res = mle_reconstruct(_noiseless(ket("H").density(), 1, 1000), replicas=0)
        assert fidelity(res.rho, ket("H")) > 0.99

    def test_ghz(self):
        res = mle_reconstruct(_noiseless(ghz_state().density(), 3), target=ghz_state(), replicas=0)
        assert res.metrics["fidelity"].value > 0.99
        assert math.isnan(res.metrics["fidelity"].sigma)

    def test_likelihood_monotone(self):
        rho = random_density_matrix(2, np.random.default_rng(5))
        recs = [sample_counts(rho, s, 100.0, 1.0, seed=i) for i, s in enumerate(pauli_settings(2))]
        res = mle_reconstruct(recs, replicas=0)
        assert np.all(np.diff(res.history) >= 0)
        assert res.log_likelihood == res.history[-1]

    def test_linear_warm_start_agrees(self):
        rho = random_density_matrix(2, np.random.default_rng(6))
        recs = [sample_counts(rho, s, 500.0, 1.0, seed=i) for i, s in enumerate(pauli_settings(2))]
        a = mle_reconstruct(recs, replicas=0)
        b = mle_reconstruct(recs, replicas=0, warm_start="linear")
        assert trace_distance(a.rho, b.rho) < 1e-3
        assert abs(a.log_likelihood - b.log_likelihood) < 1e-5

    def test_metrics_and_sigmas(self):
        rho = random_density_matrix(2, np.random.default_rng(7))
        recs = [sample_counts(rho, s, 1000.0, 1.0, seed=i) for i, s in enumerate(pauli_settings(2))]
        res = mle_reconstruct(recs, target=ket("HV"), replicas=100, seed=3)
        assert set(res.metrics) == {"fidelity", "purity", "tangle"}
        assert all(0 < e.sigma < 0.1 for e in res.metrics.values())

    def test_incomplete_rejected(self):
        with pytest.raises(ValueError):
            mle_reconstruct(_noiseless(ghz_state().density(), 3)[:5])

    def test_unknown_warm_start(self):
        with pytest.raises(ValueError):
            mle_reconstruct(_noiseless(ket("H").density(), 1), warm_start="psd")

    @settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.lists(st.integers(0, 5), min_size=36, max_size=36).filter(lambda c: sum(c) > 0))
    def test_always_a_density_matrix(self, counts):
        recs = [CountRecord.from_array(s, counts[4 * i:4 * i + 4]) for i, s in enumerate(pauli_settings(2))]
        res = mle_reconstruct(recs, replicas=0)
        m = res.rho.matrix
        assert np.allclose(m, m.conj().T, atol=1e-12)
        assert np.trace(m).real == pytest.approx(1, abs=1e-12)
        assert np.linalg.eigvalsh(m).min() > -1e-12

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_linear_and_mle_agree(self, seed):
        psi = random_pure_state(2, np.random.default_rng(seed))
        recs = _noiseless(psi.density(), 2)
        res = mle_reconstruct(recs, replicas=0)
        assert trace_distance(res.rho, linear_inversion(recs)) < 0.01

    def test_t_from_rho_round_trip(self):
        rho = random_density_matrix(3, np.random.default_rng(3), n_components=8).matrix
        t = t_from_rho(rho)
        assert np.allclose(np.triu(t, 1), 0)
        assert np.allclose(t.conj().T @ t, rho)


class TestWitness:
    def test_reference_values(self):
        res = ghz_witness(0.95, 0.97, 1.00, 0.97)
        assert res.w_value.value == pytest.approx(-0.92, abs=1e-12)
        assert res.fidelity_lower_bound.value == pytest.approx(0.96, abs=1e-12)

    def test_ideal(self):
        res = ghz_witness(1, 1, 1, 1)
        assert res.w_value.value == -1 and res.fidelity_lower_bound.value == 1

    def test_vacuous(self):
        res = ghz_witness(0, 0, 0, 0)
        assert res.w_value.value == 1.5 and res.fidelity_lower_bound.value == -0.25

    def test_sigma_combination(self):
        ins = [(0.95, 0.05), (0.97, 0.03), (1.00, 0.04), (0.97, 0.03)]
        quad = ghz_witness(*ins)
        lin = ghz_witness(*ins, combine="linear")
        assert quad.w_value.sigma == pytest.approx(math.sqrt(0.05**2 + (0.015**2 + 0.02**2 + 0.015**2)))
        assert lin.w_value.sigma == pytest.approx(0.10)
        assert quad.fidelity_lower_bound.sigma == pytest.approx(quad.w_value.sigma / 2)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ghz_witness(1.2, 1, 1, 1)
        with pytest.raises(ValueError):
            ghz_witness(1, 1, 1, 1, combine="max")

    def test_operator_matches_value(self):
        rho = random_density_matrix(3, np.random.default_rng(2))
        from ghzsim.qcore import pauli_word

        es = [expectation(rho, pauli_word(w)) for w in ("XXX", "1ZZ", "Z1Z", "ZZ1")]
        assert expectation(rho, witness_operator()) == pytest.approx(witness_value(*es), abs=1e-12)

    @settings(max_examples=100)
    @given(seeds)
    def test_bound_is_sound(self, seed):
        rho = random_density_matrix(3, np.random.default_rng(seed))
        w = expectation(rho, witness_operator())
        assert fidelity(rho, ghz_state()) >= fidelity_bound(w) - 1e-9

    def test_from_records(self):
        rx, rz = _xz_records(43, 1, [28, 0, 0, 0, 0, 0, 0, 30])
        res = witness_from_records(rx, rz, replicas=10_000, seed=1)
        assert res.e_xxx.value == pytest.approx(42 / 44)
        for e in (res.e_1zz, res.e_z1z, res.e_zz1):
            assert e.value == 1 and e.sigma == 0
        assert res.sigma_method == "bootstrap"
        assert res.w_value.sigma == pytest.approx(res.e_xxx.sigma, rel=0.05)

    def test_from_records_needs_counts(self):
        from ghzsim.measurement import NoCountsError

        rx, rz = _xz_records(0, 0, [0] * 8)
        with pytest.raises(NoCountsError):
            witness_from_records(rx, rz)

    def test_to_dict(self):
        d = ghz_witness((0.95, 0.05), 0.97, 1, 0.97).to_dict()
        assert d["w_value"]["value"] == pytest.approx(-0.92)
        assert d["sigma_method"] == "quadrature"


class TestFit:
    PHASES = np.linspace(0, 2 * np.pi, 12, endpoint=False)

    def test_cosine(self):
        fit = fit_sinusoid([(p, 0.92 * np.cos(p), 0.05) for p in self.PHASES])
        assert fit.amplitude == pytest.approx(0.92, abs=1e-12)
        assert fit.phase_offset == pytest.approx(0, abs=1e-12)
        assert fit.residual_rms < 1e-12

    def test_offset(self):
        fit = fit_sinusoid([(p, np.cos(p + np.pi / 3), None) for p in self.PHASES])
        assert fit.amplitude == pytest.approx(1, abs=1e-12)
        assert fit.phase_offset == pytest.approx(np.pi / 3, abs=1e-12)
        assert fit(0.3) == pytest.approx(np.cos(0.3 + np.pi / 3))

    def test_noisy_recovery(self):
        rng = np.random.default_rng(12)
        hits = 0
        for _ in range(50):
            pts = [(p, 0.8 * np.cos(p) + rng.normal(0, 0.1), 0.1) for p in self.PHASES]
            fit = fit_sinusoid(pts)
            hits += abs(fit.amplitude - 0.8) < 3 * fit.amplitude_sigma
        assert hits >= 48

    def test_sigma_scale(self):
        # unit-amplitude sigma for N equally spaced points: sigma * sqrt(2/N)
        fit = fit_sinusoid([(p, np.cos(p), 0.1) for p in self.PHASES])
        assert fit.amplitude_sigma == pytest.approx(0.1 * math.sqrt(2 / 12))

    def test_zero_amplitude(self):
        fit = fit_sinusoid([(p, 0.0, 1.0) for p in self.PHASES])
        assert fit.amplitude == 0 and fit.phase_offset == 0

    @pytest.mark.parametrize("points", [
        [(0, 1, 1), (1, 1, 1)],
        [(0.5, 1, 1), (0.5, 1, 1), (0.5 + np.pi, -1, 1)],
        [(0, 1, 1), (1, 1, 0), (2, 1, 1)],
    ])
    def test_rejects(self, points):
        with pytest.raises(FitError):
            fit_sinusoid(points)

    @given(st.floats(0.01, 2), st.floats(-3, 3))
    def test_exact_on_model(self, amp, off):
        fit = fit_sinusoid([(p, amp * np.cos(p + off), 1.0) for p in self.PHASES])
        assert fit.residual_rms < 1e-12
        assert fit.amplitude == pytest.approx(amp, rel=1e-10)


class TestBootstrap:
    REC = CountRecord.from_array("XXX", [43, 1, 0, 0, 0, 0, 0, 0])

    def _stat(self, recs):
        return parity_expectation(recs[0], replicas=0)[0]

    def test_constant(self):
        assert bootstrap_metrics([self.REC], lambda r: 0.5, replicas=100) == (0.5, 0.0)

    def test_small_record(self):
        _, sigma = bootstrap_metrics(self.REC, self._stat, replicas=2000, seed=4)
        assert sigma == pytest.approx(0.05, abs=0.01)

    def test_large_n_matches_closed_form(self):
        rec = CountRecord.from_array("XXX", [90_000, 10_000, 0, 0, 0, 0, 0, 0])
        value, sigma = bootstrap_metrics(rec, self._stat, replicas=500, seed=1)
        closed = multinomial_sigma(0.8, 100_000)
        assert abs(sigma - closed) / closed < 0.2
        assert value == pytest.approx(0.8, abs=5 * closed)

    def test_deterministic(self):
        a = bootstrap_metrics(self.REC, self._stat, replicas=100, seed=7)
        assert a == bootstrap_metrics(self.REC, self._stat, replicas=100, seed=7)
        assert a != bootstrap_metrics(self.REC, self._stat, replicas=100, seed=8)

    def test_vector_statistic(self):
        mean, sd = bootstrap_metrics(self.REC, lambda r: np.array([1.0, r[0].total]), replicas=100)
        assert mean.shape == (2,) and sd[0] == 0

    def test_min_replicas(self):
        with pytest.raises(ValueError):
            bootstrap_metrics(self.REC, self._stat, replicas=10)

    def test_drops(self):
        calls = iter(range(10**6))

        def flaky(recs):
            if next(calls) % 5 == 0:
                raise ValueError("boom")
            return 1.0

        with pytest.raises(BootstrapError):
            bootstrap_metrics(self.REC, flaky, replicas=100)

        calls2 = iter(range(10**6))

        def rare(recs):
            if next(calls2) % 20 == 0:
                return math.nan
            return 1.0

        assert bootstrap_metrics(self.REC, rare, replicas=100) == (1.0, 0.0)

    def test_estimate_tuple(self):
        e = Estimate(1.0, 0.1)
        assert e.value == 1.0 and e.sigma == 0.1
