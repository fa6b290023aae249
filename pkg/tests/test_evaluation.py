import numpy as np
import pytest

from hybridsed.channel import ChannelParams, ChannelRealization, NoiseParams, gen_channel, ground_truth_subspaces
from hybridsed.config import ExperimentConfig
from hybridsed.decomposition import BcdOptions, project_unit_modulus
from hybridsed.errors import ConfigurationError, NumericalError
from hybridsed.estimation import EchoMode, EchoVariant, chordal_distance
from hybridsed.evaluation import (
    HybridFactors,
    LinkBudget,
    RateRecord,
    allocation_rate,
    hybrid_overhead,
    ideal_digital_rate,
    independent_sounding,
    monte_carlo_rate,
    sed_pipeline,
    simulate_trial,
    user_rate,
    waterfill,
)
from hybridsed.numerics import dft_matrix, random_orthonormal, qr_thin

from conftest import cgauss


def random_hybrid(rng, m, n, d):
    f = project_unit_modulus(cgauss(rng, m, d))
    g = cgauss(rng, d, d)
    g *= np.sqrt(d) / np.linalg.norm(f @ g)
    w = project_unit_modulus(cgauss(rng, n, d))
    return HybridFactors(f, g, w, cgauss(rng, d, d))


def brute_force_pair(h, r):
    n, m = h.shape
    dt, dr = dft_matrix(m), dft_matrix(n)
    scores = {(i, j): np.linalg.norm(dr[:, j * r:(j + 1) * r].conj().T @ h @ dt[:, i * r:(i + 1) * r])
              for i in range(m // r) for j in range(n // r)}
    return max(scores, key=scores.get)


class TestUserRate:
    def test_identity_link(self):
        d = 3
        ch = ChannelRealization.from_matrix(np.eye(d))
        rate = user_rate(ch, HybridFactors.fully_digital(np.eye(d), np.eye(d)), LinkBudget(2.0, 0.5))
        assert rate == pytest.approx(d * np.log2(1 + 2.0 / (d * 0.5)))

    def test_svd_filters_closed_form(self, small_channel):
        gamma1, phi1, s = ground_truth_subspaces(small_channel, 2)
        budget = LinkBudget.from_snr_db(5.0)
        rate = user_rate(small_channel, HybridFactors.fully_digital(gamma1, phi1), budget)
        expected = np.sum(np.log2(1 + budget.p_s * s**2 / (2 * budget.sigma_r_sq)))
        assert rate == pytest.approx(expected, rel=1e-12)
        assert rate == pytest.approx(ideal_digital_rate(small_channel, 2, budget), rel=1e-12)

    def test_combiner_whitening_invariance(self, small_channel, rng):
        factors = random_hybrid(rng, 16, 8, 2)
        budget = LinkBudget.from_snr_db(10.0)
        base = user_rate(small_channel, factors, budget)
        r = cgauss(rng, 2, 2)
        mixed = HybridFactors(factors.f_analog, factors.g_digital, factors.w_analog, factors.u_digital @ r)
        assert user_rate(small_channel, mixed, budget) == pytest.approx(base, abs=1e-9)
        v = random_orthonormal(rng, 2, 2)
        rotated = HybridFactors(factors.f_analog, factors.g_digital @ v, factors.w_analog, factors.u_digital)
        assert user_rate(small_channel, rotated, budget) == pytest.approx(base, abs=1e-9)

    def test_svd_filters_beat_random_hybrid(self, small_channel):
        rng = np.random.default_rng(17)
        gamma1, phi1, _ = ground_truth_subspaces(small_channel, 2)
        budget = LinkBudget.from_snr_db(0.0)
        best = user_rate(small_channel, HybridFactors.fully_digital(gamma1, phi1), budget)
        for _ in range(200):
            assert user_rate(small_channel, random_hybrid(rng, 16, 8, 2), budget) <= best + 1e-9

    def test_rank_deficient_combiner(self, small_channel, rng):
        w = np.zeros((8, 2), dtype=complex)
        factors = HybridFactors(random_orthonormal(rng, 16, 2), np.eye(2), w, np.eye(2))
        with pytest.raises(NumericalError):
            user_rate(small_channel, factors, LinkBudget())


class TestIdealRate:
    def test_single_term(self):
        ch = ChannelRealization.from_matrix(np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert ideal_digital_rate(ch, 1, LinkBudget(1.0, 1.0)) == pytest.approx(np.log2(5))

    def test_dominates_hybrid(self):
        rng = np.random.default_rng(3)
        budget = LinkBudget.from_snr_db(10.0)
        for _ in range(100):
            ch = gen_channel(ChannelParams(16, 8, 3), rng)
            assert user_rate(ch, random_hybrid(rng, 16, 8, 2), budget) <= ideal_digital_rate(ch, 2, budget) + 1e-9

    def test_monotone_in_power(self, small_channel):
        rates = [ideal_digital_rate(small_channel, 2, LinkBudget(p, 1.0)) for p in np.logspace(-2, 2, 9)]
        assert np.all(np.diff(rates) >= 0)


class TestWaterfill:
    def test_equal_sigmas(self):
        np.testing.assert_allclose(waterfill([2.0, 2.0, 2.0], 3.0), [1.0, 1.0, 1.0])

    def test_low_power_dominant_mode(self):
        np.testing.assert_allclose(waterfill([10.0, 1.0, 0.5], 0.01), [0.01, 0.0, 0.0])

    def test_beats_equal_split(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            s = rng.uniform(0.05, 3.0, 4)
            p = waterfill(s, 2.0, 0.7)
            assert p.sum() == pytest.approx(2.0)
            assert np.all(p >= 0)
            assert allocation_rate(s, p, 0.7) >= allocation_rate(s, np.full(4, 0.5), 0.7) - 1e-12


class TestIndependentSounding:
    def test_single_block_is_svd(self, small_channel):
        ch = gen_channel(ChannelParams(8, 8, 2), np.random.default_rng(1))
        factors, overhead = independent_sounding(ch, 2, 8)
        assert overhead.channel_uses == 1
        eff = dft_matrix(8).conj().T @ ch.h @ dft_matrix(8)
        s = np.linalg.svd(eff, compute_uv=False)
        got = np.linalg.svd(factors.combiner.conj().T @ ch.h @ factors.precoder, compute_uv=False)
        np.testing.assert_allclose(got, s[:2], rtol=1e-12)

    def test_pair_matches_brute_force(self):
        rng = np.random.default_rng(5)
        dt, dr = dft_matrix(16), dft_matrix(8)
        for _ in range(20):
            ch = gen_channel(ChannelParams(16, 8, 4), rng)
            factors, _ = independent_sounding(ch, 2, 4)
            i, j = brute_force_pair(ch.h, 4)
            np.testing.assert_array_equal(factors.f_analog, dt[:, 4 * i:4 * i + 4])
            np.testing.assert_array_equal(factors.w_analog, dr[:, 4 * j:4 * j + 4])

    def test_overhead_count(self):
        ch = gen_channel(ChannelParams(64, 32, 4), np.random.default_rng(0))
        assert independent_sounding(ch, 2, 8)[1].channel_uses == 32

    def test_spectral_metric_runs(self, small_channel):
        factors, _ = independent_sounding(small_channel, 2, 4, metric="spectral")
        assert factors.streams == 2


class TestSedPipeline:
    def test_noiseless_digital_no_estimation_error(self):
        ch = gen_channel(ChannelParams(32, 16, 4), np.random.default_rng(6))
        gamma1, phi1, _ = ground_truth_subspaces(ch, 2)
        factors, overhead, details = sed_pipeline(
            ch, 2, 5, EchoMode(streams=2, rf_chains=2), rng=np.random.default_rng(0), return_details=True)
        assert chordal_distance(details["gamma_est"], gamma1) < 1e-6
        assert chordal_distance(details["phi_est"], phi1) < 1e-6
        span = qr_thin(factors.precoder)[0]
        assert abs(chordal_distance(span, gamma1) - chordal_distance(span, details["gamma_est"])) < 1e-6
        assert overhead.channel_uses == 20

    @pytest.mark.parametrize("m,n,r,m_steps,expected", [(32, 16, 4, 6, 144), (64, 32, 8, 6, 144), (64, 32, 8, 4, 96)])
    def test_hybrid_overhead(self, m, n, r, m_steps, expected):
        # eight paths so the Krylov space cannot saturate within six echoes
        ch = gen_channel(ChannelParams(m, n, 8), np.random.default_rng(2))
        mode = EchoMode(EchoVariant.HYBRID_RAID, NoiseParams(), rf_chains=r, streams=2)
        _, overhead = sed_pipeline(ch, 2, m_steps, mode, BcdOptions(max_iters=50), np.random.default_rng(0))
        assert overhead.channel_uses == expected == hybrid_overhead(m_steps, m, n, r)
        assert overhead.m_eff_forward == overhead.m_eff_reverse == m_steps

    def test_saturation_cuts_overhead(self):
        # echoes stay in range(H^H) (rank 4), so the fifth echo breaks down
        ch = gen_channel(ChannelParams(64, 32, 4), np.random.default_rng(2))
        mode = EchoMode(EchoVariant.HYBRID_RAID, NoiseParams(), rf_chains=8, streams=2)
        _, overhead = sed_pipeline(ch, 2, 6, mode, BcdOptions(max_iters=50), np.random.default_rng(0))
        assert overhead.m_eff_forward == overhead.m_eff_reverse == 5
        assert overhead.channel_uses == hybrid_overhead(5, 64, 32, 8) == 120
        noisy = EchoMode(EchoVariant.HYBRID_RAID, NoiseParams(0.01, 0.01), rf_chains=8, streams=2)
        _, overhead = sed_pipeline(ch, 2, 6, noisy, BcdOptions(max_iters=50), np.random.default_rng(0))
        assert overhead.channel_uses == 144

    def test_power_constraint(self, small_channel):
        mode = EchoMode(EchoVariant.HYBRID_RAID, NoiseParams(0.1, 0.1), rf_chains=4, streams=2)
        factors, _ = sed_pipeline(small_channel, 2, 4, mode, rng=np.random.default_rng(1))
        assert np.linalg.norm(factors.precoder) ** 2 <= 2 + 1e-9
        assert np.linalg.norm(factors.combiner) ** 2 <= 2 + 1e-9

    def test_d_exceeds_m(self, small_channel):
        with pytest.raises(ConfigurationError):
            sed_pipeline(small_channel, 3, 2, EchoMode(rf_chains=4, streams=3))


class TestMonteCarlo:
    config = ExperimentConfig(m_antennas=16, n_antennas=8, rf_chains=4, streams=(2,), paths=4,
                              arnoldi_steps=4, snr_db=(-10.0, 0.0, 10.0), trials=3, master_seed=9,
                              bcd_max_iters=100)

    def test_reproducible(self):
        a = monte_carlo_rate(self.config.replace(trials=1))
        b = monte_carlo_rate(self.config.replace(trials=1))
        assert [r.to_csv_row() for r in a] == [r.to_csv_row() for r in b]

    def test_sorted_and_complete(self):
        records = monte_carlo_rate(self.config)
        keys = [(r.snr_db, r.scheme) for r in records]
        assert keys == sorted(keys) and len(keys) == 3 * 4

    def test_ideal_dominates_and_monotone(self):
        records = monte_carlo_rate(self.config)
        for snr in self.config.snr_db:
            at = {r.scheme: r.mean_rate for r in records if r.snr_db == snr}
            assert all(at["ideal-digital"] >= v - 1e-12 for v in at.values())
        for scheme in self.config.schemes:
            curve = [r.mean_rate for r in records if r.scheme == scheme]
            assert np.all(np.diff(curve) >= 0)

    def test_trials_do_not_perturb_each_other(self):
        one = simulate_trial(self.config, 1)
        again = simulate_trial(self.config.replace(trials=50), 1)
        for scheme in self.config.schemes:
            np.testing.assert_array_equal(one.rates[scheme], again.rates[scheme])

    def test_noisy_echo_mode(self):
        records = monte_carlo_rate(self.config.replace(echo_noise=True, trials=2))
        assert all(r.mean_rate >= 0 and r.std_rate >= 0 for r in records)

    def test_csv_row(self):
        row = RateRecord(0.1, "ideal-digital", 1 / 3, 0.0, 96, 2).to_csv_row()
        snr, _, mean, *_ = row.split(",")
        assert float(snr) == 0.1 and float(mean) == 1 / 3
