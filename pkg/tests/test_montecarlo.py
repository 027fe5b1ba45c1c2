import math

import numpy as np
import pytest

from phaselink.errors import InsufficientStatistics
from phaselink.montecarlo import (
    BatchStats,
    ClassCounts,
    PulsePlan,
    simulate_batch,
    split_seed,
    stats_to_observables,
)
from phaselink.rates import DecoyObservables, DetectorConfig, SourceConfig, forward_gains

SRC = SourceConfig(mu=0.71, nu=0.28)
DET = DetectorConfig(p_d=1e-6, eta_d=0.2, visibility=0.9847, eta_b=10 ** -0.65)
ETA_MEASURED = 10 ** (-17.83 / 10) * 10 ** (-6.5 / 10) * 0.2


def closed_form_se(p, n):
    """Standard error of a frequency against a known probability."""
    return math.sqrt(p * (1.0 - p) / n)


class TestPulsePlan:
    def test_schedule_frequencies(self):
        plan = PulsePlan.make(1_000_000, (30, 2, 1), seed=1)
        counts = np.bincount(plan.intensity_schedule, minlength=3)
        for c, expect in zip(counts, (30 / 33, 2 / 33, 1 / 33)):
            p_hat = c / plan.n_pulses
            assert abs(p_hat - expect) < 4 * closed_form_se(expect, plan.n_pulses)

    def test_deterministic(self):
        p1 = PulsePlan.make(10_000, (30, 2, 1), seed=7)
        p2 = PulsePlan.make(10_000, (30, 2, 1), seed=7)
        assert np.array_equal(p1.intensity_schedule, p2.intensity_schedule)


class TestSimulateBatch:
    def test_no_light_no_dark_no_clicks(self):
        det = DetectorConfig(p_d=0.0, eta_d=0.2, visibility=0.9847)
        plan = PulsePlan.make(100_000, (30, 2, 1), seed=3)
        stats = simulate_batch(plan, 0.0, SRC, det)
        assert stats.signal.clicked == 0
        assert stats.decoy.clicked == 0
        assert stats.vacuum.clicked == 0

    def test_vacuum_class_background_only(self):
        # vacuum pulses click at the dark floor with QBER 1/2
        det = DetectorConfig(p_d=1e-3, eta_d=0.2, visibility=0.9847)
        plan = PulsePlan.make(2_000_000, (1, 1, 4), seed=11)
        stats = simulate_batch(plan, 1e-3, SRC, det)
        y0 = det.y0
        assert abs(stats.vacuum.gain - y0) < 4 * closed_form_se(y0, stats.vacuum.sent)
        assert abs(stats.vacuum.qber - 0.5) < 4 * closed_form_se(0.5, stats.vacuum.clicked)

    def test_reproducible(self):
        plan = PulsePlan.make(200_000, (30, 2, 1), seed=5)
        s1 = simulate_batch(plan, ETA_MEASURED, SRC, DET)
        s2 = simulate_batch(plan, ETA_MEASURED, SRC, DET)
        assert s1 == s2

    def test_matches_closed_form_at_measured_eta(self):
        # 1e7 pulses against the closed-form gains within 4 standard errors
        obs = forward_gains(ETA_MEASURED, SRC, DET)
        plan = PulsePlan.make(10_000_000, SRC.mix_ratio, seed=20250526)
        stats = simulate_batch(plan, ETA_MEASURED, SRC, DET)
        assert abs(stats.signal.gain - obs.q_mu) < 4 * closed_form_se(obs.q_mu, stats.signal.sent)
        assert abs(stats.decoy.gain - obs.q_nu) < 4 * closed_form_se(obs.q_nu, stats.decoy.sent)

    @pytest.mark.parametrize(
        "eta,p_d,vis",
        [
            (3e-3, 1e-6, 0.9847),
            (3e-2, 1e-6, 0.95),
            (0.3, 1e-5, 0.99),
            (1.0, 1e-4, 0.9847),
            (1e-3, 1e-5, 0.92),
        ],
    )
    def test_oracle_equivalence_grid(self, eta, p_d, vis):
        det = DetectorConfig(p_d=p_d, eta_d=0.2, visibility=vis, eta_b=1.0)
        obs = forward_gains(eta, SRC, det)
        plan = PulsePlan.make(1_000_000, SRC.mix_ratio, seed=split_seed(99, int(eta * 1e6)))
        stats = simulate_batch(plan, eta, SRC, det)
        for counts, gain, qber in (
            (stats.signal, obs.q_mu, obs.e_mu),
            (stats.decoy, obs.q_nu, obs.e_nu),
        ):
            assert abs(counts.gain - gain) < 4 * closed_form_se(gain, counts.sent)
            expected_clicks = gain * counts.sent
            assert abs(counts.qber - qber) < 4 * closed_form_se(qber, expected_clicks)

    def test_gain_monotone_in_eta(self):
        gains, ses = [], []
        for i, eta in enumerate((1e-4, 1e-3, 1e-2)):
            plan = PulsePlan.make(10_000_000, SRC.mix_ratio, seed=split_seed(7, i))
            stats = simulate_batch(plan, eta, SRC, DET)
            gains.append(stats.signal.gain)
            ses.append(stats.signal.se_gain)
        assert gains[1] - gains[0] > 3 * math.hypot(ses[0], ses[1])
        assert gains[2] - gains[1] > 3 * math.hypot(ses[1], ses[2])


class TestStatsToObservables:
    def test_pipeline_at_measured_eta(self):
        from phaselink.rates import decoy_estimate

        plan = PulsePlan.make(10_000_000, SRC.mix_ratio, seed=314159)
        stats = simulate_batch(plan, ETA_MEASURED, SRC, DET)
        obs = stats_to_observables(stats)
        est = decoy_estimate(obs, SRC)
        asymptotic = decoy_estimate(forward_gains(ETA_MEASURED, SRC, DET), SRC)
        assert est.q1 > 0.0
        assert abs(est.q1 - asymptotic.q1) / asymptotic.q1 < 0.10

    def test_all_zero_clicks(self):
        stats = BatchStats(
            signal=ClassCounts(1000, 0, 0),
            decoy=ClassCounts(100, 0, 0),
            vacuum=ClassCounts(50, 0, 0),
        )
        with pytest.raises(InsufficientStatistics):
            stats_to_observables(stats)

    def test_analytic_embedding_roundtrip(self):
        obs = DecoyObservables(q_mu=5.31e-4, e_mu=0.0287, q_nu=2.09e-4, e_nu=0.0401, y0=2e-6)
        stats = BatchStats.from_observables(obs)
        back = stats_to_observables(stats)
        assert back.q_mu == obs.q_mu
        assert back.e_mu == obs.e_mu
        assert back.q_nu == obs.q_nu
        assert back.e_nu == obs.e_nu
        assert back.y0 == obs.y0

    def test_counts_validation(self):
        with pytest.raises(ValueError):
            ClassCounts(sent=10, clicked=11, errored=0)
        with pytest.raises(ValueError):
            ClassCounts(sent=10, clicked=5, errored=6)
