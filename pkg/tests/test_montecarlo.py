import numpy as np
import pytest

from seqleak import (
    DecodingSpec,
    FreqEstimate,
    NormalizationSpec,
    SamplerConfig,
    SequenceRecord,
    TableModel,
    estimate_leak_freq,
    estimate_partial_freq,
    exact_sample_probability,
    n_isp_bruteforce,
    record_rng,
    rollout_mismatch_hist,
    sample_suffix,
)

NORM = NormalizationSpec()
SAMPLE = DecodingSpec.sample()
GREEDY = DecodingSpec.greedy()


class TestRecordRng:
    def test_same_inputs_same_stream(self):
        a = record_rng(7, "rec-1").random(5)
        b = record_rng(7, "rec-1").random(5)
        assert np.array_equal(a, b)

    def test_distinct_records_distinct_streams(self):
        a = record_rng(7, "rec-1").random(5)
        b = record_rng(7, "rec-2").random(5)
        assert not np.array_equal(a, b)

    def test_seed_changes_stream(self):
        a = record_rng(7, "rec-1").random(5)
        b = record_rng(8, "rec-1").random(5)
        assert not np.array_equal(a, b)


class TestFreqEstimate:
    def test_freq_and_stderr(self):
        est = FreqEstimate(hits=25, trials=100)
        assert est.freq == 0.25
        assert est.stderr == pytest.approx(np.sqrt(0.25 * 0.75 / 100))

    def test_within_uses_target_band_when_no_hits(self):
        # zero observed hits must not auto-reject a tiny but nonzero target
        est = FreqEstimate(hits=0, trials=10_000)
        assert est.stderr == 0.0
        assert est.within(1e-5)
        assert not est.within(0.5)

    def test_degenerate_all_hits(self):
        est = FreqEstimate(hits=100, trials=100)
        assert est.within(1.0)


class TestSampleSuffix:
    def test_one_hot_chain_forced(self):
        m = TableModel(3, [0.0, 1.0, 0.0], {(0, 1): [0.0, 0.0, 1.0]})
        rng = np.random.Generator(np.random.Philox(0))
        assert sample_suffix(m, NORM, SAMPLE, (0,), 2, rng) == [1, 2]

    def test_greedy_rollout_deterministic(self):
        m = TableModel(3, [0.2, 0.5, 0.3])
        out1 = sample_suffix(m, NORM, GREEDY, (0,), 4,
                             np.random.Generator(np.random.Philox(1)))
        out2 = sample_suffix(m, NORM, GREEDY, (0,), 4,
                             np.random.Generator(np.random.Philox(99)))
        assert out1 == out2 == [1, 1, 1, 1]

    def test_bad_length(self):
        m = TableModel(2, [0.5, 0.5])
        with pytest.raises(ValueError):
            sample_suffix(m, NORM, SAMPLE, (0,), 0,
                          np.random.Generator(np.random.Philox(0)))


class TestRolloutHist:
    def test_reproducible(self):
        m = TableModel(4, [0.4, 0.3, 0.2, 0.1])
        rec = SequenceRecord("r", (0,), (1, 2, 3))
        cfg = SamplerConfig(trials=500, seed=3)
        h1 = rollout_mismatch_hist(m, NORM, SAMPLE, rec, cfg)
        h2 = rollout_mismatch_hist(m, NORM, SAMPLE, rec, cfg)
        assert np.array_equal(h1, h2)

    def test_histogram_partitions_trials(self):
        m = TableModel(4, [0.4, 0.3, 0.2, 0.1])
        rec = SequenceRecord("r", (0,), (1, 2))
        cfg = SamplerConfig(trials=999, seed=5)
        hist = rollout_mismatch_hist(m, NORM, SAMPLE, rec, cfg)
        assert hist.shape == (rec.m + 1,)
        assert hist.sum() == 999

    def test_deterministic_model_all_zero_mismatch(self):
        m = TableModel(2, [0.0, 1.0], {(0, 1): [1.0, 0.0]})
        rec = SequenceRecord("r", (0,), (1, 0))
        hist = rollout_mismatch_hist(m, NORM, SAMPLE, rec,
                                     SamplerConfig(trials=200, seed=0))
        assert hist[0] == 200

    def test_anti_suffix_all_full_mismatch(self):
        # the model never emits the recorded suffix tokens
        m = TableModel(2, [1.0, 0.0], {(0, 0): [1.0, 0.0]})
        rec = SequenceRecord("r", (0,), (1, 1))
        hist = rollout_mismatch_hist(m, NORM, SAMPLE, rec,
                                     SamplerConfig(trials=200, seed=0))
        assert hist[2] == 200

    def test_topk_full_width_matches_sample_bitwise(self):
        # the uniforms and inverse-CDF walk are identical when no token is cut
        m = TableModel(4, [0.4, 0.3, 0.2, 0.1])
        rec = SequenceRecord("r", (0,), (1, 2, 0))
        cfg = SamplerConfig(trials=400, seed=11)
        h_sample = rollout_mismatch_hist(m, NORM, SAMPLE, rec, cfg)
        h_topk = rollout_mismatch_hist(m, NORM, DecodingSpec.top_k(4), rec, cfg)
        assert np.array_equal(h_sample, h_topk)

    def test_truncated_suffix_never_hit(self):
        # suffix token falls outside top-k, so verbatim emission is impossible
        m = TableModel(3, [0.5, 0.3, 0.2])
        rec = SequenceRecord("r", (0,), (2,))
        est = estimate_leak_freq(m, NORM, DecodingSpec.top_k(2), rec,
                                 SamplerConfig(trials=300, seed=1))
        assert est.freq == 0.0


class TestAgainstClosedForm:
    def test_leak_freq_within_4_sigma(self):
        rng = np.random.Generator(np.random.Philox(101))
        for trial in range(5):
            v = int(rng.integers(3, 6))
            probs = rng.dirichlet(np.ones(v) * 3.0)
            m = TableModel(v, probs)
            suffix = tuple(int(t) for t in rng.integers(0, v, size=2))
            rec = SequenceRecord(f"r{trial}", (0,), suffix)
            esp = exact_sample_probability(m, NORM, SAMPLE, rec)
            est = estimate_leak_freq(m, NORM, SAMPLE, rec,
                                     SamplerConfig(trials=40_000, seed=trial))
            assert est.within(esp), (esp, est.freq, est.stderr)

    def test_partial_freq_within_4_sigma(self):
        rng = np.random.Generator(np.random.Philox(202))
        v = 4
        probs = rng.dirichlet(np.ones(v) * 3.0)
        m = TableModel(v, probs)
        rec = SequenceRecord("r", (0,), (1, 2))
        target = n_isp_bruteforce(m, NORM, SAMPLE, rec, 1)
        est = estimate_partial_freq(m, NORM, SAMPLE, rec, 1,
                                    SamplerConfig(trials=40_000, seed=0))
        assert est.within(target), (target, est.freq, est.stderr)

    def test_bad_n(self):
        m = TableModel(2, [0.5, 0.5])
        rec = SequenceRecord("r", (0,), (1,))
        with pytest.raises(ValueError):
            estimate_partial_freq(m, NORM, SAMPLE, rec, 2,
                                  SamplerConfig(trials=10, seed=0))


class TestSamplerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(trials=0)
        SamplerConfig(trials=1)  # minimum accepted
