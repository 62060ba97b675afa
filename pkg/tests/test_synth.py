import math

import numpy as np
import numpy.testing as npt
import pytest

from topic_compose import (
    DirichletPrior,
    FixedLength,
    LogisticNormalPrior,
    PoissonLength,
    SynthConfig,
    TopicModel,
    sample_dirichlet,
    sample_document,
    sample_logistic_normal,
    synthesize,
    write_corpus_tsv,
)
from conftest import random_model
from oracles import dirichlet_second_moment


class TestPriors:
    def test_dirichlet_alpha_positive(self):
        with pytest.raises(ValueError, match="positive"):
            DirichletPrior(alpha=[0.5, 0.0])

    def test_symmetric_helper_splits_mass(self):
        p = DirichletPrior.symmetric(4, 5.0)
        npt.assert_array_equal(p.alpha, [1.25] * 4)

    def test_logistic_normal_shape_checks(self):
        with pytest.raises(ValueError, match="sigma"):
            LogisticNormalPrior(mu=[0.0, 0.0], sigma=np.eye(3))
        with pytest.raises(ValueError, match="symmetric"):
            LogisticNormalPrior(mu=[0.0, 0.0], sigma=[[1.0, 0.5], [0.0, 1.0]])

    def test_indefinite_sigma_rejected_at_sampling(self):
        prior = LogisticNormalPrior(mu=[0.0, 0.0], sigma=[[1.0, 0.0], [0.0, -1.0]])
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="semidefinite"):
            sample_logistic_normal(prior.mu, prior.sigma, rng)

    def test_lengths_validated(self):
        with pytest.raises(ValueError):
            FixedLength(0)
        with pytest.raises(ValueError):
            PoissonLength(0.5)


class TestSampleDirichlet:
    def test_single_topic_exact(self):
        rng = np.random.default_rng(1)
        npt.assert_array_equal(sample_dirichlet([2.5], rng), [1.0])

    def test_mean_matches_analytic(self):
        rng = np.random.default_rng(2)
        alpha = np.full(5, 1.0)
        draws = np.array([sample_dirichlet(alpha, rng) for _ in range(100_000)])
        npt.assert_allclose(draws.mean(axis=0), 0.2, atol=0.01)

    def test_variance_matches_analytic(self):
        rng = np.random.default_rng(3)
        draws = np.array([sample_dirichlet([1.0, 1.0], rng) for _ in range(100_000)])
        # Dir(1,1) coordinate is uniform on [0,1]: variance 1/12
        assert draws[:, 0].var() == pytest.approx(1.0 / 12.0, abs=0.005)

    def test_always_on_simplex(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            w = sample_dirichlet(np.full(8, 0.05), rng)
            assert abs(w.sum() - 1.0) <= 1e-12 and w.min() >= 0.0


class TestSampleLogisticNormal:
    def test_zero_covariance_is_softmax(self):
        rng = np.random.default_rng(5)
        w = sample_logistic_normal([1.0, 0.0], np.zeros((2, 2)), rng)
        e = math.exp(1.0)
        npt.assert_allclose(w, [e / (e + 1.0), 1.0 / (e + 1.0)], atol=1e-15)
        assert w[0] == pytest.approx(0.7311, abs=1e-4)

    def test_symmetric_coordinates_balanced(self):
        rng = np.random.default_rng(6)
        draws = np.array([
            sample_logistic_normal(np.zeros(2), np.eye(2), rng)
            for _ in range(100_000)
        ])
        assert draws[:, 0].mean() == pytest.approx(0.5, abs=0.01)

    def test_on_simplex(self):
        rng = np.random.default_rng(7)
        sigma = np.array([[1.0, 0.8], [0.8, 1.0]])
        for _ in range(200):
            w = sample_logistic_normal(np.zeros(2), sigma, rng)
            assert abs(w.sum() - 1.0) <= 1e-12 and w.min() >= 0.0

    def test_psd_repair_accepts_tiny_negative_eigenvalue(self):
        # rank-one covariance perturbed just below zero still factors
        v = np.array([1.0, -1.0])
        sigma = np.outer(v, v) - 5e-11 * np.eye(2)
        rng = np.random.default_rng(8)
        w = sample_logistic_normal(np.zeros(2), sigma, rng)
        assert abs(w.sum() - 1.0) <= 1e-12


class TestSampleDocument:
    def test_deterministic_category(self):
        rng = np.random.default_rng(9)
        idx, cnt = sample_document(np.eye(2), np.array([1.0, 0.0]), 5, rng)
        npt.assert_array_equal(idx, [0])
        npt.assert_array_equal(cnt, [5])

    def test_frequency_concentrates(self):
        rng = np.random.default_rng(10)
        idx, cnt = sample_document(np.eye(2), np.array([0.5, 0.5]), 100_000, rng)
        freq = cnt[list(idx).index(0)] / 100_000
        assert freq == pytest.approx(0.5, abs=0.005)

    def test_single_token(self):
        rng = np.random.default_rng(11)
        idx, cnt = sample_document(np.eye(3), np.array([0.2, 0.5, 0.3]), 1, rng)
        assert idx.size == 1 and cnt[0] == 1


class TestSynthesize:
    def test_single_doc_single_topic(self):
        m = TopicModel(B=np.ones((2, 1)) / 2, A=[[1.0]])
        cfg = SynthConfig(prior=DirichletPrior.symmetric(1), docs=1,
                          doc_length=FixedLength(4), seed=0)
        out = synthesize(m, cfg)
        npt.assert_array_equal(out.Wstar.W, [[1.0]])
        npt.assert_array_equal(out.Astar, [[1.0]])
        assert out.corpus.lengths[0] == 4

    def test_moment_matches_analytic_dirichlet(self):
        m = random_model(N=30, K=5, seed=20)
        alpha = np.full(5, 1.0)
        cfg = SynthConfig(prior=DirichletPrior(alpha), docs=10_000,
                          doc_length=FixedLength(5), seed=21)
        out = synthesize(m, cfg, threads=4)
        expected = dirichlet_second_moment(alpha)
        assert np.abs(out.Astar - expected).max() <= 0.01

    def test_wstar_columns_on_simplex(self):
        m = random_model(N=20, K=4, seed=22)
        cfg = SynthConfig(prior=DirichletPrior.symmetric(4, 5.0), docs=300,
                          doc_length=PoissonLength(30.0), seed=23)
        out = synthesize(m, cfg)
        npt.assert_allclose(out.Wstar.W.sum(axis=0), 1.0, atol=1e-12)
        assert np.abs(out.Astar - out.Astar.T).max() <= 1e-10
        assert abs(out.Astar.sum() - 1.0) <= 1e-10

    def test_poisson_lengths_never_empty_and_mean_close(self):
        m = random_model(N=25, K=3, seed=24)
        cfg = SynthConfig(prior=DirichletPrior.symmetric(3, 5.0), docs=4000,
                          doc_length=PoissonLength(12.0), seed=25)
        out = synthesize(m, cfg)
        assert out.corpus.lengths.min() >= 1
        assert out.corpus.lengths.mean() == pytest.approx(12.0, abs=0.3)

    def test_seed_reproducible_files(self, tmp_path):
        m = random_model(N=20, K=3, seed=26)
        cfg = SynthConfig(prior=DirichletPrior.symmetric(3, 5.0), docs=50,
                          doc_length=FixedLength(42), seed=42)
        a = synthesize(m, cfg)
        b = synthesize(m, cfg)
        pa, pb = tmp_path / "a.tsv", tmp_path / "b.tsv"
        write_corpus_tsv(pa, a.corpus)
        write_corpus_tsv(pb, b.corpus)
        assert pa.read_bytes() == pb.read_bytes()
        npt.assert_array_equal(a.Wstar.W, b.Wstar.W)

    def test_threads_do_not_change_output(self):
        m = random_model(N=20, K=4, seed=27)
        cfg = SynthConfig(prior=DirichletPrior.symmetric(4, 5.0), docs=700,
                          doc_length=PoissonLength(20.0), seed=28)
        a = synthesize(m, cfg, threads=1)
        b = synthesize(m, cfg, threads=4)
        npt.assert_array_equal(a.Wstar.W, b.Wstar.W)
        npt.assert_array_equal(a.corpus.counts, b.corpus.counts)
        npt.assert_array_equal(a.corpus.words, b.corpus.words)

    def test_logistic_normal_end_to_end(self):
        m = random_model(N=20, K=4, seed=29)
        sigma = 0.5 * np.eye(4) + 0.1
        prior = LogisticNormalPrior(mu=np.zeros(4), sigma=sigma)
        cfg = SynthConfig(prior=prior, docs=100, doc_length=FixedLength(15), seed=30)
        out = synthesize(m, cfg)
        npt.assert_allclose(out.Wstar.W.sum(axis=0), 1.0, atol=1e-12)

    def test_prior_topic_count_must_match(self):
        m = random_model(N=20, K=4, seed=31)
        cfg = SynthConfig(prior=DirichletPrior.symmetric(3), docs=5,
                          doc_length=FixedLength(5), seed=0)
        with pytest.raises(ValueError, match="topics"):
            synthesize(m, cfg)
