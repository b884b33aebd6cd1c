import itertools
import threading

import numpy as np
import pytest

from podag import (
    CovMatrix,
    Dataset,
    GaussianEngine,
    OracleEngine,
    RecordingEngine,
    ThresholdEngine,
    fisher_z_test,
    gaussian_engine,
    oracle_engine,
    partial_correlation,
    sample_covariance,
)
from podag.errors import DegenerateDataError, InsufficientDataError, SingularityError
from podag.sem import (
    population_covariance,
    random_faithful_sem,
    rng_from_seed,
    sample,
    toy_two_layer_sem,
)

from helpers import random_layered_instance, toy_diamond


def random_pd(rng, m):
    a = rng.normal(size=(m + 2, m))
    return a.T @ a / (m + 2)


def precision_pcor(sigma, i, j, s):
    """Oracle: -Omega_ij / sqrt(Omega_ii Omega_jj) on the submatrix."""
    idx = sorted(s) + [i, j]
    omega = np.linalg.inv(sigma[np.ix_(idx, idx)])
    a, b = idx.index(i), idx.index(j)
    return -omega[a, b] / np.sqrt(omega[a, a] * omega[b, b])


def residual_corr(sigma, i, j, s):
    """Oracle: correlate the residuals of regressing i and j on s."""
    s = sorted(s)
    if not s:
        return sigma[i, j] / np.sqrt(sigma[i, i] * sigma[j, j])
    sss = sigma[np.ix_(s, s)]
    beta_i = np.linalg.solve(sss, sigma[np.ix_(s, [i])])[:, 0]
    beta_j = np.linalg.solve(sss, sigma[np.ix_(s, [j])])[:, 0]

    def residual_cov(a, b, beta_a, beta_b):
        return (
            sigma[a, b]
            - beta_a @ sigma[np.ix_(s, [b])][:, 0]
            - beta_b @ sigma[np.ix_(s, [a])][:, 0]
            + beta_a @ sss @ beta_b
        )

    cij = residual_cov(i, j, beta_i, beta_j)
    cii = residual_cov(i, i, beta_i, beta_i)
    cjj = residual_cov(j, j, beta_j, beta_j)
    return cij / np.sqrt(cii * cjj)


def regression_coefficient(sigma, i, j, s):
    """Coefficient of variable i when regressing j on s + {i}."""
    idx = sorted(s) + [i]
    block = sigma[np.ix_(idx, idx)]
    rhs = sigma[np.ix_(idx, [j])][:, 0]
    return np.linalg.solve(block, rhs)[idx.index(i)]


class TestSampleCovariance:
    def test_hand_computed_toy(self):
        d = Dataset([[1, 2], [2, 4], [3, 6]])
        cov = sample_covariance(d)
        np.testing.assert_allclose(
            cov.values, [[2 / 3, 4 / 3], [4 / 3, 8 / 3]], atol=1e-14
        )

    def test_identical_columns(self):
        d = Dataset([[1.0, 1.0], [2.0, 2.0], [4.0, 4.0]])
        cov = sample_covariance(d)
        assert cov.values[0, 1] == pytest.approx(cov.values[0, 0])

    def test_constant_column_degenerate(self):
        d = Dataset([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        with pytest.raises(DegenerateDataError):
            sample_covariance(d)

    def test_single_row_insufficient(self):
        with pytest.raises(InsufficientDataError):
            sample_covariance(Dataset([[1.0, 2.0]]))


class TestCovMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            CovMatrix([[1.0, 0.5], [0.2, 1.0]])

    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(DegenerateDataError):
            CovMatrix([[0.0, 0.0], [0.0, 1.0]])


class TestPartialCorrelation:
    def test_identity_gives_zero(self):
        cov = CovMatrix(np.eye(4), n=10)
        for s in [(), (2,), (2, 3)]:
            assert partial_correlation(cov, 0, 1, s) == 0.0

    def test_single_edge_sem_marginal(self):
        cov = CovMatrix([[1.0, 1.0], [1.0, 2.0]], n=10)
        assert partial_correlation(cov, 0, 1, ()) == pytest.approx(1 / np.sqrt(2))

    def test_chain_conditional_zero(self):
        # chain 0 -> 1 -> 2 with unit weights and noise
        m = np.array([[1.0, 0, 0], [1.0, 1.0, 0], [1.0, 1.0, 1.0]])
        cov = CovMatrix(m @ m.T)
        assert partial_correlation(cov, 0, 2, {1}) == pytest.approx(0.0, abs=1e-12)
        assert residual_corr(cov.values, 0, 2, [1]) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        rng = rng_from_seed(8)
        sigma = random_pd(rng, 5)
        cov = CovMatrix(sigma)
        for s in [(), (3,), (3, 4)]:
            assert partial_correlation(cov, 0, 1, s) == partial_correlation(cov, 1, 0, s)

    def test_overlap_rejected(self):
        cov = CovMatrix(np.eye(3))
        with pytest.raises(ValueError):
            partial_correlation(cov, 0, 1, {1})

    def test_singular_conditioning_block(self):
        sigma = np.eye(4)
        sigma[2, 3] = sigma[3, 2] = 1.0  # S block perfectly collinear
        cov = CovMatrix(sigma)
        with pytest.raises(SingularityError):
            partial_correlation(cov, 0, 1, {2, 3})

    def test_matches_precision_and_residual_oracles(self):
        rng = rng_from_seed(2024)
        for _ in range(300):
            m = int(rng.integers(3, 7))
            sigma = random_pd(rng, m)
            cov = CovMatrix(sigma)
            i, j = rng.choice(m, size=2, replace=False)
            rest = [v for v in range(m) if v not in (i, j)]
            size = int(rng.integers(0, len(rest) + 1))
            s = list(rng.choice(rest, size=size, replace=False)) if size else []
            got = partial_correlation(cov, int(i), int(j), s)
            assert got == pytest.approx(precision_pcor(sigma, int(i), int(j), s), abs=1e-9)
            assert got == pytest.approx(residual_corr(sigma, int(i), int(j), s), abs=1e-9)

    def test_zero_equivalence_with_regression_coefficient(self):
        # the three formulations share their zero set: regression
        # coefficient, partial correlation, and the conditional covariance
        rng = rng_from_seed(77)
        sems = 0
        while sems < 20:
            dag, _ = random_layered_instance(rng, n_lo=4, n_hi=7)
            sem, _ = random_faithful_sem(dag, rng)
            sigma = population_covariance(sem).values
            cov = CovMatrix(sigma)
            m = dag.n_nodes
            for i, j in itertools.combinations(range(m), 2):
                rest = [v for v in range(m) if v not in (i, j)]
                for size in range(min(len(rest), 3) + 1):
                    for s in itertools.combinations(rest, size):
                        rho = partial_correlation(cov, i, j, s)
                        beta = regression_coefficient(sigma, i, j, s)
                        schur = sigma[i, j] - (
                            sigma[np.ix_(list(s), [i])][:, 0]
                            @ np.linalg.solve(
                                sigma[np.ix_(list(s), list(s))],
                                sigma[np.ix_(list(s), [j])][:, 0],
                            )
                            if s
                            else 0.0
                        )
                        flags = (abs(rho) < 1e-9, abs(beta) < 1e-9, abs(schur) < 1e-9)
                        assert len(set(flags)) == 1, (rho, beta, schur)
            sems += 1

    def test_population_zero_iff_dsep(self):
        rng = rng_from_seed(31)
        for _ in range(8):
            dag, _ = random_layered_instance(rng, n_lo=4, n_hi=7)
            sem, _ = random_faithful_sem(dag, rng)
            cov = population_covariance(sem)
            m = dag.n_nodes
            for i, j in itertools.combinations(range(m), 2):
                rest = [v for v in range(m) if v not in (i, j)]
                for size in range(len(rest) + 1):
                    for s in itertools.combinations(rest, size):
                        rho = partial_correlation(cov, i, j, s)
                        assert (abs(rho) <= 1e-8) == dag.is_dsep(i, j, s)


class TestFisherZ:
    def test_zero_correlation_independent(self):
        cov = CovMatrix(np.eye(2), n=100)
        v = fisher_z_test(cov, 100, 0, 1, (), alpha=0.05)
        assert v.independent
        assert v.p_value == pytest.approx(1.0)

    def test_large_sample_detects_small_correlation(self):
        sigma = np.array([[1.0, 0.1], [0.1, 1.0]])
        v = fisher_z_test(CovMatrix(sigma), 1000, 0, 1, (), alpha=0.05)
        assert v.statistic == pytest.approx(3.168, abs=0.01)
        assert not v.independent

    def test_small_sample_misses_small_correlation(self):
        sigma = np.array([[1.0, 0.1], [0.1, 1.0]])
        v = fisher_z_test(CovMatrix(sigma), 20, 0, 1, (), alpha=0.05)
        assert v.statistic == pytest.approx(0.414, abs=0.01)
        assert v.independent

    def test_degrees_of_freedom_guard(self):
        cov = CovMatrix(np.eye(5), n=6)
        with pytest.raises(InsufficientDataError):
            fisher_z_test(cov, 6, 0, 1, (2, 3, 4), alpha=0.05)

    def test_perfect_correlation_dependent(self):
        sigma = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
        v = fisher_z_test(CovMatrix(sigma), 50, 0, 1, (), alpha=0.05)
        assert not v.independent
        assert v.p_value == 0.0


class TestEngines:
    def test_oracle_engine_toy(self):
        sem, _ = toy_two_layer_sem()
        eng = oracle_engine(sem.dag)
        assert eng.query(0, 3, {1, 2}).independent
        assert not eng.query(0, 1, ()).independent

    def test_oracle_engine_diamond_collider(self):
        eng = OracleEngine(toy_diamond())
        assert not eng.query(1, 2, {0, 3}).independent
        assert eng.query(1, 2, {0}).independent

    def test_counter_counts_memoized_repeats(self):
        eng = OracleEngine(toy_diamond())
        for _ in range(5):
            eng.query(1, 2, {0})
        assert eng.n_queries == 5

    def test_counter_exact_under_threads(self):
        eng = OracleEngine(toy_diamond())

        def hammer():
            for _ in range(200):
                eng.query(0, 3, ())

        threads = [threading.Thread(target=hammer) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert eng.n_queries == 1600

    def test_determinism_within_engine(self):
        sem, _ = toy_two_layer_sem()
        data = sample(sem, 200, rng_from_seed(4))
        eng = gaussian_engine(data, alpha=0.05)
        first = eng.query(0, 2, {1})
        again = eng.query(0, 2, {1})
        assert first == again

    def test_gaussian_engine_constant_column_errors_per_query(self):
        data = Dataset(np.column_stack([np.arange(10.0), np.ones(10)]))
        eng = GaussianEngine(data, alpha=0.05)
        with pytest.raises(DegenerateDataError):
            eng.query(0, 1, ())

    def test_gaussian_engine_true_independence_rate(self):
        # X2 and Y1 are d-separated by X1 in the toy SEM: at alpha=0.05 the
        # test should call independence in at least 90% of seeds
        sem, _ = toy_two_layer_sem()
        hits = 0
        dep_hits = 0
        for seed in range(100):
            data = sample(sem, 1000, rng_from_seed(seed))
            eng = gaussian_engine(data, alpha=0.05)
            hits += eng.query(1, 2, {0}).independent
            dep_hits += not eng.query(0, 2, {1}).independent
        assert hits >= 90
        assert dep_hits == 100  # true edge, strong signal

    def test_threshold_engine(self):
        sem, _ = toy_two_layer_sem()
        cov = population_covariance(sem)
        eng = ThresholdEngine(cov, threshold=0.01)
        assert eng.query(1, 2, {0}).independent
        assert not eng.query(0, 2, ()).independent

    def test_recording_engine_phases(self):
        rec = RecordingEngine(OracleEngine(toy_diamond()))
        rec.phase = "screen"
        rec.query(0, 1, ())
        rec.phase = "search"
        rec.query(1, 2, {0})
        assert rec.tuples() == [(0, 1, frozenset()), (1, 2, frozenset({0}))]
        assert rec.tuples(phases=("screen",)) == [(0, 1, frozenset())]
        assert rec.n_queries == 2


class TestDatasetCsv:
    def test_round_trip(self):
        data = Dataset([[1.5, 2.0], [3.0, -4.25]], labels=["aa", "bb"])
        text = data.to_csv()
        back = Dataset.from_csv(text)
        assert back.labels == ("aa", "bb")
        np.testing.assert_allclose(back.data, data.data)

    def test_tsv_autodetected(self):
        text = "x\ty\n1.0\t2.0\n3.0\t4.0\n"
        d = Dataset.from_csv(text)
        assert d.labels == ("x", "y")
        assert d.data.shape == (2, 2)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Dataset([[1.0, np.nan], [2.0, 3.0]])
