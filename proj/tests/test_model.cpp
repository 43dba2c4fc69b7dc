#include "lcd/model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

namespace lcd {
namespace {

// ---------------------------------------------------------------------------
// Noise specification
// ---------------------------------------------------------------------------

TEST(NoiseSpec, CumulantFormula) {
    NoiseSpec n{1.7};
    EXPECT_DOUBLE_EQ(n.cumulant(1), 0.0);
    EXPECT_DOUBLE_EQ(n.cumulant(2), 1.7 * 1.7);
    EXPECT_DOUBLE_EQ(n.cumulant(3), 2.0 * 1.7 * 1.7 * 1.7);
    EXPECT_DOUBLE_EQ(n.cumulant(4), 6.0 * 1.7 * 1.7 * 1.7 * 1.7);
    EXPECT_THROW(n.cumulant(0), std::invalid_argument);
}

TEST(NoiseSpec, UnitCumulantScale) {
    for (int d = 2; d <= 4; ++d) {
        NoiseSpec n{NoiseSpec::unit_cumulant_theta(d)};
        EXPECT_NEAR(n.cumulant(d), 1.0, 1e-15);
    }
    EXPECT_NEAR(NoiseSpec::unit_cumulant_theta(3), std::pow(2.0, -1.0 / 3.0), 1e-15);
}

TEST(NoiseSpec, SamplesAreCenteredWithMatchingVariance) {
    NoiseSpec n{1.3};
    Rng rng(5);
    const int N = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < N; ++i) {
        double x = n.sample(rng);
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / N;
    double var = sumsq / N - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(var, n.cumulant(2), 0.05 * n.cumulant(2));
}

// ---------------------------------------------------------------------------
// Generator structure
// ---------------------------------------------------------------------------

TEST(SampleModel, RejectsBadShapes) {
    Rng rng(1);
    EXPECT_THROW(sample_model(1, 3, 0.5, InterventionKind::perfect, 3, rng),
                 std::invalid_argument);
    EXPECT_THROW(sample_model(3, 1, 0.5, InterventionKind::perfect, 3, rng),
                 std::invalid_argument);
    EXPECT_THROW(sample_model(3, 3, 0.5, InterventionKind::perfect, 5, rng),
                 std::invalid_argument);
}

TEST(SampleModel, SupportMatchesDagExactly) {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        LcdModel m = sample_model(5, 4, 0.75, InterventionKind::perfect, 3, rng);
        for (int i = 1; i <= m.q; ++i)
            for (int j = 1; j <= m.q; ++j) {
                bool nonzero = m.lambda0(i - 1, j - 1) != 0.0;
                EXPECT_EQ(nonzero, m.dag.has_edge(j, i));
                if (nonzero) {
                    double mag = std::abs(m.lambda0(i - 1, j - 1));
                    EXPECT_GE(mag, 0.25);
                    EXPECT_LE(mag, 1.0);
                }
            }
    }
}

TEST(SampleModel, CanonicalNoiseHasUnitCumulant) {
    Rng rng(7);
    for (int d = 3; d <= 4; ++d) {
        LcdModel m = sample_model(5, 3, 0.75, InterventionKind::perfect, d, rng);
        for (const NoiseSpec& n : m.noise0) EXPECT_NEAR(n.cumulant(d), 1.0, 1e-15);
        // Intervened targets move the cumulant away from 1 by a clear margin.
        for (int k = 1; k <= m.q; ++k) {
            double ratio = m.noise(k)[k - 1].theta / m.noise0[k - 1].theta;
            EXPECT_GE(ratio, 1.5);
            EXPECT_LE(ratio, 2.5);
        }
    }
}

TEST(SampleModel, PerfectContextsZeroTheTargetRowOnly) {
    Rng rng(11);
    LcdModel m = sample_model(5, 4, 0.9, InterventionKind::perfect, 3, rng);
    ASSERT_EQ(m.num_contexts(), 4);
    for (int k = 1; k <= 4; ++k) {
        EXPECT_EQ(m.contexts[k - 1].target, k);
        const Matrix& L = m.lambda(k);
        EXPECT_EQ(L.row(k - 1).cwiseAbs().maxCoeff(), 0.0);
        for (int i = 0; i < 4; ++i)
            if (i != k - 1) EXPECT_EQ(L.row(i), m.lambda0.row(i));
    }
}

TEST(SampleModel, SoftContextsChangeEverySupportEntryOfTheTargetRow) {
    Rng rng(13);
    LcdModel m = sample_model(5, 4, 0.9, InterventionKind::soft, 3, rng);
    for (int k = 1; k <= 4; ++k) {
        const Matrix& L = m.lambda(k);
        for (int j = 0; j < 4; ++j) {
            double base = m.lambda0(k - 1, j);
            if (base != 0.0)
                EXPECT_NE(L(k - 1, j), base);
            else
                EXPECT_EQ(L(k - 1, j), 0.0);
        }
        for (int i = 0; i < 4; ++i)
            if (i != k - 1) EXPECT_EQ(L.row(i), m.lambda0.row(i));
    }
}

TEST(SampleModel, OvercompleteShapesDrawFDirectly) {
    Rng rng(17);
    LcdModel m = sample_model(4, 6, 0.75, InterventionKind::perfect, 4, rng);
    EXPECT_EQ(m.F.rows(), 4);
    EXPECT_EQ(m.F.cols(), 6);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_LE(std::abs(m.F(r, c)), 2.0);
}

TEST(LcdModel, ContextAccessorsValidateTheIndex) {
    Rng rng(19);
    LcdModel m = sample_model(4, 3, 0.5, InterventionKind::perfect, 3, rng);
    EXPECT_EQ(&m.lambda(0), &m.lambda0);
    EXPECT_THROW(m.lambda(4), std::invalid_argument);
    EXPECT_THROW(m.noise(-1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Mixing matrices against the path enumeration oracle
// ---------------------------------------------------------------------------

TEST(MixingMatrix, MatchesBruteForcePathEnumeration) {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        LcdModel m = sample_model(5, 5, 0.6, InterventionKind::perfect, 3, rng);
        for (int k = 0; k <= m.num_contexts(); ++k) {
            // Paths through an intervened-away edge pick up its zero weight,
            // so the oracle can enumerate over the observational DAG.
            Matrix want = m.F * support::path_sum_matrix(m.dag, m.lambda(k));
            Matrix got = mixing_matrix(m, k);
            EXPECT_LE((want - got).norm(), 1e-10 * want.norm());
        }
    }
}

TEST(MixingMatrix, SingularSystemIsReported) {
    LcdModel m;
    m.p = 2;
    m.q = 2;
    m.F = Matrix::Identity(2, 2);
    m.lambda0 = Matrix::Identity(2, 2); // I - lambda0 is singular
    EXPECT_THROW(mixing_matrix(m, 0), NumericalError);
}

// ---------------------------------------------------------------------------
// Population cumulants
// ---------------------------------------------------------------------------

TEST(PopulationCumulant, TwoByTwoEntryOracle) {
    Rng rng(29);
    LcdModel m = sample_model(2, 2, 1.0, InterventionKind::perfect, 3, rng);
    Matrix A = mixing_matrix(m, 0);
    SymmetricTensor t = population_cumulant(m, 0, 3);
    // Entry (1,1,2), written out index by index.
    double want = 0.0;
    for (int i = 0; i < 2; ++i)
        want += m.noise0[i].cumulant(3) * A(0, i) * A(0, i) * A(1, i);
    EXPECT_NEAR(t.at(0, 0, 1), want, 1e-12 * std::abs(want) + 1e-14);
}

TEST(PopulationCumulant, SingleLatentNodeGivesRankOneTensor) {
    LcdModel m;
    m.p = 3;
    m.q = 2;
    m.dag = Dag(2);
    m.F.resize(3, 2);
    m.F << 1.0, 0.0, 2.0, 0.0, -1.5, 0.0; // second latent column unused
    m.lambda0 = Matrix::Zero(2, 2);
    m.noise0 = {NoiseSpec{1.1}, NoiseSpec{0.0}};
    SymmetricTensor t = population_cumulant(m, 0, 3);
    Vector f = m.F.col(0);
    double k3 = m.noise0[0].cumulant(3);
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j)
            for (int l = j; l < 3; ++l)
                EXPECT_NEAR(t.at(i, j, l), k3 * f[i] * f[j] * f[l], 1e-12);
}

TEST(PopulationCumulant, InvariantUnderScalingAndPermutationOfLatents) {
    Rng rng(31);
    LcdModel m = sample_model(4, 3, 0.75, InterventionKind::perfect, 3, rng);
    const int q = m.q;

    // Relabel and rescale the latent coordinates without touching what is
    // observable: F' = F M, lambda' = M^{-1} lambda M, theta'_j =
    // theta_{sig(j)} / d_j for M mapping e_j to d_j e_{sig(j)}.
    std::vector<int> sig = {2, 0, 1};
    Vector d(q);
    for (int j = 0; j < q; ++j) d[j] = rng.uniform(0.5, 2.0);
    Matrix M = Matrix::Zero(q, q);
    for (int j = 0; j < q; ++j) M(sig[j], j) = d[j];
    Matrix Minv = M.inverse();

    LcdModel m2 = m;
    m2.F = m.F * M;
    m2.lambda0 = Minv * m.lambda0 * M;
    for (int j = 0; j < q; ++j) m2.noise0[j].theta = m.noise0[sig[j]].theta / d[j];
    for (int k = 0; k < m.num_contexts(); ++k) {
        m2.contexts[k].lambda = Minv * m.contexts[k].lambda * M;
        for (int j = 0; j < q; ++j)
            m2.contexts[k].noise[j].theta = m.contexts[k].noise[sig[j]].theta / d[j];
    }

    for (int k = 0; k <= m.num_contexts(); ++k)
        for (int dd = 2; dd <= 4; ++dd) {
            SymmetricTensor a = population_cumulant(m, k, dd);
            SymmetricTensor b = population_cumulant(m2, k, dd);
            EXPECT_LE(tensor_distance(a, b), 1e-10 * tensor_norm(a));
        }
}

// ---------------------------------------------------------------------------
// Intervention footprint on the mixing matrices
// ---------------------------------------------------------------------------

TEST(InterventionFootprint, UntouchedColumnsAreEqual) {
    Rng rng(37);
    for (int rep = 0; rep < 10; ++rep) {
        LcdModel m = sample_model(5, 4, 0.75, InterventionKind::perfect, 3, rng);
        Matrix A0 = mixing_matrix(m, 0);
        for (int k = 1; k <= m.num_contexts(); ++k) {
            Matrix Ak = mixing_matrix(m, k);
            // Only columns of nodes that reach the target pick up the row
            // change; the target's own column sums paths that cannot use the
            // removed edges.
            NodeRelations rel = relations(m.dag, k);
            for (int j = 1; j <= m.q; ++j) {
                if (j == k || rel.ancestors.count(j)) continue;
                EXPECT_LE((A0.col(j - 1) - Ak.col(j - 1)).norm(), 1e-12 * A0.col(j - 1).norm())
                    << "context " << k << " column " << j;
            }
        }
    }
}

TEST(InterventionFootprint, DifferenceHasRankAtMostOne) {
    Rng rng(41);
    for (int rep = 0; rep < 15; ++rep) {
        auto kind = rep % 2 ? InterventionKind::perfect : InterventionKind::soft;
        LcdModel m = sample_model(5, 4, 0.6, kind, 3, rng);
        Matrix A0 = mixing_matrix(m, 0);
        for (int k = 1; k <= m.num_contexts(); ++k) {
            Matrix diff = A0 - mixing_matrix(m, k);
            Eigen::JacobiSVD<Matrix> svd(diff);
            double s1 = svd.singularValues()[0];
            double s2 = svd.singularValues()[1];
            EXPECT_LE(s2, 1e-10 * std::max(s1, 1e-30));
            bool has_ancestors = !m.dag.ancestors(k).empty();
            if (has_ancestors)
                EXPECT_GT(s1, 1e-8 * A0.norm());
            else
                EXPECT_LE(s1, 1e-12 * A0.norm());
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

TEST(SampleObservations, ShapeAndCenteringAndCovariance) {
    Rng rng(43);
    LcdModel m = sample_model(4, 3, 0.75, InterventionKind::perfect, 3, rng);
    const Eigen::Index n = 100000;
    Matrix data = sample_observations(m, 0, n, rng);
    ASSERT_EQ(data.rows(), n);
    ASSERT_EQ(data.cols(), 4);

    Vector mean = data.colwise().mean();
    Matrix A = mixing_matrix(m, 0);
    Matrix cov_want = Matrix::Zero(4, 4);
    for (int i = 0; i < m.q; ++i)
        cov_want += m.noise0[i].cumulant(2) * A.col(i) * A.col(i).transpose();
    Matrix centered = data.rowwise() - mean.transpose();
    Matrix cov = centered.transpose() * centered / double(n);

    EXPECT_LE(mean.norm(), 0.05);
    EXPECT_LE((cov - cov_want).norm(), 0.1 * cov_want.norm());
}

TEST(SampleObservations, DistinctContextsUseTheirOwnParameters) {
    Rng rng(47);
    LcdModel m = sample_model(4, 3, 1.0, InterventionKind::perfect, 3, rng);
    const Eigen::Index n = 100000;
    // Variance of the target coordinate grows by the planted theta ratio.
    Matrix d0 = sample_observations(m, 0, n, rng);
    Matrix d1 = sample_observations(m, 1, n, rng);
    EXPECT_NE((d0 - d1).norm(), 0.0);
    Matrix A1 = mixing_matrix(m, 1);
    auto covn = [&](const Matrix& d) {
        Matrix c = d.rowwise() - d.colwise().mean();
        return Matrix(c.transpose() * c / double(d.rows()));
    };
    auto want = [&](const Matrix& A, int k) {
        Matrix c = Matrix::Zero(4, 4);
        for (int i = 0; i < m.q; ++i)
            c += m.noise(k)[i].cumulant(2) * A.col(i) * A.col(i).transpose();
        return c;
    };
    EXPECT_LE((covn(d1) - want(A1, 1)).norm(), 0.1 * want(A1, 1).norm());
}

} // namespace
} // namespace lcd
