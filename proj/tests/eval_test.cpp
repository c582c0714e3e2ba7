#include <gtest/gtest.h>

#include <afpnet/eval.hpp>

#include "test_util.hpp"

using namespace afpnet;

TEST(ComputeMetrics, ForcedArithmetic) {
    const std::vector<int> preds{1, 1, 0, 0};
    const std::vector<int> labels{1, 0, 1, 0};
    const MetricsReport m = compute_metrics(preds, labels);
    EXPECT_EQ(m.true_positives, 1u);
    EXPECT_EQ(m.false_positives, 1u);
    EXPECT_EQ(m.false_negatives, 1u);
    EXPECT_EQ(m.true_negatives, 1u);
    EXPECT_DOUBLE_EQ(to_percent(m.precision), 50.00);
    EXPECT_DOUBLE_EQ(to_percent(m.recall), 50.00);
    EXPECT_DOUBLE_EQ(to_percent(m.f1), 50.00);
}

TEST(ComputeMetrics, AllCorrectIsPerfect) {
    const std::vector<int> preds{1, 0, 1, 0, 1};
    const MetricsReport m = compute_metrics(preds, preds);
    EXPECT_DOUBLE_EQ(to_percent(m.precision), 100.00);
    EXPECT_DOUBLE_EQ(to_percent(m.recall), 100.00);
    EXPECT_DOUBLE_EQ(to_percent(m.f1), 100.00);
}

namespace {

/// Builds decision/label vectors realizing exact confusion counts.
MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    std::vector<int> preds, labels;
    for (std::size_t i = 0; i < tp; ++i) { preds.push_back(1); labels.push_back(1); }
    for (std::size_t i = 0; i < fp; ++i) { preds.push_back(1); labels.push_back(0); }
    for (std::size_t i = 0; i < tn; ++i) { preds.push_back(0); labels.push_back(0); }
    for (std::size_t i = 0; i < fn; ++i) { preds.push_back(0); labels.push_back(1); }
    return compute_metrics(preds, labels);
}

}  // namespace

TEST(ComputeMetrics, ReproducesReportedHarmonicMeans) {
    // Counts realizing R=95.85, P=94.60 at two decimals; F1 must come out
    // 95.22. And the second reported pair: R=86.05, P=90.24 -> F1=88.10.
    {
        const MetricsReport m = metrics_from_counts(19170, 1094, 5, 830);
        ASSERT_DOUBLE_EQ(to_percent(m.recall), 95.85);
        ASSERT_DOUBLE_EQ(to_percent(m.precision), 94.60);
        EXPECT_NEAR(to_percent(m.f1), 95.22, 0.01);
    }
    {
        const MetricsReport m = metrics_from_counts(17210, 1861, 5, 2790);
        ASSERT_DOUBLE_EQ(to_percent(m.recall), 86.05);
        ASSERT_DOUBLE_EQ(to_percent(m.precision), 90.24);
        EXPECT_NEAR(to_percent(m.f1), 88.10, 0.01);
    }
}

TEST(ComputeMetrics, ZeroDenominatorsReportZeroWithFlag) {
    const std::vector<int> no_positive_preds{0, 0};
    const std::vector<int> labels{1, 0};
    const MetricsReport a = compute_metrics(no_positive_preds, labels);
    EXPECT_FALSE(a.precision_defined);
    EXPECT_EQ(a.precision, 0.0);
    EXPECT_TRUE(a.recall_defined);

    const std::vector<int> preds{0, 1};
    const std::vector<int> no_positive_labels{0, 0};
    const MetricsReport b = compute_metrics(preds, no_positive_labels);
    EXPECT_FALSE(b.recall_defined);
    EXPECT_EQ(b.recall, 0.0);
    EXPECT_FALSE(b.f1_defined);
}

TEST(ComputeMetrics, PermutationInvariant) {
    std::mt19937_64 rng(3);
    std::vector<int> preds(50), labels(50);
    for (std::size_t i = 0; i < 50; ++i) {
        preds[i] = static_cast<int>(uniform_below(rng, 2));
        labels[i] = static_cast<int>(uniform_below(rng, 2));
    }
    const MetricsReport base = compute_metrics(preds, labels);
    const std::vector<std::size_t> perm = seeded_permutation(50, 9);
    std::vector<int> preds2(50), labels2(50);
    for (std::size_t i = 0; i < 50; ++i) {
        preds2[i] = preds[perm[i]];
        labels2[i] = labels[perm[i]];
    }
    const MetricsReport shuffled = compute_metrics(preds2, labels2);
    EXPECT_EQ(base.true_positives, shuffled.true_positives);
    EXPECT_EQ(base.f1, shuffled.f1);
}

TEST(ComputeMetrics, F1BoundedByMaxOfPrecisionRecall) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const MetricsReport m =
            metrics_from_counts(uniform_below(rng, 20) + 1, uniform_below(rng, 20),
                                uniform_below(rng, 20), uniform_below(rng, 20));
        EXPECT_GE(m.precision, 0.0);
        EXPECT_LE(m.precision, 1.0);
        EXPECT_GE(m.recall, 0.0);
        EXPECT_LE(m.recall, 1.0);
        EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-12);
    }
}

TEST(ComputeMetrics, LengthMismatchRejected) {
    const std::vector<int> a{1, 0};
    const std::vector<int> b{1};
    EXPECT_THROW(compute_metrics(a, b), DataError);
}

TEST(ProjectFeatures, RecoversPlanarGeometry) {
    // points on a 2-D plane embedded in 6 dims: projection preserves
    // pairwise distances.
    std::mt19937_64 rng(5);
    std::vector<double> u(6), v(6);
    for (auto& c : u) c = testutil::urand(rng);
    // Gram-Schmidt for an orthonormal pair
    double nu = 0.0;
    for (double c : u) nu += c * c;
    for (auto& c : u) c /= std::sqrt(nu);
    for (auto& c : v) c = testutil::urand(rng);
    double uv = 0.0;
    for (std::size_t i = 0; i < 6; ++i) uv += u[i] * v[i];
    for (std::size_t i = 0; i < 6; ++i) v[i] -= uv * u[i];
    double nv = 0.0;
    for (double c : v) nv += c * c;
    for (auto& c : v) c /= std::sqrt(nv);

    std::vector<std::vector<double>> points;
    std::vector<std::array<double, 2>> plane;
    for (int i = 0; i < 40; ++i) {
        const double a = testutil::urand(rng, -3.0, 3.0);
        const double b = testutil::urand(rng, -2.0, 2.0);
        plane.push_back({a, b});
        std::vector<double> p(6);
        for (std::size_t c = 0; c < 6; ++c) p[c] = a * u[c] + b * v[c] + 0.5;
        points.push_back(std::move(p));
    }
    const PcaProjection projection = project_features(points);
    ASSERT_FALSE(projection.degenerate);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double want = std::hypot(plane[i][0] - plane[j][0], plane[i][1] - plane[j][1]);
            const double got = std::hypot(projection.coords[i][0] - projection.coords[j][0],
                                          projection.coords[i][1] - projection.coords[j][1]);
            EXPECT_NEAR(got, want, 1e-6);
        }
}

TEST(ProjectFeatures, DuplicatedPointsGetDuplicatedProjections) {
    std::mt19937_64 rng(6);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> p(4);
        for (auto& c : p) c = testutil::urand(rng);
        points.push_back(p);
        points.push_back(p);
    }
    const PcaProjection projection = project_features(points);
    for (std::size_t i = 0; i < points.size(); i += 2) {
        EXPECT_DOUBLE_EQ(projection.coords[i][0], projection.coords[i + 1][0]);
        EXPECT_DOUBLE_EQ(projection.coords[i][1], projection.coords[i + 1][1]);
    }
}

TEST(ProjectFeatures, MatchesJacobiOracleOnRandomData) {
    std::mt19937_64 rng(7);
    const std::size_t n = 50, dim = 10;
    std::vector<std::vector<double>> data(n, std::vector<double>(dim));
    for (auto& row : data)
        for (auto& c : row) c = testutil::urand(rng, -2.0, 2.0);

    const PcaProjection projection = project_features(data);

    // oracle: full covariance eigendecomposition
    std::vector<double> mean(dim, 0.0);
    for (const auto& row : data)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += row[i] / static_cast<double>(n);
    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto& row : data)
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]) / static_cast<double>(n);
    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> eigenvectors;
    testutil::jacobi_eigen(cov, eigenvalues, eigenvectors);
    ASSERT_GT(eigenvalues[0], eigenvalues[1]);

    double var1 = 0.0, var2 = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double want1 = 0.0, want2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            want1 += (data[s][i] - mean[i]) * eigenvectors[0][i];
            want2 += (data[s][i] - mean[i]) * eigenvectors[1][i];
        }
        // up to component sign
        EXPECT_NEAR(std::abs(projection.coords[s][0]), std::abs(want1), 1e-6);
        EXPECT_NEAR(std::abs(projection.coords[s][1]), std::abs(want2), 1e-6);
        var1 += projection.coords[s][0] * projection.coords[s][0];
        var2 += projection.coords[s][1] * projection.coords[s][1];
    }
    EXPECT_GE(var1, var2);  // components in descending variance order
}

TEST(ProjectFeatures, TranslationInvariant) {
    std::mt19937_64 rng(8);
    std::vector<std::vector<double>> data(20, std::vector<double>(5));
    for (auto& row : data)
        for (auto& c : row) c = testutil::urand(rng);
    std::vector<std::vector<double>> shifted = data;
    for (auto& row : shifted)
        for (std::size_t i = 0; i < row.size(); ++i) row[i] += 100.0 + static_cast<double>(i);
    const PcaProjection a = project_features(data);
    const PcaProjection b = project_features(shifted);
    for (std::size_t s = 0; s < data.size(); ++s) {
        EXPECT_NEAR(a.coords[s][0], b.coords[s][0], 1e-7);
        EXPECT_NEAR(a.coords[s][1], b.coords[s][1], 1e-7);
    }
}

TEST(ProjectFeatures, ZeroVarianceFlagsDegenerate) {
    const std::vector<std::vector<double>> constant(5, std::vector<double>(3, 1.25));
    const PcaProjection projection = project_features(constant);
    EXPECT_TRUE(projection.degenerate);
    for (const auto& c : projection.coords) {
        EXPECT_EQ(c[0], 0.0);
        EXPECT_EQ(c[1], 0.0);
    }
}

TEST(ProjectFeatures, RejectsBadInput) {
    EXPECT_THROW(project_features({{1.0, 2.0}}), DataError);
    EXPECT_THROW(project_features({{1.0, 2.0}, {1.0}}), DataError);
}
