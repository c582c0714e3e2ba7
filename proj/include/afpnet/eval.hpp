#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "afpnet/common.hpp"
#include "afpnet/ingest.hpp"
#include "afpnet/lexer.hpp"
#include "afpnet/model.hpp"

namespace afpnet {

struct MetricsReport {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t true_negatives = 0;
    std::size_t false_negatives = 0;
    double precision = 0.0;  ///< ratio in [0, 1]
    double recall = 0.0;
    double f1 = 0.0;
    // Zero-denominator cases report 0 with the flag cleared, so trial
    // aggregation never divides by zero.
    bool precision_defined = false;
    bool recall_defined = false;
    bool f1_defined = false;

    std::size_t total() const {
        return true_positives + false_positives + true_negatives + false_negatives;
    }
};

/// Percentage rounded to two decimals, as reported in results tables.
inline double to_percent(double ratio) { return std::round(ratio * 10000.0) / 100.0; }

inline MetricsReport compute_metrics(std::span<const int> decisions, std::span<const int> labels) {
    if (decisions.size() != labels.size())
        throw DataError("compute_metrics: decisions and labels differ in length");
    if (decisions.empty()) throw DataError("compute_metrics: empty input");
    MetricsReport r;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if ((decisions[i] != 0 && decisions[i] != 1) || (labels[i] != 0 && labels[i] != 1))
            throw DataError("compute_metrics: decisions and labels must be 0 or 1");
        if (decisions[i] == 1 && labels[i] == 1) ++r.true_positives;
        else if (decisions[i] == 1) ++r.false_positives;
        else if (labels[i] == 1) ++r.false_negatives;
        else ++r.true_negatives;
    }
    const std::size_t predicted = r.true_positives + r.false_positives;
    const std::size_t actual = r.true_positives + r.false_negatives;
    r.precision_defined = predicted > 0;
    r.recall_defined = actual > 0;
    if (r.precision_defined)
        r.precision = static_cast<double>(r.true_positives) / static_cast<double>(predicted);
    if (r.recall_defined)
        r.recall = static_cast<double>(r.true_positives) / static_cast<double>(actual);
    r.f1_defined = r.precision_defined && r.recall_defined && (r.precision + r.recall) > 0.0;
    if (r.f1_defined) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    return nlohmann::json{
        {"counts",
         {{"tp", r.true_positives},
          {"fp", r.false_positives},
          {"tn", r.true_negatives},
          {"fn", r.false_negatives}}},
        {"precision", r.precision},
        {"recall", r.recall},
        {"f1", r.f1},
        {"precision_pct", to_percent(r.precision)},
        {"recall_pct", to_percent(r.recall)},
        {"f1_pct", to_percent(r.f1)},
        {"flags",
         {{"precision_defined", r.precision_defined},
          {"recall_defined", r.recall_defined},
          {"f1_defined", r.f1_defined}}},
    };
}

template <class T>
struct CorpusEvaluation {
    std::vector<int> decisions;
    std::vector<int> labels;
    std::vector<double> probabilities;
    MetricsReport metrics;
};

/// Evaluates pre-encoded sequences. When `features_out` is non-null it also
/// collects the flattened classifier input per sample (for PCA export).
template <class T>
CorpusEvaluation<T> evaluate_encoded(const Model<T>& model,
                                     const std::vector<std::vector<std::int32_t>>& sequences,
                                     std::span<const int> labels,
                                     std::vector<std::vector<double>>* features_out = nullptr) {
    if (sequences.size() != labels.size())
        throw DataError("evaluate_encoded: sequences and labels differ in length");
    CorpusEvaluation<T> out;
    out.labels.assign(labels.begin(), labels.end());
    out.decisions.reserve(sequences.size());
    out.probabilities.reserve(sequences.size());
    for (const auto& ids : sequences) {
        ForwardResult<T> fwd = model_forward(model, std::span<const std::int32_t>(ids));
        out.decisions.push_back(fwd.prediction.decision);
        out.probabilities.push_back(static_cast<double>(fwd.prediction.probability));
        if (features_out) {
            std::vector<double> flat(fwd.rpam_output.size());
            for (std::size_t i = 0; i < flat.size(); ++i)
                flat[i] = static_cast<double>(fwd.rpam_output.data()[i]);
            features_out->push_back(std::move(flat));
        }
    }
    out.metrics = compute_metrics(out.decisions, out.labels);
    return out;
}

template <class T>
CorpusEvaluation<T> evaluate_corpus(const Model<T>& model, const Vocabulary& vocab,
                                    const Corpus& corpus,
                                    std::vector<std::vector<double>>* features_out = nullptr) {
    if (corpus.empty()) throw DataError("evaluate_corpus: empty corpus");
    std::vector<std::vector<std::int32_t>> sequences;
    std::vector<int> labels;
    sequences.reserve(corpus.size());
    labels.reserve(corpus.size());
    for (const LabeledContract& c : corpus.contracts) {
        sequences.push_back(encode(tokenize(c.source), vocab));
        labels.push_back(c.label);
    }
    return evaluate_encoded(model, sequences, labels, features_out);
}

struct PcaProjection {
    std::vector<std::array<double, 2>> coords;
    bool degenerate = false;  ///< set when the data has zero variance in all directions
};

namespace detail {

// Dominant eigenvector of the sample covariance by power iteration on the
// centered data, optionally deflated against a previous component. Returns
// the eigenvalue; the matrix-vector products never form the covariance.
inline double power_component(const std::vector<std::vector<double>>& centered,
                              std::vector<double>& v, const std::vector<double>* deflate) {
    const std::size_t dim = v.size();
    const std::size_t n = centered.size();
    auto orthogonalize = [&](std::vector<double>& x) {
        if (!deflate) return;
        double proj = 0.0;
        for (std::size_t i = 0; i < dim; ++i) proj += x[i] * (*deflate)[i];
        for (std::size_t i = 0; i < dim; ++i) x[i] -= proj * (*deflate)[i];
    };
    auto normalize = [&](std::vector<double>& x) {
        double norm = 0.0;
        for (double c : x) norm += c * c;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& c : x) c /= norm;
        return norm;
    };
    orthogonalize(v);
    if (normalize(v) == 0.0) return 0.0;

    std::vector<double> next(dim);
    double eigenvalue = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            const std::vector<double>& row = centered[s];
            double proj = 0.0;
            for (std::size_t i = 0; i < dim; ++i) proj += row[i] * v[i];
            for (std::size_t i = 0; i < dim; ++i) next[i] += proj * row[i];
        }
        for (double& c : next) c /= static_cast<double>(n);
        orthogonalize(next);
        const double norm = normalize(next);
        if (norm == 0.0) {
            std::fill(v.begin(), v.end(), 0.0);
            return 0.0;
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < dim; ++i) delta = std::max(delta, std::abs(next[i] - v[i]));
        v = next;
        eigenvalue = norm;
        if (delta < 1e-13) break;
    }
    return eigenvalue;
}

inline void fix_sign(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& c : v) c = -c;
}

}  // namespace detail

/// Mean-centered projection onto the top two principal components
/// (descending eigenvalue; each component's largest-magnitude loading made
/// positive). Deterministic: the iteration starts from a fixed seeded vector.
inline PcaProjection project_features(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw DataError("project_features: need at least 2 vectors");
    const std::size_t dim = features[0].size();
    if (dim == 0) throw DataError("project_features: empty feature vectors");
    for (const auto& f : features)
        if (f.size() != dim) throw DataError("project_features: inconsistent dimensionality");

    const std::size_t n = features.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& f : features)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += f[i];
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> centered(n, std::vector<double>(dim));
    double total_var = 0.0;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < dim; ++i) {
            centered[s][i] = features[s][i] - mean[i];
            total_var += centered[s][i] * centered[s][i];
        }

    PcaProjection out;
    out.coords.assign(n, {0.0, 0.0});
    if (total_var == 0.0) {
        out.degenerate = true;
        return out;
    }

    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::vector<double> pc1(dim), pc2(dim);
    for (double& c : pc1) c = 2.0 * uniform01(rng) - 1.0;
    for (double& c : pc2) c = 2.0 * uniform01(rng) - 1.0;

    detail::power_component(centered, pc1, nullptr);
    detail::fix_sign(pc1);
    detail::power_component(centered, pc2, &pc1);
    detail::fix_sign(pc2);

    for (std::size_t s = 0; s < n; ++s) {
        double x = 0.0, y = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            x += centered[s][i] * pc1[i];
            y += centered[s][i] * pc2[i];
        }
        out.coords[s] = {x, y};
    }
    return out;
}

}  // namespace afpnet
