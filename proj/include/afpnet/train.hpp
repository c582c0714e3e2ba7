#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/eval.hpp"
#include "afpnet/ingest.hpp"
#include "afpnet/lexer.hpp"
#include "afpnet/model.hpp"

namespace afpnet {

inline constexpr double kProbClamp = 1e-7;

/// Binary cross-entropy with the probability clamped to [eps, 1-eps] and an
/// optional positive-class weight.
template <class T>
T bce_loss(T prob, int label, T class_weight = T(1)) {
    if (label != 0 && label != 1) throw DataError("bce_loss: label must be 0 or 1");
    const T eps = static_cast<T>(kProbClamp);
    const T y = std::min(std::max(prob, eps), T(1) - eps);
    if (label == 1) return -class_weight * std::log(y);
    return -std::log(T(1) - y);
}

/// d loss / d logit under the same clamp. Outside the clamp range the loss is
/// constant in the probability, so the gradient is exactly zero there.
template <class T>
T bce_dlogit(T prob, int label, T class_weight = T(1)) {
    if (label != 0 && label != 1) throw DataError("bce_dlogit: label must be 0 or 1");
    const T eps = static_cast<T>(kProbClamp);
    if (prob <= eps || prob >= T(1) - eps) return T{};
    if (label == 1) return -class_weight * (T(1) - prob);
    return prob;
}

/// Decoupled-weight-decay Adam. Moments live in two zero-initialized models
/// of the same shape as the parameters.
template <class T>
class AdamW {
public:
    AdamW(const ModelConfig& config, std::size_t vocab_size, double learning_rate,
          double weight_decay)
        : lr_(learning_rate),
          weight_decay_(weight_decay),
          m_(Model<T>::zeros(config, vocab_size)),
          v_(Model<T>::zeros(config, vocab_size)) {}

    void step(Model<T>& params, const Model<T>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));

        std::vector<std::span<T>> p = flatten(params);
        std::vector<std::span<const T>> g = flatten(grads);
        std::vector<std::span<T>> m = flatten(m_);
        std::vector<std::span<T>> v = flatten(v_);
        for (std::size_t tensor = 0; tensor < p.size(); ++tensor) {
            for (std::size_t i = 0; i < p[tensor].size(); ++i) {
                const double grad = static_cast<double>(g[tensor][i]);
                double mi = kBeta1 * static_cast<double>(m[tensor][i]) + (1.0 - kBeta1) * grad;
                double vi = kBeta2 * static_cast<double>(v[tensor][i]) + (1.0 - kBeta2) * grad * grad;
                m[tensor][i] = static_cast<T>(mi);
                v[tensor][i] = static_cast<T>(vi);
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + kEps);
                const double decayed = static_cast<double>(p[tensor][i]) * weight_decay_;
                p[tensor][i] -= static_cast<T>(lr_ * (update + decayed));
            }
        }
    }

    std::int64_t steps() const { return t_; }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    template <class ModelT>
    static auto flatten(ModelT& model) {
        using Scalar = std::remove_reference_t<decltype(*model.clf_weight.data())>;
        std::vector<std::span<Scalar>> out;
        visit_params(model, [&](const std::string&, Scalar* data, std::size_t n,
                                const std::vector<std::size_t>&) { out.emplace_back(data, n); });
        return out;
    }

    double lr_;
    double weight_decay_;
    std::int64_t t_ = 0;
    Model<T> m_;
    Model<T> v_;
};

template <class T>
void zero_params(Model<T>& model) {
    visit_params(model, [](const std::string&, T* data, std::size_t n,
                           const std::vector<std::size_t>&) {
        std::fill(data, data + n, T{});
    });
}

template <class T>
double grad_norm(const Model<T>& grads) {
    double sum = 0.0;
    visit_params(grads, [&](const std::string&, const T* data, std::size_t n,
                            const std::vector<std::size_t>&) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(data[i]);
            sum += g * g;
        }
    });
    return std::sqrt(sum);
}

template <class T>
void scale_params(Model<T>& grads, T factor) {
    visit_params(grads, [&](const std::string&, T* data, std::size_t n,
                            const std::vector<std::size_t>&) {
        for (std::size_t i = 0; i < n; ++i) data[i] *= factor;
    });
}

struct EpochRecord {
    double train_loss = 0.0;
    MetricsReport test_metrics;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

template <class T>
struct TrainResult {
    TrainHistory history;
    Model<T> model;
    Vocabulary vocab;
};

/// Trains the full pipeline: vocabulary from the train split only, seeded
/// init and shuffling, minibatched AdamW, per-epoch test metrics. The last
/// epoch's metrics are the trial result.
template <class T = float>
TrainResult<T> train_model(const Corpus& train, const Corpus& test, const ModelConfig& mconfig,
                           const TrainConfig& tconfig) {
    mconfig.validate();
    tconfig.validate();
    if (train.empty()) throw DataError("train_model: empty training corpus");
    if (test.empty()) throw DataError("train_model: empty test corpus");

    std::vector<TokenSequence> train_tokens;
    train_tokens.reserve(train.size());
    for (const LabeledContract& c : train.contracts) train_tokens.push_back(tokenize(c.source));
    Vocabulary vocab = Vocabulary::build(train_tokens, tconfig.vocab_min_freq);

    std::vector<std::vector<std::int32_t>> train_ids(train.size());
    std::vector<int> train_labels(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        train_ids[i] = encode(train_tokens[i], vocab);
        train_labels[i] = train.contracts[i].label;
    }
    std::vector<std::vector<std::int32_t>> test_ids(test.size());
    std::vector<int> test_labels(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        test_ids[i] = encode(tokenize(test.contracts[i].source), vocab);
        test_labels[i] = test.contracts[i].label;
    }

    Model<T> model = Model<T>::random_init(mconfig, vocab.size(), tconfig.seed);
    Model<T> grads = Model<T>::zeros(mconfig, vocab.size());
    AdamW<T> optimizer(mconfig, vocab.size(), tconfig.learning_rate, tconfig.weight_decay);
    std::mt19937_64 shuffle_rng(tconfig.seed ^ 0x5851f42d4c957f2dULL);

    const auto n = train.size();
    const auto batch = static_cast<std::size_t>(tconfig.batch_size);
    TrainResult<T> result;
    result.vocab = vocab;

    for (int epoch = 0; epoch < tconfig.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[uniform_below(shuffle_rng, i)]);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < n; begin += batch, ++batch_index) {
            const std::size_t end = std::min(n, begin + batch);
            const T inv_batch = T(1) / static_cast<T>(end - begin);
            zero_params(grads);
            double batch_loss = 0.0;
            for (std::size_t b = begin; b < end; ++b) {
                const std::size_t sample = order[b];
                TrainCache<T> cache;
                const Prediction<T> pred =
                    model_forward_cached(model, std::span<const std::int32_t>(train_ids[sample]),
                                         cache);
                const int label = train_labels[sample];
                const auto w = static_cast<T>(tconfig.class_weight);
                batch_loss += static_cast<double>(bce_loss(pred.probability, label, w));
                const T d_logit = bce_dlogit(pred.probability, label, w) * inv_batch;
                model_backward(model, std::span<const std::int32_t>(train_ids[sample]), cache,
                               d_logit, grads);
            }
            batch_loss /= static_cast<double>(end - begin);
            if (!std::isfinite(batch_loss))
                throw Error("train_model: non-finite loss in epoch " + std::to_string(epoch + 1) +
                            ", batch " + std::to_string(batch_index + 1));
            loss_sum += batch_loss * static_cast<double>(end - begin);

            if (tconfig.clip_norm > 0.0) {
                const double norm = grad_norm(grads);
                if (norm > tconfig.clip_norm)
                    scale_params(grads, static_cast<T>(tconfig.clip_norm / norm));
            }
            optimizer.step(model, grads);
        }

        EpochRecord record;
        record.train_loss = loss_sum / static_cast<double>(n);
        record.test_metrics = evaluate_encoded(model, test_ids, test_labels).metrics;
        result.history.epochs.push_back(record);
    }

    result.model = std::move(model);
    return result;
}

struct TrialsSummary {
    std::vector<MetricsReport> per_trial;  ///< last-epoch metrics per trial
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f1 = 0.0;
};

template <class T>
struct TrialsResult {
    std::vector<TrainResult<T>> trials;
    TrialsSummary summary;
};

/// Runs `trials` independent trainings with seeds seed+0 .. seed+trials-1 on
/// the same split and averages the last-epoch metrics.
template <class T = float>
TrialsResult<T> run_trials(const Corpus& train, const Corpus& test, const ModelConfig& mconfig,
                           const TrainConfig& tconfig) {
    tconfig.validate();
    TrialsResult<T> out;
    out.trials.reserve(static_cast<std::size_t>(tconfig.trials));
    for (int t = 0; t < tconfig.trials; ++t) {
        TrainConfig trial_config = tconfig;
        trial_config.seed = tconfig.seed + static_cast<std::uint64_t>(t);
        out.trials.push_back(train_model<T>(train, test, mconfig, trial_config));
        const MetricsReport& last = out.trials.back().history.epochs.back().test_metrics;
        out.summary.per_trial.push_back(last);
        out.summary.mean_precision += last.precision;
        out.summary.mean_recall += last.recall;
        out.summary.mean_f1 += last.f1;
    }
    const auto k = static_cast<double>(tconfig.trials);
    out.summary.mean_precision /= k;
    out.summary.mean_recall /= k;
    out.summary.mean_f1 /= k;
    return out;
}

}  // namespace afpnet
