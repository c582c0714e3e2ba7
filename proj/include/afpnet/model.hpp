#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/fpm.hpp"
#include "afpnet/matrix.hpp"
#include "afpnet/rpam.hpp"

namespace afpnet {

/// The full detector: embedding table, convolution bank, attention stack and
/// sigmoid classifier. Also used (zero-initialized) as the container for
/// gradients and optimizer moments, which keeps every parameter walk in one
/// place.
template <class T>
struct Model {
    ModelConfig config;
    Matrix<T> embedding;                         ///< V x k
    std::vector<ConvKernel<T>> kernels;          ///< height-major, index l*J + j
    std::vector<AttentionBlockParams<T>> blocks;
    std::vector<T> clf_weight;                   ///< feature_rows * (P+1)
    T clf_bias{};

    std::size_t vocab_size() const { return embedding.rows(); }

    static Model zeros(const ModelConfig& config, std::size_t vocab_size) {
        config.validate();
        if (vocab_size < 2) throw ConfigError("vocab size must be >= 2 (PAD and UNK)");
        Model m;
        m.config = config;
        m.embedding = Matrix<T>(vocab_size, static_cast<std::size_t>(config.embed_dim));
        m.kernels.reserve(static_cast<std::size_t>(config.feature_rows()));
        for (int l = 0; l < config.num_heights(); ++l)
            for (int j = 0; j < config.kernels_per_height; ++j)
                m.kernels.push_back(ConvKernel<T>{
                    Matrix<T>(static_cast<std::size_t>(config.filter_heights[static_cast<std::size_t>(l)]),
                              static_cast<std::size_t>(config.embed_dim)),
                    T{}});
        const auto width = static_cast<std::size_t>(config.model_width());
        const auto d_k = static_cast<std::size_t>(config.head_dim());
        const auto ffn = static_cast<std::size_t>(config.ffn_width());
        m.blocks.resize(static_cast<std::size_t>(config.attention_blocks));
        for (auto& block : m.blocks) {
            block.heads.resize(static_cast<std::size_t>(config.num_heads));
            for (auto& head : block.heads) {
                head.query = Matrix<T>(width, d_k);
                head.key = Matrix<T>(width, d_k);
                head.value = Matrix<T>(width, d_k);
            }
            block.mix = Matrix<T>(width, width);
            block.ffn_w1 = Matrix<T>(width, ffn);
            block.ffn_b1.assign(ffn, T{});
            block.ffn_w2 = Matrix<T>(ffn, width);
            block.ffn_b2.assign(width, T{});
        }
        m.clf_weight.assign(config.classifier_inputs(), T{});
        m.clf_bias = T{};
        return m;
    }

    /// Zero-mean uniform init scaled by fan-in; biases are zero. The draw
    /// order is fixed so a seed fully determines the parameters.
    static Model random_init(const ModelConfig& config, std::size_t vocab_size,
                             std::uint64_t seed) {
        Model m = zeros(config, vocab_size);
        std::mt19937_64 rng(seed);
        auto fill = [&rng](T* data, std::size_t n, double fan_in) {
            const double bound = 1.0 / std::sqrt(fan_in);
            for (std::size_t i = 0; i < n; ++i)
                data[i] = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
        };
        fill(m.embedding.data(), m.embedding.size(), config.embed_dim);
        for (auto& kernel : m.kernels)
            fill(kernel.weight.data(), kernel.weight.size(),
                 static_cast<double>(kernel.weight.size()));
        const double width = config.model_width();
        for (auto& block : m.blocks) {
            for (auto& head : block.heads) {
                fill(head.query.data(), head.query.size(), width);
                fill(head.key.data(), head.key.size(), width);
                fill(head.value.data(), head.value.size(), width);
            }
            fill(block.mix.data(), block.mix.size(), width);
            fill(block.ffn_w1.data(), block.ffn_w1.size(), width);
            fill(block.ffn_w2.data(), block.ffn_w2.size(), static_cast<double>(config.ffn_width()));
        }
        fill(m.clf_weight.data(), m.clf_weight.size(), static_cast<double>(m.clf_weight.size()));
        return m;
    }
};

/// Walks every parameter tensor in canonical order with its checkpoint name.
/// The callback receives (name, data pointer, element count, shape).
template <class ModelT, class Fn>
void visit_params(ModelT& model, Fn&& fn) {
    const ModelConfig& c = model.config;
    fn(std::string("embed.table"), model.embedding.data(), model.embedding.size(),
       std::vector<std::size_t>{model.embedding.rows(), model.embedding.cols()});
    for (int l = 0; l < c.num_heights(); ++l) {
        for (int j = 0; j < c.kernels_per_height; ++j) {
            auto& kernel = model.kernels[static_cast<std::size_t>(l * c.kernels_per_height + j)];
            const std::string base = "fpm.l" + std::to_string(l) + ".j" + std::to_string(j);
            fn(base + ".weight", kernel.weight.data(), kernel.weight.size(),
               std::vector<std::size_t>{kernel.weight.rows(), kernel.weight.cols()});
            fn(base + ".bias", &kernel.bias, std::size_t{1}, std::vector<std::size_t>{1});
        }
    }
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        auto& block = model.blocks[i];
        const std::string base = "rpam.block" + std::to_string(i);
        for (std::size_t s = 0; s < block.heads.size(); ++s) {
            auto& head = block.heads[s];
            const std::string hbase = base + ".head" + std::to_string(s);
            fn(hbase + ".q", head.query.data(), head.query.size(),
               std::vector<std::size_t>{head.query.rows(), head.query.cols()});
            fn(hbase + ".k", head.key.data(), head.key.size(),
               std::vector<std::size_t>{head.key.rows(), head.key.cols()});
            fn(hbase + ".v", head.value.data(), head.value.size(),
               std::vector<std::size_t>{head.value.rows(), head.value.cols()});
        }
        fn(base + ".W", block.mix.data(), block.mix.size(),
           std::vector<std::size_t>{block.mix.rows(), block.mix.cols()});
        fn(base + ".W1", block.ffn_w1.data(), block.ffn_w1.size(),
           std::vector<std::size_t>{block.ffn_w1.rows(), block.ffn_w1.cols()});
        fn(base + ".b1", block.ffn_b1.data(), block.ffn_b1.size(),
           std::vector<std::size_t>{block.ffn_b1.size()});
        fn(base + ".W2", block.ffn_w2.data(), block.ffn_w2.size(),
           std::vector<std::size_t>{block.ffn_w2.rows(), block.ffn_w2.cols()});
        fn(base + ".b2", block.ffn_b2.data(), block.ffn_b2.size(),
           std::vector<std::size_t>{block.ffn_b2.size()});
    }
    fn(std::string("clf.weight"), model.clf_weight.data(), model.clf_weight.size(),
       std::vector<std::size_t>{model.clf_weight.size(), 1});
    fn(std::string("clf.bias"), &model.clf_bias, std::size_t{1}, std::vector<std::size_t>{1});
}

template <class T>
std::size_t param_count(const Model<T>& model) {
    std::size_t total = 0;
    visit_params(model, [&](const std::string&, const T*, std::size_t n,
                            const std::vector<std::size_t>&) { total += n; });
    return total;
}

template <class T>
struct ForwardResult {
    Prediction<T> prediction;
    FeatureMatrix<T> features;
    Matrix<T> rpam_output;  ///< classifier input
};

/// Inference pass. `num_threads` parallelizes the convolution bank across
/// kernels; results are bit-identical for any thread count because rows are
/// independent.
template <class T>
ForwardResult<T> model_forward(const Model<T>& model, std::span<const std::int32_t> ids,
                               int num_threads = 1) {
    ForwardResult<T> out;
    out.features = fpm_forward<T>(ids, model.embedding, model.kernels, model.config, nullptr,
                                  num_threads);
    RpamCache<T> cache;
    out.prediction = rpam_forward<T>(out.features.values, model.blocks, model.clf_weight,
                                     model.clf_bias, model.config, &cache);
    out.rpam_output = std::move(cache.output);
    return out;
}

template <class T>
struct TrainCache {
    FpmCache<T> fpm;
    FeatureMatrix<T> features;
    RpamCache<T> rpam;
};

template <class T>
Prediction<T> model_forward_cached(const Model<T>& model, std::span<const std::int32_t> ids,
                                   TrainCache<T>& cache) {
    cache.features = fpm_forward<T>(ids, model.embedding, model.kernels, model.config, &cache.fpm);
    return rpam_forward<T>(cache.features.values, model.blocks, model.clf_weight, model.clf_bias,
                           model.config, &cache.rpam);
}

/// Accumulates parameter gradients for one sample into `grads` (a
/// zero-initialized or partially accumulated Model of the same shape).
/// When `d_embedding_rows` is given it receives the gradient with respect to
/// the embedded token rows (valid positions only).
template <class T>
void model_backward(const Model<T>& model, std::span<const std::int32_t> ids,
                    const TrainCache<T>& cache, T d_logit, Model<T>& grads,
                    Matrix<T>* d_embedding_rows = nullptr) {
    Matrix<T> d_features =
        rpam_backward<T>(cache.rpam, model.blocks, model.clf_weight, model.config, d_logit,
                         grads.blocks, grads.clf_weight, grads.clf_bias);
    Matrix<T> d_embedded;
    fpm_backward<T>(cache.fpm, model.kernels, cache.features, d_features, model.config, d_embedded,
                    grads.kernels);
    for (std::size_t i = 0; i < cache.fpm.valid_tokens; ++i) {
        const auto id = static_cast<std::size_t>(ids[i]);
        T* dst = grads.embedding.data() + id * grads.embedding.cols();
        const T* src = d_embedded.data() + i * d_embedded.cols();
        for (std::size_t j = 0; j < d_embedded.cols(); ++j) dst[j] += src[j];
    }
    if (d_embedding_rows) *d_embedding_rows = std::move(d_embedded);
}

}  // namespace afpnet
