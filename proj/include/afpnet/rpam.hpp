#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/fpm.hpp"
#include "afpnet/matrix.hpp"

namespace afpnet {

template <class T>
struct AttentionHeadParams {
    Matrix<T> query;  ///< (P+1) x d_k
    Matrix<T> key;
    Matrix<T> value;
};

template <class T>
struct AttentionBlockParams {
    std::vector<AttentionHeadParams<T>> heads;
    Matrix<T> mix;          ///< (P+1) x (P+1), applied to the concatenated heads
    Matrix<T> ffn_w1;       ///< (P+1) x ffn_width
    std::vector<T> ffn_b1;
    Matrix<T> ffn_w2;       ///< ffn_width x (P+1)
    std::vector<T> ffn_b2;
};

/// Row-wise softmax with max subtraction. The subtraction changes nothing
/// mathematically; it keeps exp() in range.
template <class T>
void softmax_rows_inplace(Matrix<T>& scores) {
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        T* row = scores.data() + i * scores.cols();
        T max = row[0];
        for (std::size_t j = 1; j < scores.cols(); ++j) max = std::max(max, row[j]);
        T sum{};
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            row[j] = std::exp(row[j] - max);
            sum += row[j];
        }
        for (std::size_t j = 0; j < scores.cols(); ++j) row[j] /= sum;
    }
}

template <class T>
struct AttentionHeadCache {
    Matrix<T> q, k, v;
    Matrix<T> attn;  ///< softmax weights, rows x rows
};

/// Softmax(q k^T / sqrt(d_k)) v for one head.
template <class T>
Matrix<T> attention_head(const Matrix<T>& x, const AttentionHeadParams<T>& params,
                         AttentionHeadCache<T>* cache = nullptr) {
    if (!all_finite(x)) throw Error("attention_head: non-finite input");
    Matrix<T> q = matmul(x, params.query);
    Matrix<T> k = matmul(x, params.key);
    Matrix<T> v = matmul(x, params.value);
    Matrix<T> attn = matmul_abt(q, k);
    const T scale = T(1) / std::sqrt(static_cast<T>(q.cols()));
    for (std::size_t i = 0; i < attn.size(); ++i) attn.data()[i] *= scale;
    softmax_rows_inplace(attn);
    Matrix<T> out = matmul(attn, v);
    if (cache) {
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
    }
    return out;
}

template <class T>
struct AttentionBlockCache {
    Matrix<T> input;
    std::vector<AttentionHeadCache<T>> heads;
    Matrix<T> concat;   ///< heads side by side, rows x (P+1)
    Matrix<T> mixed;    ///< concat * mix
    Matrix<T> ffn_pre;  ///< mixed * W1 + b1, before ReLU
};

/// Multi-head attention, head concatenation through the mixer, then the
/// two-layer feed-forward transform. Output shape equals input shape.
template <class T>
Matrix<T> attention_block(const Matrix<T>& x, const AttentionBlockParams<T>& params,
                          AttentionBlockCache<T>* cache = nullptr) {
    const std::size_t rows = x.rows();
    const std::size_t width = x.cols();
    const std::size_t num_heads = params.heads.size();
    if (num_heads == 0 || width % num_heads != 0)
        throw ConfigError("attention_block: width must split evenly across heads");
    const std::size_t d_k = width / num_heads;

    if (cache) {
        cache->input = x;
        cache->heads.resize(num_heads);
    }
    Matrix<T> concat(rows, width);
    for (std::size_t s = 0; s < num_heads; ++s) {
        Matrix<T> head = attention_head(x, params.heads[s], cache ? &cache->heads[s] : nullptr);
        if (head.cols() != d_k) throw ConfigError("attention_block: head output width disagrees");
        for (std::size_t i = 0; i < rows; ++i)
            std::copy_n(head.data() + i * d_k, d_k, concat.data() + i * width + s * d_k);
    }

    Matrix<T> mixed = matmul(concat, params.mix);
    Matrix<T> pre = matmul(mixed, params.ffn_w1);
    add_row_broadcast(pre, std::span<const T>(params.ffn_b1));
    Matrix<T> relu = pre;
    for (std::size_t i = 0; i < relu.size(); ++i)
        if (relu.data()[i] < T{}) relu.data()[i] = T{};
    Matrix<T> out = matmul(relu, params.ffn_w2);
    add_row_broadcast(out, std::span<const T>(params.ffn_b2));

    if (cache) {
        cache->concat = std::move(concat);
        cache->mixed = std::move(mixed);
        cache->ffn_pre = std::move(pre);
    }
    return out;
}

template <class T>
struct Prediction {
    T probability{};  ///< sigmoid output Y
    int decision = 0; ///< [Y >= threshold]
    T logit{};
};

template <class T>
T stable_sigmoid(T x) {
    if (x >= T{}) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

/// Fully connected layer over the row-major flattening of the final matrix.
template <class T>
T classifier_logit(const Matrix<T>& x, std::span<const T> weight, T bias) {
    if (weight.size() != x.size()) throw ConfigError("classifier: weight size disagrees with input");
    T acc = bias;
    for (std::size_t i = 0; i < weight.size(); ++i) acc += weight[i] * x.data()[i];
    return acc;
}

template <class T>
struct RpamCache {
    std::vector<AttentionBlockCache<T>> blocks;
    Matrix<T> output;  ///< classifier input, feature_rows x (P+1)
};

/// Applies N attention blocks then the sigmoid classifier.
template <class T>
Prediction<T> rpam_forward(const Matrix<T>& feature_matrix,
                           std::span<const AttentionBlockParams<T>> blocks,
                           std::span<const T> clf_weight, T clf_bias, const ModelConfig& config,
                           RpamCache<T>* cache = nullptr) {
    if (feature_matrix.rows() != static_cast<std::size_t>(config.feature_rows()) ||
        feature_matrix.cols() != static_cast<std::size_t>(config.model_width()))
        throw ConfigError("rpam_forward: feature matrix shape disagrees with config");
    if (blocks.size() != static_cast<std::size_t>(config.attention_blocks))
        throw ConfigError("rpam_forward: block count disagrees with config");

    if (cache) cache->blocks.resize(blocks.size());
    Matrix<T> x = feature_matrix;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        x = attention_block(x, blocks[i], cache ? &cache->blocks[i] : nullptr);

    Prediction<T> pred;
    pred.logit = classifier_logit(x, clf_weight, clf_bias);
    pred.probability = stable_sigmoid(pred.logit);
    pred.decision = pred.probability >= static_cast<T>(config.threshold) ? 1 : 0;
    if (cache) cache->output = std::move(x);
    return pred;
}

namespace detail {

/// Backward of one attention head. d_out is rows x d_k; the gradient with
/// respect to the block input accumulates into d_x.
template <class T>
void attention_head_backward(const Matrix<T>& x, const AttentionHeadParams<T>& params,
                             const AttentionHeadCache<T>& cache, const Matrix<T>& d_out,
                             AttentionHeadParams<T>& d_params, Matrix<T>& d_x) {
    const T scale = T(1) / std::sqrt(static_cast<T>(cache.q.cols()));

    Matrix<T> d_attn = matmul_abt(d_out, cache.v);        // rows x rows
    Matrix<T> d_v = matmul_atb(cache.attn, d_out);        // rows x d_k

    // softmax backward, row-wise: ds = a .* (da - sum(da .* a))
    Matrix<T> d_scores(d_attn.rows(), d_attn.cols());
    for (std::size_t i = 0; i < d_attn.rows(); ++i) {
        const T* a = cache.attn.data() + i * cache.attn.cols();
        const T* da = d_attn.data() + i * d_attn.cols();
        T inner{};
        for (std::size_t j = 0; j < d_attn.cols(); ++j) inner += da[j] * a[j];
        T* ds = d_scores.data() + i * d_scores.cols();
        for (std::size_t j = 0; j < d_attn.cols(); ++j) ds[j] = a[j] * (da[j] - inner) * scale;
    }

    Matrix<T> d_q = matmul(d_scores, cache.k);            // rows x d_k
    Matrix<T> d_k_mat = matmul_atb(d_scores, cache.q);    // rows x d_k

    auto accumulate = [](Matrix<T>& dst, const Matrix<T>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
    };
    accumulate(d_params.query, matmul_atb(x, d_q));
    accumulate(d_params.key, matmul_atb(x, d_k_mat));
    accumulate(d_params.value, matmul_atb(x, d_v));
    accumulate(d_x, matmul_abt(d_q, params.query));
    accumulate(d_x, matmul_abt(d_k_mat, params.key));
    accumulate(d_x, matmul_abt(d_v, params.value));
}

template <class T>
Matrix<T> attention_block_backward(const AttentionBlockParams<T>& params,
                                   const AttentionBlockCache<T>& cache, const Matrix<T>& d_out,
                                   AttentionBlockParams<T>& d_params) {
    const std::size_t rows = cache.input.rows();
    const std::size_t width = cache.input.cols();
    const std::size_t num_heads = params.heads.size();
    const std::size_t d_k = width / num_heads;

    // feed-forward backward
    Matrix<T> relu = cache.ffn_pre;
    for (std::size_t i = 0; i < relu.size(); ++i)
        if (relu.data()[i] < T{}) relu.data()[i] = T{};

    for (std::size_t j = 0; j < d_out.cols(); ++j) {
        T acc{};
        for (std::size_t i = 0; i < d_out.rows(); ++i) acc += d_out(i, j);
        d_params.ffn_b2[j] += acc;
    }
    {
        Matrix<T> dw2 = matmul_atb(relu, d_out);
        for (std::size_t i = 0; i < dw2.size(); ++i) d_params.ffn_w2.data()[i] += dw2.data()[i];
    }
    Matrix<T> d_relu = matmul_abt(d_out, params.ffn_w2);  // rows x ffn
    for (std::size_t i = 0; i < d_relu.size(); ++i)
        if (cache.ffn_pre.data()[i] <= T{}) d_relu.data()[i] = T{};
    for (std::size_t j = 0; j < d_relu.cols(); ++j) {
        T acc{};
        for (std::size_t i = 0; i < d_relu.rows(); ++i) acc += d_relu(i, j);
        d_params.ffn_b1[j] += acc;
    }
    {
        Matrix<T> dw1 = matmul_atb(cache.mixed, d_relu);
        for (std::size_t i = 0; i < dw1.size(); ++i) d_params.ffn_w1.data()[i] += dw1.data()[i];
    }
    Matrix<T> d_mixed = matmul_abt(d_relu, params.ffn_w1);  // rows x width

    // mixer backward
    {
        Matrix<T> dmix = matmul_atb(cache.concat, d_mixed);
        for (std::size_t i = 0; i < dmix.size(); ++i) d_params.mix.data()[i] += dmix.data()[i];
    }
    Matrix<T> d_concat = matmul_abt(d_mixed, params.mix);  // rows x width

    // split per head and run head backward
    Matrix<T> d_x(rows, width);
    for (std::size_t s = 0; s < num_heads; ++s) {
        Matrix<T> d_head(rows, d_k);
        for (std::size_t i = 0; i < rows; ++i)
            std::copy_n(d_concat.data() + i * width + s * d_k, d_k, d_head.data() + i * d_k);
        attention_head_backward(cache.input, params.heads[s], cache.heads[s], d_head,
                                d_params.heads[s], d_x);
    }
    return d_x;
}

}  // namespace detail

/// Backward pass from the classifier logit down to the feature matrix.
/// Parameter gradients accumulate into d_blocks / d_clf_*; the return value
/// is the loss gradient with respect to the feature matrix.
template <class T>
Matrix<T> rpam_backward(const RpamCache<T>& cache,
                        std::span<const AttentionBlockParams<T>> blocks,
                        std::span<const T> clf_weight, const ModelConfig& config, T d_logit,
                        std::span<AttentionBlockParams<T>> d_blocks, std::span<T> d_clf_weight,
                        T& d_clf_bias) {
    const std::size_t rows = static_cast<std::size_t>(config.feature_rows());
    const std::size_t width = static_cast<std::size_t>(config.model_width());

    d_clf_bias += d_logit;
    Matrix<T> d_x(rows, width);
    for (std::size_t i = 0; i < cache.output.size(); ++i) {
        d_clf_weight[i] += d_logit * cache.output.data()[i];
        d_x.data()[i] = d_logit * clf_weight[i];
    }
    for (std::size_t i = blocks.size(); i-- > 0;)
        d_x = detail::attention_block_backward(blocks[i], cache.blocks[i], d_x, d_blocks[i]);
    return d_x;
}

}  // namespace afpnet
