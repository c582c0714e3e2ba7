#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/matrix.hpp"

namespace afpnet {

template <class T>
struct ConvKernel {
    Matrix<T> weight;  ///< height x embed_dim
    T bias{};

    int height() const { return static_cast<int>(weight.rows()); }
};

/// Number of leading ids once trailing <PAD> is stripped. Padding never
/// occurs mid-sequence, so everything after the last non-PAD id is padding.
inline std::size_t content_length(std::span<const std::int32_t> ids) {
    std::size_t n = ids.size();
    while (n > 0 && ids[n - 1] == kPadId) --n;
    return n;
}

/// Row i of the result is the table row for ids[i].
template <class T>
Matrix<T> embed(std::span<const std::int32_t> ids, const Matrix<T>& table) {
    Matrix<T> out(ids.size(), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::int32_t id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
            throw Error("embed: id " + std::to_string(id) + " out of range at position " +
                        std::to_string(i));
        std::copy_n(table.data() + static_cast<std::size_t>(id) * table.cols(), table.cols(),
                    out.data() + i * out.cols());
    }
    return out;
}

/// ReLU(W . window + b) at every window position. Window rows are contiguous
/// in the row-major embedding matrix, so each output is one flat dot product.
template <class T>
std::vector<T> convolve(const Matrix<T>& embeddings, const ConvKernel<T>& kernel, int stride = 1) {
    const std::size_t h = kernel.weight.rows();
    const std::size_t k = kernel.weight.cols();
    if (k != embeddings.cols()) throw ConfigError("convolve: embedding width disagrees with kernel");
    if (stride < 1) throw ConfigError("convolve: stride must be >= 1");
    const std::size_t n = embeddings.rows();
    if (n < h) throw Error("convolve: sequence shorter than kernel height (padding policy violated)");

    const std::size_t count = (n - h) / static_cast<std::size_t>(stride) + 1;
    std::vector<T> out(count);
    const std::size_t window = h * k;
    const T* w = kernel.weight.data();
    for (std::size_t t = 0; t < count; ++t) {
        const T* e = embeddings.data() + t * static_cast<std::size_t>(stride) * k;
        T acc = kernel.bias;
        for (std::size_t i = 0; i < window; ++i) acc += w[i] * e[i];
        out[t] = acc > T{} ? acc : T{};
    }
    return out;
}

template <class T>
struct SelectedFeatures {
    std::vector<T> values;             ///< P top values (descending) then the average point
    std::vector<std::int64_t> provenance;  ///< map index per top value, -1 for empty slots
};

/// Picks the P largest values among valid positions (ties to the smaller
/// index) and appends the mean over ALL valid positions. Fewer than P valid
/// positions leave trailing zero slots; no valid positions yield an all-zero
/// row.
template <class T>
SelectedFeatures<T> select_features(std::span<const T> feature_map, int top_p,
                                    std::span<const std::uint8_t> valid_mask = {}) {
    if (top_p <= 0) throw ConfigError("select_features: top_p must be positive");
    if (!valid_mask.empty() && valid_mask.size() != feature_map.size())
        throw ConfigError("select_features: mask length disagrees with feature map");

    SelectedFeatures<T> out;
    out.values.assign(static_cast<std::size_t>(top_p) + 1, T{});
    out.provenance.assign(static_cast<std::size_t>(top_p), -1);

    std::vector<std::uint32_t> order;
    order.reserve(feature_map.size());
    T sum{};
    for (std::size_t i = 0; i < feature_map.size(); ++i) {
        if (!valid_mask.empty() && !valid_mask[i]) continue;
        order.push_back(static_cast<std::uint32_t>(i));
        sum += feature_map[i];
    }
    if (order.empty()) return out;
    out.values[static_cast<std::size_t>(top_p)] = sum / static_cast<T>(order.size());

    const auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (feature_map[a] != feature_map[b]) return feature_map[a] > feature_map[b];
        return a < b;
    };
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(top_p), order.size());
    if (take < order.size())
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                         order.end(), better);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), better);
    for (std::size_t p = 0; p < take; ++p) {
        out.values[p] = feature_map[order[p]];
        out.provenance[p] = order[p];
    }
    return out;
}

/// The FPM output: J*L rows of P selected points plus the average point.
/// Provenance records each selected point's window start in the token
/// sequence (-1 for empty slots); the average column has no single window.
template <class T>
struct FeatureMatrix {
    Matrix<T> values;                ///< feature_rows x (P+1)
    Matrix<std::int64_t> provenance; ///< feature_rows x P
    std::size_t valid_tokens = 0;
};

template <class T>
struct FpmCache {
    Matrix<T> embeddings;             ///< valid_tokens x k
    std::vector<std::vector<T>> maps; ///< post-ReLU feature map per row (empty if no valid window)
    std::size_t valid_tokens = 0;
};

/// Runs the full convolution bank and selection. Kernels are ordered
/// height-major: row l*J + j is kernel j of height filter_heights[l].
/// Windows that would overlap trailing padding are never computed, so
/// right-padding a sequence cannot change the output.
template <class T>
FeatureMatrix<T> fpm_forward(std::span<const std::int32_t> ids, const Matrix<T>& table,
                             std::span<const ConvKernel<T>> kernels, const ModelConfig& config,
                             FpmCache<T>* cache = nullptr, int num_threads = 1) {
    if (ids.empty()) throw DataError("fpm_forward: empty id sequence");
    const std::size_t rows = static_cast<std::size_t>(config.feature_rows());
    if (kernels.size() != rows) throw ConfigError("fpm_forward: kernel count disagrees with config");
    const int p = config.top_points;
    const int j_per_height = config.kernels_per_height;

    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t l = row / static_cast<std::size_t>(j_per_height);
        if (kernels[row].weight.rows() != static_cast<std::size_t>(config.filter_heights[l]))
            throw ConfigError("fpm_forward: kernel height disagrees with config at row " +
                              std::to_string(row));
        if (kernels[row].weight.cols() != table.cols())
            throw ConfigError("fpm_forward: kernel width disagrees with embedding dim");
    }

    const std::size_t valid = content_length(ids);
    Matrix<T> embeddings = embed(ids.first(valid), table);

    FeatureMatrix<T> out;
    out.values = Matrix<T>(rows, static_cast<std::size_t>(p) + 1);
    out.provenance = Matrix<std::int64_t>(rows, static_cast<std::size_t>(p));
    out.provenance.fill(-1);
    out.valid_tokens = valid;
    if (cache) {
        cache->maps.assign(rows, {});
        cache->valid_tokens = valid;
    }

    auto run_rows = [&](std::size_t row_begin, std::size_t row_end) {
        for (std::size_t row = row_begin; row < row_end; ++row) {
            const std::size_t l = row / static_cast<std::size_t>(j_per_height);
            const auto h = static_cast<std::size_t>(config.filter_heights[l]);
            if (valid < h) continue;  // no valid window; row stays zero
            std::vector<T> map = convolve(embeddings, kernels[row], config.stride);
            SelectedFeatures<T> sel = select_features<T>(map, p);
            for (int c = 0; c <= p; ++c) out.values(row, static_cast<std::size_t>(c)) = sel.values[static_cast<std::size_t>(c)];
            for (int c = 0; c < p; ++c) {
                const std::int64_t map_index = sel.provenance[static_cast<std::size_t>(c)];
                out.provenance(row, static_cast<std::size_t>(c)) =
                    map_index < 0 ? -1 : map_index * config.stride;
            }
            if (cache) cache->maps[row] = std::move(map);
        }
    };

    if (num_threads <= 1 || rows < 2) {
        run_rows(0, rows);
    } else {
        const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads), rows);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (rows + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(rows, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_rows, begin, end);
        }
        for (std::thread& t : pool) t.join();
    }

    if (cache) cache->embeddings = std::move(embeddings);
    return out;
}

/// Backward pass of the convolution bank + selection. `d_values` is the loss
/// gradient with respect to the feature matrix. Gradients for each kernel
/// accumulate into `d_kernels`; the gradient with respect to the embedded
/// (valid) token rows is written to `d_embeddings`.
///
/// Each selected point routes its gradient to its source window; the average
/// point spreads d/valid_count over every valid window, which is what lets
/// training reach windows outside the current top P.
template <class T>
void fpm_backward(const FpmCache<T>& cache, std::span<const ConvKernel<T>> kernels,
                  const FeatureMatrix<T>& out, const Matrix<T>& d_values,
                  const ModelConfig& config, Matrix<T>& d_embeddings,
                  std::span<ConvKernel<T>> d_kernels) {
    const std::size_t rows = static_cast<std::size_t>(config.feature_rows());
    if (d_values.rows() != rows || d_values.cols() != static_cast<std::size_t>(config.model_width()))
        throw ConfigError("fpm_backward: gradient shape disagrees with config");
    if (d_kernels.size() != rows) throw ConfigError("fpm_backward: kernel gradient count disagrees");

    const std::size_t k = cache.embeddings.cols();
    const int p = config.top_points;
    d_embeddings = Matrix<T>(cache.valid_tokens, k);

    std::vector<T> d_map;
    for (std::size_t row = 0; row < rows; ++row) {
        const std::vector<T>& map = cache.maps[row];
        if (map.empty()) continue;
        d_map.assign(map.size(), T{});

        const T d_avg = d_values(row, static_cast<std::size_t>(p)) / static_cast<T>(map.size());
        if (d_avg != T{})
            for (std::size_t t = 0; t < map.size(); ++t) d_map[t] = d_avg;
        for (int c = 0; c < p; ++c) {
            const std::int64_t start = out.provenance(row, static_cast<std::size_t>(c));
            if (start < 0) continue;
            d_map[static_cast<std::size_t>(start) / static_cast<std::size_t>(config.stride)] +=
                d_values(row, static_cast<std::size_t>(c));
        }

        const std::size_t h = kernels[row].weight.rows();
        const std::size_t window = h * k;
        const T* w = kernels[row].weight.data();
        T* dw = d_kernels[row].weight.data();
        for (std::size_t t = 0; t < map.size(); ++t) {
            if (map[t] <= T{} || d_map[t] == T{}) continue;  // ReLU gate: output 0 => no gradient
            const T g = d_map[t];
            const std::size_t offset = t * static_cast<std::size_t>(config.stride) * k;
            const T* e = cache.embeddings.data() + offset;
            T* de = d_embeddings.data() + offset;
            for (std::size_t i = 0; i < window; ++i) {
                dw[i] += g * e[i];
                de[i] += g * w[i];
            }
            d_kernels[row].bias += g;
        }
    }
}

}  // namespace afpnet
