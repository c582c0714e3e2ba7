#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/model.hpp"

namespace afpnet {

/// Closed-form operation and space counts for one forward pass:
///   flop_fpm   = sum over heights of [(n - H)/S + 1] * K * J
///   flop_rpam  = (J*L)^2 * (P+1)                (independent of n)
///   flop_total = flop_fpm + N * flop_rpam
///   space_fpm  = sum over heights of n * K * J * S * H
///   space_rpam = heads * (P+1)^2 + (P+1) * J * L
struct CostModel {
    std::uint64_t flop_fpm = 0;
    std::uint64_t flop_rpam = 0;
    std::uint64_t flop_total = 0;
    std::uint64_t space_fpm = 0;
    std::uint64_t space_rpam = 0;
    std::int64_t sequence_length = 0;
    ModelConfig config;  ///< echoed inputs (n, K, S, heights, J, L, P, N, heads)
};

inline CostModel count_flops(const ModelConfig& config, std::int64_t n) {
    config.validate();
    if (n < config.max_height())
        throw ConfigError("count_flops: sequence length must be >= the largest filter height");
    CostModel cm;
    cm.config = config;
    cm.sequence_length = n;
    const auto k = static_cast<std::uint64_t>(config.embed_dim);
    const auto j = static_cast<std::uint64_t>(config.kernels_per_height);
    const auto s = static_cast<std::uint64_t>(config.stride);
    for (int h : config.filter_heights) {
        const auto windows = static_cast<std::uint64_t>((n - h) / config.stride + 1);
        cm.flop_fpm += windows * k * j;
        cm.space_fpm += static_cast<std::uint64_t>(n) * k * j * s * static_cast<std::uint64_t>(h);
    }
    const auto rows = static_cast<std::uint64_t>(config.feature_rows());
    const auto width = static_cast<std::uint64_t>(config.model_width());
    cm.flop_rpam = rows * rows * width;
    cm.flop_total = cm.flop_fpm + static_cast<std::uint64_t>(config.attention_blocks) * cm.flop_rpam;
    cm.space_rpam = static_cast<std::uint64_t>(config.num_heads) * width * width + width * rows;
    return cm;
}

struct LengthTiming {
    std::int64_t n = 0;
    double min_ms = 0.0;
    double median_ms = 0.0;
    double max_ms = 0.0;
    std::uint64_t flop_total = 0;
};

struct ScalingReport {
    std::vector<LengthTiming> rows;
    std::vector<double> median_ratios;  ///< median(rows[i+1]) / median(rows[i])
    int repeats = 0;
};

/// Times full forward passes on synthetic uniform-random id sequences.
/// Warm-up runs are excluded; medians over `repeats` are what acceptance
/// checks. Single-threaded by default for reproducibility; `num_threads`
/// enables the parallel convolution path for comparison.
template <class T>
ScalingReport measure_scaling(const Model<T>& model, std::span<const std::int64_t> lengths,
                              int repeats, int num_threads = 1, std::uint64_t seed = 0,
                              int warmup = 2) {
    if (lengths.empty()) throw ConfigError("measure_scaling: need at least one length");
    for (std::size_t i = 1; i < lengths.size(); ++i)
        if (lengths[i] <= lengths[i - 1])
            throw ConfigError("measure_scaling: lengths must be strictly ascending");
    if (repeats < 10) throw ConfigError("measure_scaling: need at least 10 repeats");

    using Clock = std::chrono::steady_clock;
    std::mt19937_64 rng(seed);
    ScalingReport report;
    report.repeats = repeats;

    for (std::int64_t n : lengths) {
        if (n < model.config.max_height())
            throw ConfigError("measure_scaling: length below the largest filter height");
        std::vector<std::int32_t> ids(static_cast<std::size_t>(n));
        for (auto& id : ids)  // [1, V): UNK and real tokens, never PAD
            id = static_cast<std::int32_t>(1 + uniform_below(rng, model.vocab_size() - 1));

        for (int w = 0; w < warmup; ++w)
            model_forward(model, std::span<const std::int32_t>(ids), num_threads);

        std::vector<double> times_ms;
        times_ms.reserve(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            const auto begin = Clock::now();
            model_forward(model, std::span<const std::int32_t>(ids), num_threads);
            const auto end = Clock::now();
            times_ms.push_back(std::chrono::duration<double, std::milli>(end - begin).count());
        }
        std::sort(times_ms.begin(), times_ms.end());
        LengthTiming row;
        row.n = n;
        row.min_ms = times_ms.front();
        row.max_ms = times_ms.back();
        const std::size_t mid = times_ms.size() / 2;
        row.median_ms = times_ms.size() % 2 == 1
                            ? times_ms[mid]
                            : 0.5 * (times_ms[mid - 1] + times_ms[mid]);
        row.flop_total = count_flops(model.config, n).flop_total;
        report.rows.push_back(row);
    }
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        report.median_ratios.push_back(report.rows[i].median_ms / report.rows[i - 1].median_ms);
    return report;
}

}  // namespace afpnet
