#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "afpnet/common.hpp"

namespace afpnet {

/// Architecture hyperparameters. Defaults: 256-wide embeddings, five filter
/// heights with 200 kernels each, and a 6-deep attention stack over the
/// selected feature points.
struct ModelConfig {
    int embed_dim = 256;                            ///< k
    std::vector<int> filter_heights{2, 3, 5, 7, 11};
    int kernels_per_height = 200;                   ///< J
    int top_points = 15;                            ///< P
    int attention_blocks = 6;                       ///< N
    int num_heads = 4;
    int stride = 1;
    int ffn_hidden = 0;                             ///< 0 selects 4 * (top_points + 1)
    double threshold = 0.5;

    int num_heights() const { return static_cast<int>(filter_heights.size()); }
    int feature_rows() const { return kernels_per_height * num_heights(); }
    int model_width() const { return top_points + 1; }
    int head_dim() const { return model_width() / num_heads; }
    int ffn_width() const { return ffn_hidden > 0 ? ffn_hidden : 4 * model_width(); }
    int max_height() const { return *std::max_element(filter_heights.begin(), filter_heights.end()); }
    std::size_t classifier_inputs() const {
        return static_cast<std::size_t>(feature_rows()) * static_cast<std::size_t>(model_width());
    }

    void validate() const {
        if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
        if (filter_heights.empty()) throw ConfigError("filter_heights must be non-empty");
        for (int h : filter_heights)
            if (h < 1) throw ConfigError("filter heights must be strictly positive");
        if (kernels_per_height < 1) throw ConfigError("kernels_per_height must be >= 1");
        if (top_points < 1) throw ConfigError("top_points must be >= 1");
        if (attention_blocks < 0) throw ConfigError("attention_blocks must be >= 0");
        if (num_heads < 1) throw ConfigError("num_heads must be >= 1");
        if (model_width() % num_heads != 0)
            throw ConfigError("top_points + 1 must be divisible by num_heads");
        if (stride < 1) throw ConfigError("stride must be >= 1");
        if (ffn_hidden < 0) throw ConfigError("ffn_hidden must be >= 0");
        if (threshold < 0.0 || threshold > 1.0) throw ConfigError("threshold must lie in [0, 1]");
    }
};

/// Training schedule. Defaults: AdamW at 1e-5, batches of 32, 50 epochs,
/// results averaged over five trials.
struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 32;
    int epochs = 50;
    int trials = 5;
    std::uint64_t seed = 0;
    double class_weight = 1.0;   ///< positive-class loss multiplier
    double weight_decay = 0.01;
    double clip_norm = 0.0;      ///< 0 disables gradient clipping
    int vocab_min_freq = 2;
    double train_fraction = 0.8;

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (class_weight <= 0.0) throw ConfigError("class_weight must be positive");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
        if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
        if (vocab_min_freq < 1) throw ConfigError("vocab_min_freq must be >= 1");
        if (train_fraction <= 0.0 || train_fraction >= 1.0)
            throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                                const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw ConfigError(std::string(what) + ": unknown key '" + it.key() + "'");
    }
}

}  // namespace detail

inline nlohmann::json to_json(const ModelConfig& c) {
    return nlohmann::json{
        {"embed_dim", c.embed_dim},
        {"filter_heights", c.filter_heights},
        {"kernels_per_height", c.kernels_per_height},
        {"top_points", c.top_points},
        {"attention_blocks", c.attention_blocks},
        {"num_heads", c.num_heads},
        {"stride", c.stride},
        {"ffn_hidden", c.ffn_hidden},
        {"threshold", c.threshold},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"embed_dim", "filter_heights", "kernels_per_height", "top_points",
                                 "attention_blocks", "num_heads", "stride", "ffn_hidden", "threshold"},
                                "model config");
    ModelConfig c;
    try {
        c.embed_dim = j.value("embed_dim", c.embed_dim);
        c.filter_heights = j.value("filter_heights", c.filter_heights);
        c.kernels_per_height = j.value("kernels_per_height", c.kernels_per_height);
        c.top_points = j.value("top_points", c.top_points);
        c.attention_blocks = j.value("attention_blocks", c.attention_blocks);
        c.num_heads = j.value("num_heads", c.num_heads);
        c.stride = j.value("stride", c.stride);
        c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
        c.threshold = j.value("threshold", c.threshold);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"trials", c.trials},
        {"seed", c.seed},
        {"class_weight", c.class_weight},
        {"weight_decay", c.weight_decay},
        {"clip_norm", c.clip_norm},
        {"vocab_min_freq", c.vocab_min_freq},
        {"train_fraction", c.train_fraction},
    };
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"learning_rate", "batch_size", "epochs", "trials", "seed",
                                 "class_weight", "weight_decay", "clip_norm", "vocab_min_freq",
                                 "train_fraction"},
                                "train config");
    TrainConfig c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
        c.class_weight = j.value("class_weight", c.class_weight);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.clip_norm = j.value("clip_norm", c.clip_norm);
        c.vocab_min_freq = j.value("vocab_min_freq", c.vocab_min_freq);
        c.train_fraction = j.value("train_fraction", c.train_fraction);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace afpnet
