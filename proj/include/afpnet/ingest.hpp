#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afpnet/common.hpp"

namespace afpnet {

enum class VulnType { reentrancy, timestamp, infinite_loop };

inline const char* to_string(VulnType t) {
    switch (t) {
        case VulnType::reentrancy: return "reentrancy";
        case VulnType::timestamp: return "timestamp";
        case VulnType::infinite_loop: return "infinite_loop";
    }
    return "?";
}

inline VulnType parse_vuln_type(std::string_view s) {
    if (s == "reentrancy") return VulnType::reentrancy;
    if (s == "timestamp") return VulnType::timestamp;
    if (s == "infinite_loop") return VulnType::infinite_loop;
    throw DataError("unknown vuln_type '" + std::string(s) +
                    "' (expected reentrancy, timestamp or infinite_loop)");
}

struct LabeledContract {
    std::string id;
    std::string source;
    VulnType vuln_type = VulnType::reentrancy;
    int label = 0;  ///< 0 = non-vulnerable, 1 = vulnerable
};

struct Corpus {
    std::vector<LabeledContract> contracts;
    VulnType vuln_type = VulnType::reentrancy;

    std::size_t size() const { return contracts.size(); }
    bool empty() const { return contracts.empty(); }
};

/// Canonical form used for duplicate equality: comments stripped, whitespace
/// runs collapsed to single spaces, leading/trailing whitespace removed.
/// String literals are copied verbatim so a "//" inside a string is not
/// mistaken for a comment. Unterminated block comments extend to the end of
/// the input; unterminated string literals end at the next newline.
inline std::string normalize_source(std::string_view src) {
    std::string out;
    out.reserve(src.size());
    bool pending_space = false;
    auto push = [&](char c) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    };
    std::size_t i = 0;
    const std::size_t n = src.size();
    while (i < n) {
        const char c = src[i];
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            pending_space = true;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            const std::size_t close = src.find("*/", i + 2);
            i = close == std::string_view::npos ? n : close + 2;
            pending_space = true;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
            ++i;
            continue;
        }
        if (c == '"' || c == '\'') {
            const char quote = c;
            push(c);
            ++i;
            while (i < n && src[i] != '\n') {
                const char s = src[i];
                push(s);
                ++i;
                if (s == '\\' && i < n && src[i] != '\n') {
                    push(src[i]);
                    ++i;
                    continue;
                }
                if (s == quote) break;
            }
            continue;
        }
        push(c);
        ++i;
    }
    return out;
}

namespace detail {

inline bool blank(std::string_view s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace detail

/// Loads a JSONL manifest: one object per line with fields `id`, exactly one
/// of `path` (relative to the manifest) or `source`, `vuln_type` and `label`.
/// When `filter` is given, rows of other vulnerability types are skipped;
/// otherwise the manifest must hold a single type.
inline Corpus load_manifest(const std::filesystem::path& manifest_path,
                            std::optional<VulnType> filter = std::nullopt) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
    const std::filesystem::path base = manifest_path.parent_path();

    Corpus corpus;
    if (filter) corpus.vuln_type = *filter;
    std::unordered_map<std::string, std::size_t> seen_ids;
    bool type_fixed = filter.has_value();

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::blank(line)) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest row " + std::to_string(row) + ": " + e.what());
        }
        auto fail = [&](const std::string& msg) -> DataError {
            return DataError("manifest row " + std::to_string(row) + ": " + msg);
        };
        if (!j.is_object()) throw fail("expected a JSON object");
        if (!j.contains("id") || !j["id"].is_string()) throw fail("missing string field 'id'");
        if (!j.contains("vuln_type") || !j["vuln_type"].is_string())
            throw fail("missing string field 'vuln_type'");
        if (!j.contains("label") || !j["label"].is_number_integer())
            throw fail("missing integer field 'label'");

        LabeledContract c;
        c.id = j["id"].get<std::string>();
        if (c.id.empty()) throw fail("'id' must be non-empty");
        try {
            c.vuln_type = parse_vuln_type(j["vuln_type"].get<std::string>());
        } catch (const DataError& e) {
            throw fail(e.what());
        }
        const std::int64_t label = j["label"].get<std::int64_t>();
        if (label != 0 && label != 1)
            throw fail("label must be 0 or 1, got " + std::to_string(label));
        c.label = static_cast<int>(label);

        const bool has_path = j.contains("path");
        const bool has_source = j.contains("source");
        if (has_path == has_source) throw fail("exactly one of 'path' or 'source' is required");
        if (has_path) {
            if (!j["path"].is_string()) throw fail("'path' must be a string");
            const std::filesystem::path p = base / j["path"].get<std::string>();
            if (!std::filesystem::exists(p))
                throw fail("referenced file does not exist: " + p.string());
            c.source = read_file(p);
        } else {
            if (!j["source"].is_string()) throw fail("'source' must be a string");
            c.source = j["source"].get<std::string>();
        }
        if (detail::blank(c.source)) throw fail("source is empty after whitespace strip");

        if (filter && c.vuln_type != *filter) continue;
        if (auto it = seen_ids.find(c.id); it != seen_ids.end())
            throw fail("duplicate id '" + c.id + "' (first seen at row " +
                       std::to_string(it->second) + ")");
        seen_ids.emplace(c.id, row);

        if (!type_fixed) {
            corpus.vuln_type = c.vuln_type;
            type_fixed = true;
        } else if (c.vuln_type != corpus.vuln_type) {
            throw fail("mixed vuln_type in corpus; pass a filter to select one");
        }
        corpus.contracts.push_back(std::move(c));
    }
    return corpus;
}

/// Writes a corpus as a JSONL manifest with inline sources.
inline void write_manifest(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open manifest for writing: " + path.string());
    for (const LabeledContract& c : corpus.contracts) {
        nlohmann::json j{
            {"id", c.id},
            {"label", c.label},
            {"source", c.source},
            {"vuln_type", to_string(c.vuln_type)},
        };
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("cannot write manifest: " + path.string());
}

struct DupGroup {
    std::string survivor_id;
    std::vector<std::string> collapsed_ids;  ///< dropped duplicates, in input order
};

struct DedupResult {
    Corpus corpus;
    std::vector<DupGroup> groups;  ///< one entry per group that actually collapsed
};

/// Collapses contracts whose normalized sources are byte-identical onto the
/// first occurrence. Conflicting labels inside a duplicate group are an
/// error: a source cannot be both vulnerable and safe.
inline DedupResult dedup_corpus_report(const Corpus& corpus) {
    DedupResult result;
    result.corpus.vuln_type = corpus.vuln_type;

    std::unordered_map<std::string, std::size_t> survivor_by_norm;  // norm -> index in result
    std::vector<std::size_t> group_index(corpus.size(), 0);
    std::vector<DupGroup> groups;
    groups.reserve(corpus.size());

    for (const LabeledContract& c : corpus.contracts) {
        std::string norm = normalize_source(c.source);
        auto it = survivor_by_norm.find(norm);
        if (it == survivor_by_norm.end()) {
            survivor_by_norm.emplace(std::move(norm), groups.size());
            groups.push_back(DupGroup{c.id, {}});
            result.corpus.contracts.push_back(c);
        } else {
            DupGroup& g = groups[it->second];
            const LabeledContract& survivor = result.corpus.contracts[it->second];
            if (survivor.label != c.label) {
                std::string ids = g.survivor_id;
                for (const std::string& id : g.collapsed_ids) ids += ", " + id;
                ids += ", " + c.id;
                throw DataError("conflicting labels within duplicate group {" + ids + "}");
            }
            g.collapsed_ids.push_back(c.id);
        }
    }
    for (DupGroup& g : groups)
        if (!g.collapsed_ids.empty()) result.groups.push_back(std::move(g));
    return result;
}

inline Corpus dedup_corpus(const Corpus& corpus) { return dedup_corpus_report(corpus).corpus; }

/// Seeded random split into (train, test). Train receives
/// floor(train_fraction * n) contracts; the two sides partition the input.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                              std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    if (corpus.size() < 2) throw DataError("cannot split a corpus with fewer than 2 contracts");

    const std::size_t n = corpus.size();
    // floor(fraction * n), guarded against cases like 0.7 * 10 = 6.999...
    const auto train_size = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(n) + 1e-9));
    const std::vector<std::size_t> perm = seeded_permutation(n, seed);

    Corpus train, test;
    train.vuln_type = test.vuln_type = corpus.vuln_type;
    train.contracts.reserve(train_size);
    test.contracts.reserve(n - train_size);
    for (std::size_t i = 0; i < n; ++i) {
        const LabeledContract& c = corpus.contracts[perm[i]];
        (i < train_size ? train : test).contracts.push_back(c);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace afpnet
