#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "afpnet/common.hpp"
#include "afpnet/lexer.hpp"
#include "afpnet/model.hpp"

namespace afpnet {

/// One attributed code window: the token range a selected feature point was
/// computed from, its source character span and the kernel that produced it.
struct Snippet {
    std::size_t token_begin = 0;
    std::size_t token_end = 0;  ///< exclusive
    std::string text;           ///< surface tokens joined by spaces
    std::size_t char_begin = 0;
    std::size_t char_end = 0;   ///< exclusive
    double activation = 0.0;
    int height_index = 0;       ///< l
    int kernel_index = 0;       ///< j
};

struct SnippetReport {
    std::string contract_id;
    std::string source;
    double probability = 0.0;
    int decision = 0;
    std::vector<Snippet> snippets;  ///< activation descending
    std::vector<std::pair<std::string, std::size_t>> word_counts;  ///< punctuation filtered
};

inline constexpr std::size_t kDefaultReportDepth = 25;

/// Maps every selected feature point back to its source window, keeps the
/// strongest entry per distinct character span, and tallies non-punctuation
/// word frequencies over the kept snippets.
template <class T>
SnippetReport attribute(const std::string& id, const std::string& source, const Model<T>& model,
                        const Vocabulary& vocab, std::size_t max_snippets = kDefaultReportDepth) {
    SnippetReport report;
    report.contract_id = id;
    report.source = source;

    const TokenSequence tokens = tokenize(source);
    const std::vector<std::int32_t> ids = encode(tokens, vocab);
    const ForwardResult<T> fwd = model_forward(model, std::span<const std::int32_t>(ids));
    report.probability = static_cast<double>(fwd.prediction.probability);
    report.decision = fwd.prediction.decision;

    const ModelConfig& cfg = model.config;
    std::map<std::pair<std::size_t, std::size_t>, Snippet> best_by_span;
    for (std::size_t row = 0; row < fwd.features.values.rows(); ++row) {
        const int l = static_cast<int>(row) / cfg.kernels_per_height;
        const int j = static_cast<int>(row) % cfg.kernels_per_height;
        const auto h = static_cast<std::size_t>(cfg.filter_heights[static_cast<std::size_t>(l)]);
        for (int p = 0; p < cfg.top_points; ++p) {
            const std::int64_t start = fwd.features.provenance(row, static_cast<std::size_t>(p));
            if (start < 0) continue;
            Snippet s;
            s.token_begin = static_cast<std::size_t>(start);
            s.token_end = s.token_begin + h;
            s.char_begin = tokens.tokens[s.token_begin].begin;
            s.char_end = tokens.tokens[s.token_end - 1].end;
            s.activation = static_cast<double>(fwd.features.values(row, static_cast<std::size_t>(p)));
            s.height_index = l;
            s.kernel_index = j;
            const auto key = std::make_pair(s.char_begin, s.char_end);
            auto it = best_by_span.find(key);
            if (it == best_by_span.end()) {
                for (std::size_t t = s.token_begin; t < s.token_end; ++t) {
                    if (t > s.token_begin) s.text += ' ';
                    s.text += tokens.tokens[t].text;
                }
                best_by_span.emplace(key, std::move(s));
            } else if (s.activation > it->second.activation) {
                s.text = it->second.text;
                it->second = std::move(s);
            }
        }
    }

    report.snippets.reserve(best_by_span.size());
    for (auto& [span, snippet] : best_by_span) report.snippets.push_back(std::move(snippet));
    std::sort(report.snippets.begin(), report.snippets.end(), [](const Snippet& a, const Snippet& b) {
        if (a.activation != b.activation) return a.activation > b.activation;
        if (a.char_begin != b.char_begin) return a.char_begin < b.char_begin;
        if (a.char_end != b.char_end) return a.char_end < b.char_end;
        if (a.height_index != b.height_index) return a.height_index < b.height_index;
        return a.kernel_index < b.kernel_index;
    });
    if (report.snippets.size() > max_snippets) report.snippets.resize(max_snippets);

    std::map<std::string, std::size_t> counts;
    for (const Snippet& s : report.snippets)
        for (std::size_t t = s.token_begin; t < s.token_end; ++t) {
            const std::string& word = tokens.tokens[t].text;
            if (is_punct_token(word)) continue;
            ++counts[word];
        }
    report.word_counts.assign(counts.begin(), counts.end());
    std::sort(report.word_counts.begin(), report.word_counts.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
              });
    return report;
}

enum class ReportFormat { markdown, html };

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> merged_spans(const SnippetReport& report) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    spans.reserve(report.snippets.size());
    for (const Snippet& s : report.snippets) spans.emplace_back(s.char_begin, s.char_end);
    std::sort(spans.begin(), spans.end());
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (const auto& [begin, end] : spans) {
        if (!merged.empty() && begin <= merged.back().second)
            merged.back().second = std::max(merged.back().second, end);
        else
            merged.emplace_back(begin, end);
    }
    return merged;
}

inline std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

/// Renders the source with the ranked spans highlighted, the snippet table
/// and the word-frequency table. Overlapping spans merge into one highlight
/// region; every snippet still gets its own table row.
inline std::string render_report(const SnippetReport& report, ReportFormat format) {
    const auto merged = detail::merged_spans(report);
    std::string out;

    if (format == ReportFormat::markdown) {
        out += "# Snippet report: " + report.contract_id + "\n\n";
        out += "probability: " + detail::format_value(report.probability) +
               "  \ndecision: " + std::to_string(report.decision) + "\n\n";
        out += "## Source\n\n```\n";
        std::size_t pos = 0;
        for (const auto& [begin, end] : merged) {
            out.append(report.source, pos, begin - pos);
            out += "[[";
            out.append(report.source, begin, end - begin);
            out += "]]";
            pos = end;
        }
        out.append(report.source, pos, report.source.size() - pos);
        out += "\n```\n\n## Snippets\n\n";
        out += "| rank | activation | kernel (l, j) | chars | tokens |\n";
        out += "|---:|---:|:---|:---|:---|\n";
        for (std::size_t i = 0; i < report.snippets.size(); ++i) {
            const Snippet& s = report.snippets[i];
            out += "| " + std::to_string(i + 1) + " | " + detail::format_value(s.activation) +
                   " | (" + std::to_string(s.height_index) + ", " +
                   std::to_string(s.kernel_index) + ") | [" + std::to_string(s.char_begin) + ", " +
                   std::to_string(s.char_end) + ") | `" + s.text + "` |\n";
        }
        out += "\n## Word frequencies\n\n| word | count |\n|:---|---:|\n";
        for (const auto& [word, count] : report.word_counts)
            out += "| `" + word + "` | " + std::to_string(count) + " |\n";
        return out;
    }

    out += "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n";
    out += "<title>Snippet report: " + detail::html_escape(report.contract_id) + "</title>\n";
    out += "<style>mark{background:#ffd54d}pre{border:1px solid #ccc;padding:8px}"
           "table{border-collapse:collapse}td,th{border:1px solid #999;padding:2px 8px}</style>\n";
    out += "</head><body>\n<h1>Snippet report: " + detail::html_escape(report.contract_id) +
           "</h1>\n";
    out += "<p>probability: " + detail::format_value(report.probability) +
           "<br>decision: " + std::to_string(report.decision) + "</p>\n<pre>";
    std::size_t pos = 0;
    for (const auto& [begin, end] : merged) {
        out += detail::html_escape(std::string_view(report.source).substr(pos, begin - pos));
        out += "<mark>";
        out += detail::html_escape(std::string_view(report.source).substr(begin, end - begin));
        out += "</mark>";
        pos = end;
    }
    out += detail::html_escape(std::string_view(report.source).substr(pos));
    out += "</pre>\n<h2>Snippets</h2>\n<table>\n"
           "<tr><th>rank</th><th>activation</th><th>kernel (l, j)</th><th>chars</th>"
           "<th>tokens</th></tr>\n";
    for (std::size_t i = 0; i < report.snippets.size(); ++i) {
        const Snippet& s = report.snippets[i];
        out += "<tr><td>" + std::to_string(i + 1) + "</td><td>" +
               detail::format_value(s.activation) + "</td><td>(" +
               std::to_string(s.height_index) + ", " + std::to_string(s.kernel_index) +
               ")</td><td>[" + std::to_string(s.char_begin) + ", " + std::to_string(s.char_end) +
               ")</td><td><code>" + detail::html_escape(s.text) + "</code></td></tr>\n";
    }
    out += "</table>\n<h2>Word frequencies</h2>\n<table>\n<tr><th>word</th><th>count</th></tr>\n";
    for (const auto& [word, count] : report.word_counts)
        out += "<tr><td><code>" + detail::html_escape(word) + "</code></td><td>" +
               std::to_string(count) + "</td></tr>\n";
    out += "</table>\n</body></html>\n";
    return out;
}

}  // namespace afpnet
