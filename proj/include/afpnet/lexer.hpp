#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "afpnet/common.hpp"
#include "afpnet/ingest.hpp"

namespace afpnet {

/// One lexed token. `text` is the model-facing surface form (numeric literals
/// become "<NUM>", string literals "<STR>"); [begin, end) is the byte span of
/// the original lexeme in the source, kept for snippet attribution.
struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct TokenSequence {
    std::vector<Token> tokens;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        out.reserve(tokens.size());
        for (const Token& t : tokens) out.push_back(t.text);
        return out;
    }
};

inline constexpr const char* kNumToken = "<NUM>";
inline constexpr const char* kStrToken = "<STR>";

namespace detail {

inline bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
inline bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
inline bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }
inline bool hex_digit(char c) { return std::isxdigit(static_cast<unsigned char>(c)); }

// Multi-character operators, longest first for maximal munch.
inline const std::vector<std::string_view>& multi_char_operators() {
    static const std::vector<std::string_view> ops = {
        ">>>=", "<<=", ">>=", ">>>", "**=", "==", "!=", "<=", ">=", "&&", "||",
        "+=",  "-=",  "*=",  "/=",  "%=",  "|=", "&=", "^=", "<<", ">>", "**",
        "++",  "--",  "->",  "=>",
    };
    return ops;
}

}  // namespace detail

/// True for tokens made solely of operator/punctuation characters.
inline bool is_punct_token(std::string_view t) {
    if (t.empty()) return false;
    constexpr std::string_view punct = "+-*/%=<>!&|^~?:;,.(){}[]";
    for (char c : t)
        if (punct.find(c) == std::string_view::npos) return false;
    return true;
}

/// Slices source text into tokens: comments dropped, identifiers and keywords
/// kept verbatim (case preserved), numeric literals bucketed to <NUM>, string
/// literals to <STR>, operators matched with maximal munch.
inline TokenSequence tokenize(std::string_view source) {
    TokenSequence seq;
    const std::size_t n = source.size();
    std::size_t i = 0;
    auto emit = [&](std::string text, std::size_t begin, std::size_t end) {
        seq.tokens.push_back(Token{std::move(text), begin, end});
    };
    while (i < n) {
        const char c = source[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && source[i + 1] == '/') {
            while (i < n && source[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && source[i + 1] == '*') {
            const std::size_t close = source.find("*/", i + 2);
            i = close == std::string_view::npos ? n : close + 2;
            continue;
        }
        if (detail::ident_start(c)) {
            const std::size_t begin = i;
            while (i < n && detail::ident_char(source[i])) ++i;
            emit(std::string(source.substr(begin, i - begin)), begin, i);
            continue;
        }
        if (detail::digit(c)) {
            const std::size_t begin = i;
            if (c == '0' && i + 1 < n && (source[i + 1] == 'x' || source[i + 1] == 'X') &&
                i + 2 < n && detail::hex_digit(source[i + 2])) {
                i += 2;
                while (i < n && detail::hex_digit(source[i])) ++i;
            } else {
                while (i < n && detail::digit(source[i])) ++i;
                if (i + 1 < n && source[i] == '.' && detail::digit(source[i + 1])) {
                    ++i;
                    while (i < n && detail::digit(source[i])) ++i;
                }
                if (i < n && (source[i] == 'e' || source[i] == 'E')) {
                    std::size_t j = i + 1;
                    if (j < n && (source[j] == '+' || source[j] == '-')) ++j;
                    if (j < n && detail::digit(source[j])) {
                        i = j;
                        while (i < n && detail::digit(source[i])) ++i;
                    }
                }
            }
            emit(kNumToken, begin, i);
            continue;
        }
        if (c == '"' || c == '\'') {
            const char quote = c;
            const std::size_t begin = i;
            ++i;
            while (i < n && source[i] != '\n') {
                if (source[i] == '\\' && i + 1 < n && source[i + 1] != '\n') {
                    i += 2;
                    continue;
                }
                if (source[i] == quote) {
                    ++i;
                    break;
                }
                ++i;
            }
            emit(kStrToken, begin, i);
            continue;
        }
        bool matched = false;
        for (std::string_view op : detail::multi_char_operators()) {
            if (source.substr(i, op.size()) == op) {
                emit(std::string(op), i, i + op.size());
                i += op.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        emit(std::string(1, c), i, i + 1);
        ++i;
    }
    if (seq.empty()) throw DataError("empty after normalization");
    return seq;
}

/// Token -> id mapping with reserved <PAD>=0 and <UNK>=1. Ids are dense and
/// assigned by descending training-set frequency, ties broken lexically.
class Vocabulary {
public:
    Vocabulary() {
        id_to_token_ = {"<PAD>", "<UNK>"};
        token_to_id_ = {{"<PAD>", kPadId}, {"<UNK>", kUnkId}};
    }

    std::size_t size() const { return id_to_token_.size(); }

    std::int32_t id_of(std::string_view token) const {
        auto it = token_to_id_.find(std::string(token));
        return it == token_to_id_.end() ? kUnkId : it->second;
    }

    bool contains(std::string_view token) const {
        return token_to_id_.count(std::string(token)) > 0;
    }

    const std::string& token_of(std::int32_t id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
            throw Error("vocabulary id out of range: " + std::to_string(id));
        return id_to_token_[static_cast<std::size_t>(id)];
    }

    static Vocabulary build(const std::vector<TokenSequence>& sequences, int min_freq) {
        if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
        if (sequences.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
        std::unordered_map<std::string, std::size_t> freq;
        for (const TokenSequence& seq : sequences)
            for (const Token& t : seq.tokens) ++freq[t.text];
        std::vector<std::pair<std::string, std::size_t>> kept;
        kept.reserve(freq.size());
        for (auto& [token, count] : freq)
            if (count >= static_cast<std::size_t>(min_freq)) kept.emplace_back(token, count);
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocabulary v;
        for (auto& [token, count] : kept) v.append(token);
        return v;
    }

    static Vocabulary build(const Corpus& corpus, int min_freq) {
        if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
        std::vector<TokenSequence> seqs;
        seqs.reserve(corpus.size());
        for (const LabeledContract& c : corpus.contracts) seqs.push_back(tokenize(c.source));
        return build(seqs, min_freq);
    }

    nlohmann::json to_json() const {
        std::map<std::string, std::int32_t> sorted;
        for (const auto& [token, id] : token_to_id_) sorted.emplace(token, id);
        return nlohmann::json(sorted);
    }

    static Vocabulary from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw DataError("vocabulary JSON must be an object");
        const std::size_t v = j.size();
        std::vector<std::string> tokens(v);
        std::vector<bool> used(v, false);
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!it.value().is_number_integer())
                throw DataError("vocabulary ids must be integers");
            const std::int64_t id = it.value().get<std::int64_t>();
            if (id < 0 || static_cast<std::size_t>(id) >= v || used[static_cast<std::size_t>(id)])
                throw DataError("vocabulary ids must be dense and unique in [0, V)");
            used[static_cast<std::size_t>(id)] = true;
            tokens[static_cast<std::size_t>(id)] = it.key();
        }
        if (v < 2 || tokens[0] != "<PAD>" || tokens[1] != "<UNK>")
            throw DataError("vocabulary must map <PAD> to 0 and <UNK> to 1");
        Vocabulary out;
        for (std::size_t id = 2; id < v; ++id) out.append(tokens[id]);
        return out;
    }

private:
    void append(const std::string& token) {
        if (token_to_id_.count(token)) return;
        token_to_id_.emplace(token, static_cast<std::int32_t>(id_to_token_.size()));
        id_to_token_.push_back(token);
    }

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::int32_t> token_to_id_;
};

/// Out-of-vocabulary tokens map to <UNK>; length is always preserved.
inline std::vector<std::int32_t> encode(const TokenSequence& seq, const Vocabulary& vocab) {
    std::vector<std::int32_t> ids;
    ids.reserve(seq.size());
    for (const Token& t : seq.tokens) ids.push_back(vocab.id_of(t.text));
    return ids;
}

}  // namespace afpnet
