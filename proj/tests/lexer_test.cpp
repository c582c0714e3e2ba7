#include <gtest/gtest.h>

#include <afpnet/lexer.hpp>

#include "test_util.hpp"

using namespace afpnet;

namespace {

std::vector<std::string> toks(const std::string& src) { return tokenize(src).texts(); }

}  // namespace

TEST(Tokenize, BasicDeclaration) {
    EXPECT_EQ(toks("uint a = 1;"),
              (std::vector<std::string>{"uint", "a", "=", "<NUM>", ";"}));
}

TEST(Tokenize, MaximalMunchAndLiteralBuckets) {
    EXPECT_EQ(toks("if (x >= 2) { y += \"s\"; }"),
              (std::vector<std::string>{"if", "(", "x", ">=", "<NUM>", ")", "{", "y", "+=",
                                        "<STR>", ";", "}"}));
}

TEST(Tokenize, DottedMemberAccessSplits) {
    EXPECT_EQ(toks("block.timestamp"),
              (std::vector<std::string>{"block", ".", "timestamp"}));
}

TEST(Tokenize, NumericForms) {
    EXPECT_EQ(toks("x = 0xFF + 1.5 + 2e10;"),
              (std::vector<std::string>{"x", "=", "<NUM>", "+", "<NUM>", "+", "<NUM>", ";"}));
}

TEST(Tokenize, CommentsDropped) {
    EXPECT_EQ(toks("a // line\n/* block */ b"), (std::vector<std::string>{"a", "b"}));
}

TEST(Tokenize, CasePreserved) {
    EXPECT_EQ(toks("Foo foo FOO"), (std::vector<std::string>{"Foo", "foo", "FOO"}));
}

TEST(Tokenize, Deterministic) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        std::string src;
        for (int s = 0; s < 5; ++s) src += testutil::filler_statement(rng) + "\n";
        const auto a = toks(src);
        const auto b = toks(src);
        EXPECT_EQ(a, b);
    }
}

TEST(Tokenize, NoEmptyTokensAndNoWhitespace) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 30; ++i) {
        std::string src = "function f() { ";
        for (int s = 0; s < 4; ++s) src += testutil::filler_statement(rng) + "  \t ";
        src += "}";
        for (const Token& t : tokenize(src).tokens) {
            EXPECT_FALSE(t.text.empty());
            for (char c : t.text) EXPECT_FALSE(std::isspace(static_cast<unsigned char>(c)));
            EXPECT_LT(t.begin, t.end);
            EXPECT_LE(t.end, src.size());
        }
    }
}

TEST(Tokenize, SpansPointAtOriginalLexemes) {
    const std::string src = "uint amount = 42; // pay\ncall(amount);";
    const TokenSequence seq = tokenize(src);
    for (const Token& t : seq.tokens) {
        if (t.text == "<NUM>") {
            EXPECT_EQ(src.substr(t.begin, t.end - t.begin), "42");
        } else if (t.text != "<STR>") {
            EXPECT_EQ(src.substr(t.begin, t.end - t.begin), t.text);
        }
    }
}

TEST(Tokenize, EmptyAfterNormalizationIsAnError) {
    EXPECT_THROW(tokenize("   \n\t  "), DataError);
    EXPECT_THROW(tokenize("// only a comment"), DataError);
}

TEST(Vocabulary, FrequencyThreshold) {
    // corpus tokens {a:3, b:1}
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("a a a b"));
    const Vocabulary v2 = Vocabulary::build(seqs, 2);
    EXPECT_EQ(v2.size(), 3u);  // PAD, UNK, a
    EXPECT_TRUE(v2.contains("a"));
    EXPECT_FALSE(v2.contains("b"));

    const Vocabulary v1 = Vocabulary::build(seqs, 1);
    EXPECT_EQ(v1.size(), 4u);
    EXPECT_TRUE(v1.contains("b"));
}

TEST(Vocabulary, IdsOrderedByFrequencyThenLexically) {
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("zz zz zz mm mm aa aa bb"));
    const Vocabulary v = Vocabulary::build(seqs, 1);
    EXPECT_EQ(v.id_of("zz"), 2);   // freq 3
    EXPECT_EQ(v.id_of("aa"), 3);   // freq 2, lexically before mm
    EXPECT_EQ(v.id_of("mm"), 4);
    EXPECT_EQ(v.id_of("bb"), 5);
}

TEST(Vocabulary, RebuildIsByteIdentical) {
    std::mt19937_64 rng(8);
    std::vector<TokenSequence> seqs;
    for (int i = 0; i < 40; ++i) {
        std::string src;
        for (int s = 0; s < 6; ++s) src += testutil::filler_statement(rng) + "\n";
        seqs.push_back(tokenize(src));
    }
    const Vocabulary a = Vocabulary::build(seqs, 2);
    const Vocabulary b = Vocabulary::build(seqs, 2);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Vocabulary, JsonRoundTrip) {
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("alpha beta alpha gamma"));
    const Vocabulary v = Vocabulary::build(seqs, 1);
    const Vocabulary back = Vocabulary::from_json(v.to_json());
    EXPECT_EQ(back.size(), v.size());
    EXPECT_EQ(back.id_of("alpha"), v.id_of("alpha"));
    EXPECT_EQ(back.id_of("gamma"), v.id_of("gamma"));
}

TEST(Vocabulary, FromJsonValidatesReservedIds) {
    EXPECT_THROW(Vocabulary::from_json(nlohmann::json{{"<PAD>", 1}, {"<UNK>", 0}}), DataError);
    EXPECT_THROW(Vocabulary::from_json(nlohmann::json{{"<PAD>", 0}, {"<UNK>", 1}, {"a", 3}}),
                 DataError);
}

TEST(Encode, UnknownTokensMapToUnk) {
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("a a"));
    const Vocabulary v = Vocabulary::build(seqs, 1);
    ASSERT_EQ(v.id_of("a"), 2);
    const TokenSequence input = tokenize("a zzz");
    EXPECT_EQ(encode(input, v), (std::vector<std::int32_t>{2, 1}));
}

TEST(Encode, AllUnknownInputIsAllUnk) {
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("a a"));
    const Vocabulary v = Vocabulary::build(seqs, 1);
    const std::vector<std::int32_t> ids = encode(tokenize("q w e"), v);
    for (std::int32_t id : ids) EXPECT_EQ(id, kUnkId);
}

TEST(Encode, LengthPreservedOnRandomSources) {
    std::mt19937_64 rng(12);
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("uint amount = 1;"));
    const Vocabulary v = Vocabulary::build(seqs, 1);
    for (int i = 0; i < 50; ++i) {
        std::string src;
        for (int s = 0; s < 5; ++s) src += testutil::filler_statement(rng) + "\n";
        const TokenSequence seq = tokenize(src);
        EXPECT_EQ(encode(seq, v).size(), seq.size());
    }
}

TEST(Vocabulary, NeverInspectsHeldOutContracts) {
    // Build from a train split whose contracts never contain "heldout_word";
    // the token must stay out of the vocabulary even if frequent in test.
    std::vector<TokenSequence> train;
    train.push_back(tokenize("common common common"));
    const Vocabulary v = Vocabulary::build(train, 1);
    EXPECT_TRUE(v.contains("common"));
    EXPECT_FALSE(v.contains("heldout_word"));
    const std::vector<std::int32_t> ids =
        encode(tokenize("heldout_word heldout_word heldout_word"), v);
    for (std::int32_t id : ids) EXPECT_EQ(id, kUnkId);
}
