#include <gtest/gtest.h>

#include <afpnet/ingest.hpp>

#include <fstream>
#include <set>

#include "test_util.hpp"

using namespace afpnet;

TEST(NormalizeSource, CollapsesWhitespaceAndStripsComments) {
    EXPECT_EQ(normalize_source("a  =  1 ; // x"), "a = 1 ;");
    EXPECT_EQ(normalize_source("a=1;"), normalize_source("a=1;\n"));
    EXPECT_EQ(normalize_source("/*c*/a"), "a");
    EXPECT_EQ(normalize_source("a/*c*/b"), "a b");
    EXPECT_EQ(normalize_source("  \t\n  "), "");
}

TEST(NormalizeSource, UnterminatedBlockCommentRunsToEnd) {
    EXPECT_EQ(normalize_source("a /* never closed"), "a");
}

TEST(NormalizeSource, StringLiteralsAreNotComments) {
    EXPECT_EQ(normalize_source("s = \"//not a comment\";"), "s = \"//not a comment\";");
    EXPECT_EQ(normalize_source("s = \"a /* b\"; t"), "s = \"a /* b\"; t");
}

TEST(NormalizeSource, Idempotent) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        std::string src;
        for (int s = 0; s < 6; ++s) src += testutil::filler_statement(rng) + "\n  // note\n";
        const std::string once = normalize_source(src);
        EXPECT_EQ(normalize_source(once), once);
    }
}

namespace {

std::filesystem::path write_manifest_lines(const std::vector<std::string>& lines,
                                           const std::string& tag) {
    const auto dir = testutil::make_temp_dir(tag);
    const auto path = dir / "manifest.jsonl";
    std::ofstream out(path);
    for (const std::string& line : lines) out << line << "\n";
    return path;
}

}  // namespace

TEST(LoadManifest, EmptyManifestGivesEmptyCorpus) {
    const auto path = write_manifest_lines({}, "empty");
    const Corpus corpus = load_manifest(path);
    EXPECT_EQ(corpus.size(), 0u);
}

TEST(LoadManifest, RowsLoadInOrderFromFilesAndInline) {
    const auto dir = testutil::make_temp_dir("rows");
    write_file(dir / "a.sol", "contract A { }");
    write_file(dir / "b.sol", "contract B { }");
    const auto path = dir / "manifest.jsonl";
    std::ofstream out(path);
    out << R"({"id":"a","path":"a.sol","vuln_type":"reentrancy","label":1})" << "\n";
    out << R"({"id":"b","path":"b.sol","vuln_type":"reentrancy","label":0})" << "\n";
    out << R"({"id":"c","source":"contract C { }","vuln_type":"reentrancy","label":1})" << "\n";
    out.close();

    const Corpus corpus = load_manifest(path);
    ASSERT_EQ(corpus.size(), 3u);
    EXPECT_EQ(corpus.contracts[0].id, "a");
    EXPECT_EQ(corpus.contracts[0].source, "contract A { }");
    EXPECT_EQ(corpus.contracts[1].id, "b");
    EXPECT_EQ(corpus.contracts[2].source, "contract C { }");
    EXPECT_EQ(corpus.contracts[2].label, 1);
}

TEST(LoadManifest, BadLabelNamesTheRow) {
    const auto path = write_manifest_lines(
        {R"({"id":"a","source":"contract A {}","vuln_type":"reentrancy","label":1})",
         R"({"id":"b","source":"contract B {}","vuln_type":"reentrancy","label":2})"},
        "badlabel");
    try {
        load_manifest(path);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
    }
}

TEST(LoadManifest, MissingFileNamesTheRow) {
    const auto path = write_manifest_lines(
        {R"({"id":"a","path":"nope.sol","vuln_type":"timestamp","label":0})"}, "missing");
    try {
        load_manifest(path);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
}

TEST(LoadManifest, DuplicateIdRejected) {
    const auto path = write_manifest_lines(
        {R"({"id":"a","source":"contract A {}","vuln_type":"reentrancy","label":0})",
         R"({"id":"a","source":"contract B {}","vuln_type":"reentrancy","label":0})"},
        "dupid");
    EXPECT_THROW(load_manifest(path), DataError);
}

TEST(LoadManifest, PathAndSourceAreExclusive) {
    const auto path = write_manifest_lines(
        {R"({"id":"a","path":"x.sol","source":"contract A {}","vuln_type":"reentrancy","label":0})"},
        "both");
    EXPECT_THROW(load_manifest(path), DataError);
}

TEST(LoadManifest, VulnTypeFilterSelectsRows) {
    const auto path = write_manifest_lines(
        {R"({"id":"a","source":"contract A {}","vuln_type":"reentrancy","label":0})",
         R"({"id":"b","source":"contract B {}","vuln_type":"timestamp","label":1})"},
        "filter");
    EXPECT_THROW(load_manifest(path), DataError);  // mixed without filter
    const Corpus re = load_manifest(path, VulnType::reentrancy);
    ASSERT_EQ(re.size(), 1u);
    EXPECT_EQ(re.contracts[0].id, "a");
    const Corpus td = load_manifest(path, VulnType::timestamp);
    ASSERT_EQ(td.size(), 1u);
    EXPECT_EQ(td.vuln_type, VulnType::timestamp);
}

TEST(ManifestRoundTrip, WriteThenLoadPreservesContracts) {
    const Corpus corpus = testutil::make_dedup_corpus(20, 0, 5);
    const auto dir = testutil::make_temp_dir("roundtrip");
    write_manifest(corpus, dir / "manifest.jsonl");
    const Corpus loaded = load_manifest(dir / "manifest.jsonl");
    ASSERT_EQ(loaded.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(loaded.contracts[i].id, corpus.contracts[i].id);
        EXPECT_EQ(loaded.contracts[i].source, corpus.contracts[i].source);
        EXPECT_EQ(loaded.contracts[i].label, corpus.contracts[i].label);
    }
}

TEST(DedupCorpus, CommentAndWhitespaceVariantsCollapseToFirst) {
    Corpus corpus;
    corpus.contracts.push_back({"x", "contract A { uint a = 1; }", VulnType::reentrancy, 1});
    corpus.contracts.push_back(
        {"y", "contract A {\n  uint a = 1; // note\n}", VulnType::reentrancy, 1});
    corpus.contracts.push_back({"z", "contract B { }", VulnType::reentrancy, 0});
    const DedupResult result = dedup_corpus_report(corpus);
    ASSERT_EQ(result.corpus.size(), 2u);
    EXPECT_EQ(result.corpus.contracts[0].id, "x");
    EXPECT_EQ(result.corpus.contracts[1].id, "z");
    ASSERT_EQ(result.groups.size(), 1u);
    EXPECT_EQ(result.groups[0].survivor_id, "x");
    ASSERT_EQ(result.groups[0].collapsed_ids.size(), 1u);
    EXPECT_EQ(result.groups[0].collapsed_ids[0], "y");
}

TEST(DedupCorpus, AllDistinctIsIdentity) {
    const Corpus corpus = testutil::make_dedup_corpus(30, 0, 7);
    const Corpus out = dedup_corpus(corpus);
    ASSERT_EQ(out.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        EXPECT_EQ(out.contracts[i].id, corpus.contracts[i].id);
}

TEST(DedupCorpus, MatchesPairwiseOracleOnPlantedDuplicates) {
    const Corpus corpus = testutil::make_dedup_corpus(100, 10, 42);
    const Corpus out = dedup_corpus(corpus);
    EXPECT_EQ(out.size(), 90u);
    const std::vector<std::string> expected = testutil::dedup_survivor_ids_oracle(corpus);
    ASSERT_EQ(out.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(out.contracts[i].id, expected[i]);
}

TEST(DedupCorpus, Idempotent) {
    const Corpus corpus = testutil::make_dedup_corpus(60, 12, 3);
    const Corpus once = dedup_corpus(corpus);
    const Corpus twice = dedup_corpus(once);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        EXPECT_EQ(once.contracts[i].id, twice.contracts[i].id);
        EXPECT_EQ(once.contracts[i].source, twice.contracts[i].source);
    }
}

TEST(DedupCorpus, SurvivorsKeepSourceAndLabel) {
    const Corpus corpus = testutil::make_dedup_corpus(50, 8, 9);
    const Corpus out = dedup_corpus(corpus);
    for (const LabeledContract& survivor : out.contracts) {
        bool found = false;
        for (const LabeledContract& original : corpus.contracts) {
            if (original.id != survivor.id) continue;
            EXPECT_EQ(original.source, survivor.source);
            EXPECT_EQ(original.label, survivor.label);
            found = true;
        }
        EXPECT_TRUE(found);
    }
}

TEST(DedupCorpus, ConflictingLabelsAreAnError) {
    Corpus corpus;
    corpus.contracts.push_back({"x", "contract A { }", VulnType::reentrancy, 1});
    corpus.contracts.push_back({"y", "contract A { } // same", VulnType::reentrancy, 0});
    try {
        dedup_corpus(corpus);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("x"), std::string::npos);
        EXPECT_NE(msg.find("y"), std::string::npos);
    }
}

TEST(SplitCorpus, SizesAndDisjointness) {
    const Corpus corpus = testutil::make_dedup_corpus(10, 0, 21);
    const auto [train, test] = split_corpus(corpus, 0.8, 123);
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(test.size(), 2u);
    std::set<std::string> train_ids, test_ids;
    for (const auto& c : train.contracts) train_ids.insert(c.id);
    for (const auto& c : test.contracts) test_ids.insert(c.id);
    for (const std::string& id : test_ids) EXPECT_EQ(train_ids.count(id), 0u);
}

TEST(SplitCorpus, DeterministicGivenSeed) {
    const Corpus corpus = testutil::make_dedup_corpus(25, 0, 2);
    const auto [a_train, a_test] = split_corpus(corpus, 0.8, 999);
    const auto [b_train, b_test] = split_corpus(corpus, 0.8, 999);
    ASSERT_EQ(a_train.size(), b_train.size());
    for (std::size_t i = 0; i < a_train.size(); ++i)
        EXPECT_EQ(a_train.contracts[i].id, b_train.contracts[i].id);
    for (std::size_t i = 0; i < a_test.size(); ++i)
        EXPECT_EQ(a_test.contracts[i].id, b_test.contracts[i].id);
}

TEST(SplitCorpus, PartitionHoldsForAllSeeds) {
    const Corpus corpus = testutil::make_dedup_corpus(23, 0, 4);
    std::set<std::string> all_ids;
    for (const auto& c : corpus.contracts) all_ids.insert(c.id);
    bool any_difference = false;
    std::vector<std::string> first_order;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto [train, test] = split_corpus(corpus, 0.6, seed);
        EXPECT_EQ(train.size() + test.size(), corpus.size());
        std::set<std::string> seen;
        std::vector<std::string> order;
        for (const auto& c : train.contracts) { seen.insert(c.id); order.push_back(c.id); }
        for (const auto& c : test.contracts) { seen.insert(c.id); order.push_back(c.id); }
        EXPECT_EQ(seen, all_ids);  // union = input, and no overlap since sizes add up
        if (seed == 0) first_order = order;
        else if (order != first_order) any_difference = true;
    }
    EXPECT_TRUE(any_difference);  // different seeds permute differently
}

TEST(SplitCorpus, TooSmallCorpusRejected) {
    Corpus corpus;
    corpus.contracts.push_back({"only", "contract A { }", VulnType::reentrancy, 0});
    EXPECT_THROW(split_corpus(corpus, 0.8, 1), DataError);
}
