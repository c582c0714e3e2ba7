#include <gtest/gtest.h>

#include <afpnet/checkpoint.hpp>

#include <set>

#include "test_util.hpp"

using namespace afpnet;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.filter_heights = {2, 3};
    cfg.kernels_per_height = 3;
    cfg.top_points = 3;
    cfg.attention_blocks = 2;
    cfg.num_heads = 2;
    return cfg;
}

Vocabulary small_vocab() {
    std::vector<TokenSequence> seqs;
    seqs.push_back(tokenize("alpha beta gamma alpha beta alpha"));
    return Vocabulary::build(seqs, 1);
}

}  // namespace

TEST(Checkpoint, CanonicalTensorNamesArePresent) {
    const Model<float> model = Model<float>::random_init(small_config(), 5, 1);
    std::set<std::string> names;
    visit_params(model, [&](const std::string& name, const float*, std::size_t,
                            const std::vector<std::size_t>&) { names.insert(name); });
    EXPECT_TRUE(names.count("embed.table"));
    EXPECT_TRUE(names.count("fpm.l0.j0.weight"));
    EXPECT_TRUE(names.count("fpm.l1.j2.bias"));
    EXPECT_TRUE(names.count("rpam.block0.head0.q"));
    EXPECT_TRUE(names.count("rpam.block1.head1.v"));
    EXPECT_TRUE(names.count("rpam.block0.W"));
    EXPECT_TRUE(names.count("rpam.block1.W1"));
    EXPECT_TRUE(names.count("rpam.block1.b2"));
    EXPECT_TRUE(names.count("clf.weight"));
    EXPECT_TRUE(names.count("clf.bias"));
    EXPECT_EQ(names.size(), 1u + 6u * 2u + 2u * (3u * 2u + 5u) + 2u);
}

TEST(Checkpoint, FloatRoundTripIsExact) {
    const Vocabulary vocab = small_vocab();
    const Model<float> model = Model<float>::random_init(small_config(), vocab.size(), 42);
    const auto dir = testutil::make_temp_dir("ckpt");
    save_checkpoint(dir / "model.afpn", model, vocab);

    const Checkpoint<float> ck = load_checkpoint<float>(dir / "model.afpn");
    EXPECT_EQ(ck.vocab.size(), vocab.size());
    EXPECT_EQ(ck.vocab.to_json().dump(), vocab.to_json().dump());
    EXPECT_EQ(to_json(ck.config).dump(), to_json(model.config).dump());

    std::vector<std::pair<const float*, std::size_t>> original;
    visit_params(model, [&](const std::string&, const float* data, std::size_t n,
                            const std::vector<std::size_t>&) { original.emplace_back(data, n); });
    std::size_t tensor = 0;
    visit_params(ck.model, [&](const std::string&, const float* data, std::size_t n,
                               const std::vector<std::size_t>&) {
        ASSERT_EQ(n, original[tensor].second);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(data[i], original[tensor].first[i]);
        ++tensor;
    });
}

TEST(Checkpoint, SavedTwiceIsByteIdentical) {
    const Vocabulary vocab = small_vocab();
    const Model<float> model = Model<float>::random_init(small_config(), vocab.size(), 9);
    const auto dir = testutil::make_temp_dir("ckpt_bytes");
    save_checkpoint(dir / "a.afpn", model, vocab);
    save_checkpoint(dir / "b.afpn", model, vocab);
    EXPECT_EQ(read_file(dir / "a.afpn"), read_file(dir / "b.afpn"));
}

TEST(Checkpoint, RejectsGarbageAndTruncation) {
    const auto dir = testutil::make_temp_dir("ckpt_bad");
    write_file(dir / "garbage.afpn", "not a checkpoint at all");
    EXPECT_THROW(load_checkpoint<float>(dir / "garbage.afpn"), DataError);

    const Vocabulary vocab = small_vocab();
    const Model<float> model = Model<float>::random_init(small_config(), vocab.size(), 3);
    save_checkpoint(dir / "ok.afpn", model, vocab);
    const std::string bytes = read_file(dir / "ok.afpn");
    write_file(dir / "truncated.afpn", bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(load_checkpoint<float>(dir / "truncated.afpn"), DataError);
    EXPECT_THROW(load_checkpoint<float>(dir / "missing.afpn"), DataError);
}

TEST(Checkpoint, LoadsAsDoubleForTests) {
    const Vocabulary vocab = small_vocab();
    const Model<float> model = Model<float>::random_init(small_config(), vocab.size(), 4);
    const auto dir = testutil::make_temp_dir("ckpt_double");
    save_checkpoint(dir / "model.afpn", model, vocab);
    const Checkpoint<double> ck = load_checkpoint<double>(dir / "model.afpn");
    EXPECT_EQ(static_cast<float>(ck.model.clf_bias), model.clf_bias);
    EXPECT_EQ(ck.model.embedding.rows(), model.embedding.rows());
}
