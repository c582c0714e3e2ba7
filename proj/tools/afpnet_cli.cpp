// afpnet: smart-contract vulnerability detector CLI.
//
// Subcommands: dedup, train, evaluate, predict, explain, bench.
// Exit codes: 0 success, 1 usage error, 2 data/contract error.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <afpnet/afpnet.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Every run records its resolved inputs next to its outputs.
struct RunManifest {
    std::string subcommand;
    json inputs = json::object();
    json outputs = json::object();
    json resolved = json::object();
    std::string started_at = iso8601_utc(std::chrono::system_clock::now());

    void write(const fs::path& path) const {
        json j{
            {"subcommand", subcommand},
            {"tool_version", afpnet::kVersion},
            {"inputs", inputs},
            {"outputs", outputs},
            {"resolved", resolved},
            {"started_at", started_at},
            {"finished_at", iso8601_utc(std::chrono::system_clock::now())},
        };
        afpnet::write_file(path, j.dump(2) + "\n");
    }
};

struct ModelFlags {
    std::optional<int> embed_dim, kernels, top_points, blocks, heads, stride, ffn_hidden;
    std::optional<double> threshold;
    std::optional<std::vector<int>> heights;

    void attach(CLI::App* cmd) {
        cmd->add_option("--embed-dim", embed_dim, "Embedding dimension k");
        cmd->add_option("--heights", heights, "Filter heights (comma separated)")->delimiter(',');
        cmd->add_option("--kernels", kernels, "Convolution kernels per height (J)");
        cmd->add_option("--top-points", top_points, "Selected feature points per kernel (P)");
        cmd->add_option("--blocks", blocks, "Attention block repeats (N)");
        cmd->add_option("--heads", heads, "Attention heads");
        cmd->add_option("--stride", stride, "Convolution stride");
        cmd->add_option("--ffn-hidden", ffn_hidden, "Feed-forward inner width (0 = 4*(P+1))");
        cmd->add_option("--threshold", threshold, "Decision threshold");
    }

    // Precedence: CLI flag > config file > built-in default.
    afpnet::ModelConfig resolve(const std::string& config_path) const {
        afpnet::ModelConfig cfg;
        if (!config_path.empty())
            cfg = afpnet::model_config_from_json(json::parse(afpnet::read_file(config_path)));
        if (embed_dim) cfg.embed_dim = *embed_dim;
        if (heights) cfg.filter_heights = *heights;
        if (kernels) cfg.kernels_per_height = *kernels;
        if (top_points) cfg.top_points = *top_points;
        if (blocks) cfg.attention_blocks = *blocks;
        if (heads) cfg.num_heads = *heads;
        if (stride) cfg.stride = *stride;
        if (ffn_hidden) cfg.ffn_hidden = *ffn_hidden;
        if (threshold) cfg.threshold = *threshold;
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    std::optional<double> learning_rate, class_weight, weight_decay, clip_norm, train_fraction;
    std::optional<int> batch_size, epochs, trials, min_freq;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--learning-rate", learning_rate, "AdamW learning rate");
        cmd->add_option("--batch-size", batch_size, "Minibatch size");
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--trials", trials, "Independent trials to average");
        cmd->add_option("--seed", seed, "Base seed (trial t uses seed + t)");
        cmd->add_option("--class-weight", class_weight, "Positive-class loss multiplier");
        cmd->add_option("--weight-decay", weight_decay, "Decoupled weight decay");
        cmd->add_option("--clip-norm", clip_norm, "Global gradient-norm clip (0 = off)");
        cmd->add_option("--min-freq", min_freq, "Vocabulary frequency cutoff");
        cmd->add_option("--train-fraction", train_fraction, "Train split fraction");
    }

    afpnet::TrainConfig resolve(const std::string& config_path) const {
        afpnet::TrainConfig cfg;
        if (!config_path.empty())
            cfg = afpnet::train_config_from_json(json::parse(afpnet::read_file(config_path)));
        if (learning_rate) cfg.learning_rate = *learning_rate;
        if (batch_size) cfg.batch_size = *batch_size;
        if (epochs) cfg.epochs = *epochs;
        if (trials) cfg.trials = *trials;
        if (seed) cfg.seed = *seed;
        if (class_weight) cfg.class_weight = *class_weight;
        if (weight_decay) cfg.weight_decay = *weight_decay;
        if (clip_norm) cfg.clip_norm = *clip_norm;
        if (min_freq) cfg.vocab_min_freq = *min_freq;
        if (train_fraction) cfg.train_fraction = *train_fraction;
        cfg.validate();
        return cfg;
    }
};

std::optional<afpnet::VulnType> parse_vuln_flag(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return afpnet::parse_vuln_type(s);
}

json history_to_json(const afpnet::TrainHistory& history) {
    json epochs = json::array();
    for (std::size_t e = 0; e < history.epochs.size(); ++e)
        epochs.push_back(json{{"epoch", e + 1},
                              {"train_loss", history.epochs[e].train_loss},
                              {"test", afpnet::to_json(history.epochs[e].test_metrics)}});
    return json{{"epochs", epochs}};
}

int run_dedup(const std::string& manifest, const std::string& vuln, const std::string& out_dir) {
    RunManifest rm;
    rm.subcommand = "dedup";
    rm.inputs["manifest"] = manifest;

    const afpnet::Corpus corpus = afpnet::load_manifest(manifest, parse_vuln_flag(vuln));
    const afpnet::DedupResult result = afpnet::dedup_corpus_report(corpus);

    fs::create_directories(out_dir);
    const fs::path manifest_out = fs::path(out_dir) / "manifest.jsonl";
    afpnet::write_manifest(result.corpus, manifest_out);

    json groups = json::array();
    std::size_t collapsed = 0;
    for (const afpnet::DupGroup& g : result.groups) {
        groups.push_back(json{{"survivor", g.survivor_id}, {"collapsed", g.collapsed_ids}});
        collapsed += g.collapsed_ids.size();
    }
    json report{
        {"input_contracts", corpus.size()},
        {"surviving_contracts", result.corpus.size()},
        {"collapsed_contracts", collapsed},
        {"groups", groups},
    };
    const fs::path report_out = fs::path(out_dir) / "dedup_report.json";
    afpnet::write_file(report_out, report.dump(2) + "\n");

    rm.outputs["manifest"] = manifest_out.string();
    rm.outputs["report"] = report_out.string();
    rm.write(fs::path(out_dir) / "run_manifest.json");
    std::cout << "dedup: " << corpus.size() << " -> " << result.corpus.size() << " contracts ("
              << collapsed << " collapsed in " << result.groups.size() << " groups)\n";
    return 0;
}

int run_train(const std::string& manifest, const std::string& vuln, const ModelFlags& mflags,
              const std::string& model_config_path, const TrainFlags& tflags,
              const std::string& train_config_path, const std::string& out_dir) {
    RunManifest rm;
    rm.subcommand = "train";
    rm.inputs["manifest"] = manifest;
    if (!vuln.empty()) rm.inputs["vuln_type"] = vuln;

    const afpnet::ModelConfig mcfg = mflags.resolve(model_config_path);
    const afpnet::TrainConfig tcfg = tflags.resolve(train_config_path);
    rm.resolved["model_config"] = afpnet::to_json(mcfg);
    rm.resolved["train_config"] = afpnet::to_json(tcfg);

    const afpnet::Corpus corpus = afpnet::load_manifest(manifest, parse_vuln_flag(vuln));
    auto [train_split, test_split] = afpnet::split_corpus(corpus, tcfg.train_fraction, tcfg.seed);
    std::cout << "corpus: " << corpus.size() << " contracts -> train " << train_split.size()
              << ", test " << test_split.size() << "\n";

    fs::create_directories(out_dir);
    afpnet::write_manifest(train_split, fs::path(out_dir) / "train_manifest.jsonl");
    afpnet::write_manifest(test_split, fs::path(out_dir) / "test_manifest.jsonl");

    const afpnet::TrialsResult<float> result =
        afpnet::run_trials<float>(train_split, test_split, mcfg, tcfg);

    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        const auto& trial = result.trials[t];
        const fs::path ck = fs::path(out_dir) / ("checkpoint_trial" + std::to_string(t) + ".afpn");
        afpnet::save_checkpoint(ck, trial.model, trial.vocab);
        afpnet::write_file(fs::path(out_dir) / ("history_trial" + std::to_string(t) + ".json"),
                           history_to_json(trial.history).dump(2) + "\n");
        afpnet::write_file(fs::path(out_dir) / ("metrics_trial" + std::to_string(t) + ".json"),
                           afpnet::to_json(trial.history.epochs.back().test_metrics).dump(2) + "\n");
        const auto& m = result.summary.per_trial[t];
        std::cout << "trial " << t << ": P " << afpnet::to_percent(m.precision) << "  R "
                  << afpnet::to_percent(m.recall) << "  F1 " << afpnet::to_percent(m.f1) << "\n";
    }
    afpnet::write_file(fs::path(out_dir) / "vocabulary.json",
                       result.trials.front().vocab.to_json().dump(2) + "\n");

    json mean{
        {"trials", result.trials.size()},
        {"mean_precision", result.summary.mean_precision},
        {"mean_recall", result.summary.mean_recall},
        {"mean_f1", result.summary.mean_f1},
        {"mean_precision_pct", afpnet::to_percent(result.summary.mean_precision)},
        {"mean_recall_pct", afpnet::to_percent(result.summary.mean_recall)},
        {"mean_f1_pct", afpnet::to_percent(result.summary.mean_f1)},
    };
    afpnet::write_file(fs::path(out_dir) / "metrics_mean.json", mean.dump(2) + "\n");
    std::cout << "mean over " << result.trials.size() << " trials: P "
              << afpnet::to_percent(result.summary.mean_precision) << "  R "
              << afpnet::to_percent(result.summary.mean_recall) << "  F1 "
              << afpnet::to_percent(result.summary.mean_f1) << "\n";

    rm.outputs["dir"] = out_dir;
    rm.write(fs::path(out_dir) / "run_manifest.json");
    return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& manifest,
                 const std::string& vuln, const std::string& out_path,
                 const std::string& pca_path) {
    RunManifest rm;
    rm.subcommand = "evaluate";
    rm.inputs["checkpoint"] = checkpoint;
    rm.inputs["manifest"] = manifest;

    const afpnet::Checkpoint<float> ck = afpnet::load_checkpoint<float>(checkpoint);
    rm.resolved["model_config"] = afpnet::to_json(ck.config);
    const afpnet::Corpus corpus = afpnet::load_manifest(manifest, parse_vuln_flag(vuln));

    std::vector<std::vector<double>> features;
    const auto evaluation = afpnet::evaluate_corpus(
        ck.model, ck.vocab, corpus, pca_path.empty() ? nullptr : &features);

    afpnet::write_file(out_path, afpnet::to_json(evaluation.metrics).dump(2) + "\n");
    rm.outputs["metrics"] = out_path;

    if (!pca_path.empty()) {
        const afpnet::PcaProjection projection = afpnet::project_features(features);
        std::string csv = "id,x,y,label\n";
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g", projection.coords[i][0],
                          projection.coords[i][1]);
            csv += corpus.contracts[i].id + "," + buf + "," +
                   std::to_string(corpus.contracts[i].label) + "\n";
        }
        afpnet::write_file(pca_path, csv);
        rm.outputs["pca"] = pca_path;
        if (projection.degenerate)
            std::cerr << "warning: features have zero variance; PCA coordinates are all zero\n";
    }

    const auto& m = evaluation.metrics;
    std::cout << "P " << afpnet::to_percent(m.precision) << "  R " << afpnet::to_percent(m.recall)
              << "  F1 " << afpnet::to_percent(m.f1) << "  (tp " << m.true_positives << " fp "
              << m.false_positives << " tn " << m.true_negatives << " fn " << m.false_negatives
              << ")\n";
    rm.write(fs::path(out_path).parent_path() / "run_manifest.json");
    return 0;
}

int run_predict(const std::string& checkpoint, const std::string& input, bool explain_flag,
                bool dump_tokens, const std::string& out_path) {
    const afpnet::Checkpoint<float> ck = afpnet::load_checkpoint<float>(checkpoint);
    const std::string source = afpnet::read_file(input);

    if (dump_tokens) {
        const afpnet::TokenSequence tokens = afpnet::tokenize(source);
        for (const afpnet::Token& t : tokens.tokens)
            std::cout << t.text << '\t' << t.begin << '\t' << t.end << '\n';
        return 0;
    }

    const afpnet::SnippetReport report =
        afpnet::attribute(fs::path(input).filename().string(), source, ck.model, ck.vocab);
    std::cout << "probability: " << report.probability << "\ndecision: " << report.decision
              << "\n";
    if (explain_flag) {
        std::cout << "top snippets:\n";
        const std::size_t n = std::min<std::size_t>(5, report.snippets.size());
        for (std::size_t i = 0; i < n; ++i) {
            const afpnet::Snippet& s = report.snippets[i];
            std::cout << "  " << (i + 1) << ". [" << s.char_begin << ", " << s.char_end << ") "
                      << s.text << "  (activation " << s.activation << ")\n";
        }
    }
    if (!out_path.empty()) {
        json j{{"input", input},
               {"probability", report.probability},
               {"decision", report.decision}};
        afpnet::write_file(out_path, j.dump(2) + "\n");
        RunManifest rm;
        rm.subcommand = "predict";
        rm.inputs["checkpoint"] = checkpoint;
        rm.inputs["input"] = input;
        rm.outputs["prediction"] = out_path;
        rm.write(fs::path(out_path).parent_path() / "run_manifest.json");
    }
    return 0;
}

int run_explain(const std::string& checkpoint, const std::string& input,
                const std::string& format, std::size_t top, const std::string& out_path) {
    RunManifest rm;
    rm.subcommand = "explain";
    rm.inputs["checkpoint"] = checkpoint;
    rm.inputs["input"] = input;
    rm.resolved["format"] = format;
    rm.resolved["top"] = top;

    const afpnet::Checkpoint<float> ck = afpnet::load_checkpoint<float>(checkpoint);
    const std::string source = afpnet::read_file(input);
    const afpnet::SnippetReport report =
        afpnet::attribute(fs::path(input).filename().string(), source, ck.model, ck.vocab, top);
    const afpnet::ReportFormat fmt =
        format == "html" ? afpnet::ReportFormat::html : afpnet::ReportFormat::markdown;
    afpnet::write_file(out_path, afpnet::render_report(report, fmt));

    rm.outputs["report"] = out_path;
    rm.write(fs::path(out_path).parent_path() / "run_manifest.json");
    std::cout << "wrote " << out_path << " (" << report.snippets.size() << " snippets)\n";
    return 0;
}

int run_bench(const std::string& checkpoint, const std::vector<std::int64_t>& lengths, int repeats,
              int threads, std::uint64_t seed, const std::string& out_path) {
    RunManifest rm;
    rm.subcommand = "bench";
    rm.inputs["checkpoint"] = checkpoint;
    rm.resolved["lengths"] = lengths;
    rm.resolved["repeats"] = repeats;
    rm.resolved["threads"] = threads;
    rm.resolved["seed"] = seed;

    const afpnet::Checkpoint<float> ck = afpnet::load_checkpoint<float>(checkpoint);
    const afpnet::ScalingReport report = afpnet::measure_scaling(
        ck.model, std::span<const std::int64_t>(lengths), repeats, threads, seed);

    json rows = json::array();
    for (const afpnet::LengthTiming& row : report.rows) {
        const afpnet::CostModel cm = afpnet::count_flops(ck.config, row.n);
        rows.push_back(json{
            {"n", row.n},
            {"time_ms", {{"min", row.min_ms}, {"median", row.median_ms}, {"max", row.max_ms}}},
            {"flops",
             {{"fpm", cm.flop_fpm},
              {"rpam", cm.flop_rpam},
              {"total", cm.flop_total},
              {"space_fpm", cm.space_fpm},
              {"space_rpam", cm.space_rpam}}},
        });
        std::cout << "n=" << row.n << "  median " << row.median_ms << " ms  (min " << row.min_ms
                  << ", max " << row.max_ms << ")\n";
    }
    for (std::size_t i = 0; i < report.median_ratios.size(); ++i)
        std::cout << "ratio " << report.rows[i + 1].n << "/" << report.rows[i].n << " = "
                  << report.median_ratios[i] << "\n";
    json j{{"repeats", repeats}, {"threads", threads}, {"rows", rows},
           {"median_ratios", report.median_ratios}};
    afpnet::write_file(out_path, j.dump(2) + "\n");

    rm.outputs["report"] = out_path;
    rm.write(fs::path(out_path).parent_path() / "run_manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AFPNet smart-contract vulnerability detector"};
    app.require_subcommand(1);

    // dedup
    auto* dedup = app.add_subcommand("dedup", "Collapse normalized-duplicate contracts");
    std::string dedup_manifest, dedup_vuln, dedup_out;
    dedup->add_option("--manifest", dedup_manifest, "Input manifest (JSONL)")->required();
    dedup->add_option("--vuln-type", dedup_vuln, "Filter to one vulnerability type");
    dedup->add_option("--out", dedup_out, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train the detector");
    std::string train_manifest, train_vuln, train_model_config, train_train_config, train_out;
    ModelFlags train_mflags;
    TrainFlags train_tflags;
    train->add_option("--manifest", train_manifest, "Corpus manifest (JSONL)")->required();
    train->add_option("--vuln-type", train_vuln, "Filter to one vulnerability type");
    train->add_option("--config", train_model_config, "Model config JSON");
    train->add_option("--train-config", train_train_config, "Train config JSON");
    train->add_option("--out", train_out, "Output directory")->required();
    train_mflags.attach(train);
    train_tflags.attach(train);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a manifest");
    std::string eval_checkpoint, eval_manifest, eval_vuln, eval_out, eval_pca;
    evaluate->add_option("--checkpoint", eval_checkpoint, "Checkpoint archive")->required();
    evaluate->add_option("--manifest", eval_manifest, "Corpus manifest (JSONL)")->required();
    evaluate->add_option("--vuln-type", eval_vuln, "Filter to one vulnerability type");
    evaluate->add_option("--out", eval_out, "Metrics JSON output path")->required();
    evaluate->add_option("--emit-pca", eval_pca, "Write 2-D PCA projection CSV (id,x,y,label)");

    // predict
    auto* predict = app.add_subcommand("predict", "Score a single .sol file");
    std::string pred_checkpoint, pred_input, pred_out;
    bool pred_explain = false, pred_dump_tokens = false;
    predict->add_option("--checkpoint", pred_checkpoint, "Checkpoint archive")->required();
    predict->add_option("--input", pred_input, "Contract source file")->required();
    predict->add_flag("--explain", pred_explain, "Also print an attribution summary");
    predict->add_flag("--dump-tokens", pred_dump_tokens, "Print the token stream and exit");
    predict->add_option("--out", pred_out, "Optional prediction JSON output path");

    // explain
    auto* explain = app.add_subcommand("explain", "Write a highlighted snippet report");
    std::string exp_checkpoint, exp_input, exp_format = "markdown", exp_out;
    std::size_t exp_top = afpnet::kDefaultReportDepth;
    explain->add_option("--checkpoint", exp_checkpoint, "Checkpoint archive")->required();
    explain->add_option("--input", exp_input, "Contract source file")->required();
    explain->add_option("--format", exp_format, "markdown or html")
        ->check(CLI::IsMember({"markdown", "html"}));
    explain->add_option("--top", exp_top, "Distinct spans to report");
    explain->add_option("--out", exp_out, "Report output path")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "Measure forward-pass scaling");
    std::string bench_checkpoint, bench_out;
    std::vector<std::int64_t> bench_lengths{1000, 2000, 4000};
    int bench_repeats = 20, bench_threads = 1;
    std::uint64_t bench_seed = 0;
    bench->add_option("--checkpoint", bench_checkpoint, "Checkpoint archive")->required();
    bench->add_option("--lengths", bench_lengths, "Sequence lengths (ascending)")->delimiter(',');
    bench->add_option("--repeats", bench_repeats, "Timed repeats per length (>= 10)");
    bench->add_option("--threads", bench_threads, "Convolution worker threads");
    bench->add_option("--seed", bench_seed, "Synthetic input seed");
    bench->add_option("--out", bench_out, "Benchmark JSON output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*dedup) return run_dedup(dedup_manifest, dedup_vuln, dedup_out);
        if (*train)
            return run_train(train_manifest, train_vuln, train_mflags, train_model_config,
                             train_tflags, train_train_config, train_out);
        if (*evaluate)
            return run_evaluate(eval_checkpoint, eval_manifest, eval_vuln, eval_out, eval_pca);
        if (*predict)
            return run_predict(pred_checkpoint, pred_input, pred_explain, pred_dump_tokens,
                               pred_out);
        if (*explain) return run_explain(exp_checkpoint, exp_input, exp_format, exp_top, exp_out);
        if (*bench)
            return run_bench(bench_checkpoint, bench_lengths, bench_repeats, bench_threads,
                             bench_seed, bench_out);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const afpnet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
