// hse: synth | train | eval | partial-eval | zeroshot | gradcheck
//
// Exit codes: 0 success, 1 invalid config / input / failed check, 2 usage error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hse/checkpoint.hpp"
#include "hse/data.hpp"
#include "hse/evaluation.hpp"
#include "hse/gradcheck.hpp"
#include "hse/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using hse::cli::ConfigError;
using hse::cli::RunConfig;

namespace {

struct Args {
    std::string config_path, out, corpus, checkpoint, labels;
    std::size_t trials = 5;
    std::vector<std::pair<std::string, std::string>> overrides;
};

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "' for checksum");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char two[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(two, sizeof two, "%02x", md[i]);
        hex += two;
    }
    return hex;
}

// Written to a sibling temp file and renamed into place.
void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

class Run {
public:
    Run(std::string command, const RunConfig& config)
        : command_(std::move(command)), config_(config), start_(std::chrono::steady_clock::now()) {}

    void input(const fs::path& p) { inputs_.push_back(p); }
    void output(const fs::path& p, const std::string& content) {
        write_atomic(p, content);
        outputs_.push_back(p);
        spdlog::info("wrote {}", p.string());
    }

    void write_manifest(const fs::path& path) const {
        nlohmann::json j;
        j["command"] = command_;
        j["seed"] = config_.seed();
        j["config"] = config_.values();
        auto files = [](const std::vector<fs::path>& ps) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& p : ps) arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
            return arr;
        };
        j["inputs"] = files(inputs_);
        j["outputs"] = files(outputs_);
        j["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_atomic(path, j.dump(2) + "\n");
        spdlog::info("wrote {}", path.string());
    }

private:
    std::string command_;
    const RunConfig& config_;
    std::chrono::steady_clock::time_point start_;
    std::vector<fs::path> inputs_, outputs_;
};

std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class Params>
std::string checkpoint_bytes(const Params& p) {
    std::ostringstream out(std::ios::binary);
    hse::ckpt::write_checkpoint(out, p);
    return out.str();
}

// ---------------------------------------------------------------------------

int cmd_synth(const Args& a, const RunConfig& cfg) {
    const auto spec = cfg.synth_spec();
    const auto synth = hse::data::synth_generate(spec);
    const fs::path out = a.out;
    const fs::path labels = a.labels.empty() ? fs::path(out).replace_extension(".labels.jsonl") : fs::path(a.labels);
    Run run("synth", cfg);
    std::ostringstream corpus_text, label_text;
    hse::data::write_corpus(corpus_text, synth.corpus);
    hse::data::write_labels(label_text, synth.labels);
    run.output(out, corpus_text.str());
    run.output(labels, label_text.str());
    run.write_manifest(fs::path(out).replace_extension(".manifest.json"));
    std::cout << synth.corpus.size() << " pairs, " << synth.labels.size() << " label phrases\n";
    return 0;
}

int cmd_train(const Args& a, const RunConfig& cfg) {
    const auto tc = cfg.train_config();
    const auto corpus = hse::data::load_corpus(a.corpus, cfg.correspondence());
    spdlog::info("training {} on {} pairs for {} epochs", hse::train::to_string(tc.architecture), corpus.size(),
                 tc.epochs);
    const fs::path dir = a.out;
    Run run("train", cfg);
    run.input(a.corpus);

    std::string log = "epoch\tlearning_rate\tbatches\tmatch_high\tmatch_low\tcluster_high\tcluster_low\treconstruct\ttotal\n";
    auto progress = [&](const hse::train::EpochLog& e) {
        const auto& m = e.mean;
        log += std::to_string(e.epoch) + "\t" + g17(e.learning_rate) + "\t" + std::to_string(e.batches) + "\t" +
               g17(m.match_high) + "\t" + g17(m.match_low) + "\t" + g17(m.cluster_high) + "\t" +
               g17(m.cluster_low) + "\t" + g17(m.reconstruct) + "\t" + g17(m.total) + "\n";
        spdlog::info("epoch {} lr {:.3g} loss {:.6f}", e.epoch, e.learning_rate, m.total);
        spdlog::debug("  match_high {:.6f} match_low {:.6f} cluster_high {:.6f} cluster_low {:.6f} reconstruct {:.6f}",
                      m.match_high, m.match_low, m.cluster_high, m.cluster_low, m.reconstruct);
    };
    std::string ckpt;
    if (tc.architecture == hse::train::Architecture::flat)
        ckpt = checkpoint_bytes(hse::train::train_flat(corpus, tc, progress).params);
    else
        ckpt = checkpoint_bytes(hse::train::train(corpus, tc, progress).params);

    run.output(dir / "config.txt", cfg.text());
    run.output(dir / "model.ckpt", ckpt);
    run.output(dir / "loss_log.tsv", log);
    run.write_manifest(dir / "manifest.json");
    return 0;
}

void require_file(const std::string& what, const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

int cmd_eval(const Args& a, const RunConfig& cfg, bool partial) {
    require_file("checkpoint", a.checkpoint);
    const auto ks = cfg.topk();
    const std::size_t max_units = partial ? cfg.max_units() : 0;
    const auto corpus = hse::data::load_corpus(a.corpus, cfg.correspondence());
    hse::eval::RetrievalPair report;
    if (hse::ckpt::peek_kind(a.checkpoint) == hse::ckpt::ModelKind::flat) {
        const auto params = hse::ckpt::load_flat_checkpoint(a.checkpoint);
        report = hse::eval::evaluate_retrieval(params, partial ? hse::data::truncate_units(corpus, max_units) : corpus, ks);
    } else {
        const auto params = hse::ckpt::load_checkpoint(a.checkpoint);
        const hse::model::EncoderOptions options{cfg.train_config().carry_low_state};
        report = partial ? hse::eval::evaluate_partial(params, corpus, max_units, ks, options)
                         : hse::eval::evaluate_retrieval(params, corpus, ks, options);
    }
    std::ostringstream tsv;
    hse::eval::write_tsv(tsv, report);
    std::cout << tsv.str();

    const fs::path dir = a.out;
    const std::string stem = partial ? "partial" : "retrieval";
    Run run(partial ? "partial-eval" : "eval", cfg);
    run.input(a.checkpoint);
    run.input(a.corpus);
    run.output(dir / "config.txt", cfg.text());
    run.output(dir / (stem + ".tsv"), tsv.str());
    run.output(dir / (stem + ".json"), hse::eval::to_json(report) + "\n");
    run.write_manifest(dir / "manifest.json");
    return 0;
}

int cmd_zeroshot(const Args& a, const RunConfig& cfg) {
    require_file("checkpoint", a.checkpoint);
    require_file("labels", a.labels);
    if (hse::ckpt::peek_kind(a.checkpoint) != hse::ckpt::ModelKind::hierarchical)
        throw ConfigError("zeroshot needs a hierarchical checkpoint; flat models have no low-level encoders");
    const auto params = hse::ckpt::load_checkpoint(a.checkpoint);
    const auto corpus = hse::data::load_corpus(a.corpus, cfg.correspondence());
    const auto labels = hse::data::load_labels(a.labels);
    const auto report = hse::eval::zeroshot_classify(params, corpus, labels, cfg.zeroshot_topk());
    std::ostringstream tsv;
    hse::eval::write_tsv(tsv, report);
    std::cout << tsv.str();

    const fs::path dir = a.out;
    Run run("zeroshot", cfg);
    run.input(a.checkpoint);
    run.input(a.corpus);
    run.input(a.labels);
    run.output(dir / "config.txt", cfg.text());
    run.output(dir / "zeroshot.tsv", tsv.str());
    run.output(dir / "zeroshot.json", hse::eval::to_json(report) + "\n");
    run.write_manifest(dir / "manifest.json");
    return 0;
}

int cmd_gradcheck(const Args& a, const RunConfig& cfg) {
    if (a.trials == 0) throw ConfigError("--trials must be >= 1");
    const auto suites = hse::gradcheck::run_suites(cfg.seed(), a.trials);
    std::string table = "suite\ttrials\tcoordinates\tkinks\tmax_rel_error\tmax_abs_error\n";
    bool ok = true;
    for (const auto& s : suites) {
        char line[256];
        std::snprintf(line, sizeof line, "%s\t%zu\t%zu\t%zu\t%.3e\t%.3e\n", s.name.c_str(), s.trials, s.coordinates,
                      s.kinks, s.max_rel_error, s.max_abs_error);
        table += line;
        ok = ok && s.max_rel_error < 1e-4 && s.kinks * 1000 <= s.coordinates;
    }
    std::cout << table;
    if (!a.out.empty()) {
        Run run("gradcheck", cfg);
        run.output(fs::path(a.out) / "gradcheck.tsv", table);
        run.write_manifest(fs::path(a.out) / "manifest.json");
    }
    if (!ok) {
        spdlog::error("gradient check failed: max relative error must stay below 1e-4");
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------

void add_config_flags(CLI::App* sub, Args& a) {
    sub->add_option("--config", a.config_path, "key = value run configuration file");
    sub->add_option_function<std::vector<std::string>>(
           "--set",
           [&a](const std::vector<std::string>& items) {
               for (const auto& item : items) {
                   const auto eq = item.find('=');
                   if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got " + item);
                   a.overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
               }
           },
           "override any config key (repeatable)")
        ->take_all();
    const std::pair<const char*, const char*> flags[] = {
        {"--seed", "seed"},
        {"--pairs", "pairs"},
        {"--epochs", "epochs"},
        {"--batch-size", "batch_size"},
        {"--lr", "learning_rate"},
        {"--tau", "tau"},
        {"--alpha", "alpha"},
        {"--beta", "beta"},
        {"--gamma", "gamma"},
        {"--eta", "eta"},
        {"--beta-prime", "beta_prime"},
        {"--sign-mode", "sign_mode"},
        {"--correspondence", "correspondence"},
        {"--arch", "architecture"},
        {"--max-units", "max_units"},
        {"--topk", "topk"},
    };
    for (const auto& [flag, key] : flags) {
        std::string k = key;
        sub->add_option_function<std::string>(
            flag, [&a, k](const std::string& v) { a.overrides.emplace_back(k, v); }, "config key '" + k + "'");
    }
}

bool set_log_level() {
    const char* env = std::getenv("HSE_LOG_LEVEL");
    const std::string level = env ? env : "info";
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else {
        spdlog::error("HSE_LOG_LEVEL must be error, info or debug (got '{}')", level);
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_st("hse"));
    spdlog::set_pattern("[%l] %v");
    if (!set_log_level()) return 1;

    Args a;
    CLI::App app{"Hierarchical sequence embedding: synthetic data, training, retrieval and zero-shot evaluation"};
    app.require_subcommand(1, 1);

    auto* synth = app.add_subcommand("synth", "write a synthetic corpus and its label phrases");
    synth->add_option("--out", a.out, "corpus file (.jsonl)")->required();
    synth->add_option("--labels", a.labels, "label phrase file (default: <out>.labels.jsonl)");

    auto* train = app.add_subcommand("train", "train a model; writes model.ckpt, loss_log.tsv, config.txt, manifest.json");
    train->add_option("--corpus", a.corpus, "training corpus")->required();
    train->add_option("--out", a.out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "bidirectional retrieval: recall@k and median rank");
    auto* partial = app.add_subcommand("partial-eval", "retrieval on the first --max-units clips/sentences only");
    for (auto* sub : {eval, partial}) {
        sub->add_option("--checkpoint", a.checkpoint, "model checkpoint")->required();
        sub->add_option("--corpus", a.corpus, "evaluation corpus")->required();
        sub->add_option("--out", a.out, "output directory")->required();
    }

    auto* zeroshot = app.add_subcommand("zeroshot", "classify clips by their nearest label phrase");
    zeroshot->add_option("--checkpoint", a.checkpoint, "model checkpoint")->required();
    zeroshot->add_option("--corpus", a.corpus, "corpus whose clips carry labels")->required();
    zeroshot->add_option("--labels", a.labels, "label phrase file")->required();
    zeroshot->add_option("--out", a.out, "output directory")->required();
    zeroshot->add_option_function<std::string>(
        "--zeroshot-topk", [&a](const std::string& v) { a.overrides.emplace_back("zeroshot_topk", v); },
        "k for top-k accuracy");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of every loss, encoder and decoder");
    grad->add_option("--trials", a.trials, "random instances per suite");
    grad->add_option("--out", a.out, "optional output directory for the table and manifest");

    for (auto* sub : {synth, train, eval, partial, zeroshot, grad}) add_config_flags(sub, a);

    if (argc >= 2 && argv[1][0] != '-') {
        const std::string name = argv[1];
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == name;
        if (!known) {
            std::cerr << "unknown subcommand '" << name << "'\n" << app.help();
            return 2;
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (argc < 2 || app.get_subcommands().empty()) std::cerr << app.help();
        return 2;
    }

    try {
        RunConfig cfg;
        if (!a.config_path.empty()) cfg.load_file(a.config_path);
        for (const auto& [k, v] : a.overrides) cfg.set(k, v);
        spdlog::debug("effective config:\n{}", cfg.text());

        if (synth->parsed()) return cmd_synth(a, cfg);
        if (train->parsed()) return cmd_train(a, cfg);
        if (eval->parsed()) return cmd_eval(a, cfg, false);
        if (partial->parsed()) return cmd_eval(a, cfg, true);
        if (zeroshot->parsed()) return cmd_zeroshot(a, cfg);
        if (grad->parsed()) return cmd_gradcheck(a, cfg);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 2;
}
