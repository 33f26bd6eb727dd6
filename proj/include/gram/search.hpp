#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gram/architecture.hpp"
#include "gram/errors.hpp"
#include "gram/evaluator.hpp"
#include "gram/log.hpp"
#include "gram/meta_graph.hpp"
#include "gram/profiler.hpp"

// The search loop: subsample -> assemble -> infer shapes -> evaluate ->
// penalize -> update weights -> move baseline, for a fixed number of
// iterations, with periodic checkpoints and a history trail. Evaluator
// failures skip the iteration (up to a budget) without touching the
// meta-graph.

namespace gram {

struct SearchConfig {
    MetaGraphConfig meta;
    long iterations = 1000;  // T
    EvaluatorBinding evaluator;
    NetTemplate tmpl = NetTemplate::cifar;
    TensorShape input{32, 32, 3};
    int num_classes = 10;
    long checkpoint_interval = 100;
    std::string output_dir;  // empty: no artifacts written
    int failure_budget = 10;
    int batch_size = 1;  // >1: draw a batch from one snapshot, update sequentially

    void validate() const {
        meta.validate();
        evaluator.validate();
        if (iterations < 1) throw config_error("iterations (T) must be >= 1");
        if (checkpoint_interval < 1) throw config_error("checkpoint_interval must be >= 1");
        if (failure_budget < 0) throw config_error("failure_budget must be >= 0");
        if (batch_size < 1) throw config_error("batch_size must be >= 1");
        input.validate();
        if (num_classes < 1) throw config_error("num_classes must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"meta", detail::config_to_json(meta)},
                {"iterations", iterations},
                {"evaluator", evaluator.to_json()},
                {"template", std::string(to_string(tmpl))},
                {"input", {input.height, input.width, input.channels}},
                {"num_classes", num_classes},
                {"checkpoint_interval", checkpoint_interval},
                {"output_dir", output_dir},
                {"failure_budget", failure_budget},
                {"batch_size", batch_size}};
    }

    static SearchConfig from_json(const nlohmann::json& j) {
        try {
            SearchConfig c;
            c.meta = detail::config_from_json(j.at("meta"));
            c.iterations = j.at("iterations").get<long>();
            c.evaluator = EvaluatorBinding::from_json(j.at("evaluator"));
            c.tmpl = parse_template(j.value("template", "cifar"));
            if (j.contains("input")) {
                const auto& in = j.at("input");
                c.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
            }
            c.num_classes = j.value("num_classes", c.num_classes);
            c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
            c.output_dir = j.value("output_dir", c.output_dir);
            c.failure_budget = j.value("failure_budget", c.failure_budget);
            c.batch_size = j.value("batch_size", c.batch_size);
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw config_error(std::string("search config schema mismatch: ") + e.what());
        }
    }
};

inline SearchConfig load_search_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open search config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("search config is not valid JSON: ") + e.what());
    }
    return SearchConfig::from_json(doc);
}

struct SearchHistory {
    std::vector<HistoryRecord> records;
    std::vector<SkipRecord> skipped;
};

struct SearchResult {
    MetaGraph meta;
    SearchHistory history;
};

// CSV trail of accepted iterations, one row per weight update.
inline std::string history_csv(const MetaGraph& meta) {
    std::string out = "t,eta,tau,eta_prime,beta,edges_sampled\n";
    char buf[256];
    for (const auto& r : meta.history()) {
        int edges = 0;
        for (int c : r.edges_per_dag) edges += c;
        std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g,%d\n", r.t, r.eta, r.tau,
                      r.eta_prime, r.beta, edges);
        out += buf;
    }
    return out;
}

namespace detail {

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw io_error("write failed: " + path);
}

inline std::string checkpoint_path(const std::string& dir, long step) {
    return dir + "/checkpoint-" + std::to_string(step) + ".json";
}

inline std::string final_checkpoint_path(const std::string& dir) {
    return dir + "/checkpoint-final.json";
}

inline std::string history_path(const std::string& dir) { return dir + "/history.csv"; }

}  // namespace detail

// Builds the candidate network for one sample and annotates it.
inline ArchitectureSpec assemble_from_sample(const MetaGraph& meta, const SampledGraphSet& sampled,
                                             NetTemplate tmpl, const TensorShape& input,
                                             int num_classes) {
    auto spec = assemble(subgraphs_from_sample(meta, sampled), meta.config().hierarchies, tmpl,
                         input, num_classes);
    return infer_shapes(spec, input);
}

// Runs the loop until `config.iterations` samples have been consumed. Pass a
// checkpointed meta-graph to resume; its completed steps (accepted + skipped)
// count against the budget and the restored RNG stream continues where it
// stopped, so a resumed run reproduces an uninterrupted one exactly.
inline SearchResult run_search(const SearchConfig& config,
                               std::optional<MetaGraph> resume_from = std::nullopt) {
    config.validate();
    MetaGraph meta = resume_from ? std::move(*resume_from) : MetaGraph(config.meta);
    if (resume_from && !(meta.config() == config.meta))
        throw config_error("resume checkpoint was produced with a different meta config");

    const bool persist = !config.output_dir.empty();
    if (persist) std::filesystem::create_directories(config.output_dir);

    EvaluationSession session(config.evaluator);
    int failures = 0;
    long step = meta.completed_steps();
    long next_checkpoint =
        (step / config.checkpoint_interval + 1) * config.checkpoint_interval;
    log_info("search: starting at step " + std::to_string(step) + " of " +
             std::to_string(config.iterations));

    auto persist_state = [&](bool final_too) {
        if (!persist) return;
        if (final_too) {
            save_checkpoint(meta, detail::final_checkpoint_path(config.output_dir));
            detail::write_text_file(detail::history_path(config.output_dir), history_csv(meta));
        }
    };

    while (step < config.iterations) {
        const long remaining = config.iterations - step;
        const int batch = static_cast<int>(std::min<long>(config.batch_size, remaining));

        std::vector<SampledGraphSet> samples;
        samples.reserve(static_cast<std::size_t>(batch));
        for (int b = 0; b < batch; ++b) samples.push_back(meta.subsample());

        for (int b = 0; b < batch; ++b) {
            ++step;
            SampledGraphSet& sampled = samples[static_cast<std::size_t>(b)];
            // Batched draws come from one snapshot; realign provenance so the
            // sequentially applied updates accept them.
            sampled.iteration = meta.iteration();

            EvalResult result;
            try {
                const auto spec = assemble_from_sample(meta, sampled, config.tmpl, config.input,
                                                       config.num_classes);
                result = session.evaluate(spec, sampled);
            } catch (const protocol_error& e) {
                ++failures;
                meta.record_skip(step, std::string(protocol_error::kind_name(e.what_kind())) +
                                           ": " + e.what());
                log_error("step " + std::to_string(step) + " skipped: " + e.what());
                if (failures > config.failure_budget) {
                    persist_state(true);
                    throw;
                }
                continue;
            }
            const double eta_prime = penalized_score(result, config.meta.gamma);
            meta.update_weights(sampled, eta_prime, result.accuracy, result.latency_ms);
            log_debug("step " + std::to_string(step) + ": eta=" + std::to_string(result.accuracy) +
                      " tau=" + std::to_string(result.latency_ms) +
                      " eta'=" + std::to_string(eta_prime) + " beta=" + std::to_string(meta.beta()));
        }

        // Checkpoints land on batch boundaries so a resumed run redraws the
        // same sample stream as an uninterrupted one.
        if (persist && step >= next_checkpoint) {
            save_checkpoint(meta, detail::checkpoint_path(config.output_dir, step));
            next_checkpoint = (step / config.checkpoint_interval + 1) * config.checkpoint_interval;
        }
    }
    session.shutdown();
    persist_state(true);

    SearchResult out{std::move(meta), {}};
    out.history.records = out.meta.history();
    out.history.skipped = out.meta.skipped();
    return out;
}

// ---- best-architecture extraction ---------------------------------------------

// prune -> upscale -> assemble -> infer shapes -> profile.
inline std::pair<ArchitectureSpec, ProfileReport> extract_best(
    const MetaGraph& meta, double level, NetTemplate tmpl, const TensorShape& input,
    int num_classes, double upscale = 1.0, const CostModel& cost_model = CostModel::defaults()) {
    auto subgraphs = upscale_channels(prune(meta, level), upscale);
    auto spec = assemble(subgraphs, meta.config().hierarchies, tmpl, input, num_classes, upscale);
    spec = infer_shapes(spec, input);
    return {spec, profile(spec, cost_model)};
}

// "swiftnet-96-0.4-1.50": input size, pruning level (trailing zeros trimmed),
// up-scaling factor at two decimals.
inline std::string swiftnet_name(int input_size, double level, double upscale) {
    char level_buf[32], up_buf[32];
    std::snprintf(level_buf, sizeof(level_buf), "%.2f", level);
    std::string level_str = level_buf;
    while (level_str.back() == '0') level_str.pop_back();
    if (level_str.back() == '.') level_str.pop_back();
    std::snprintf(up_buf, sizeof(up_buf), "%.2f", upscale);
    return "swiftnet-" + std::to_string(input_size) + "-" + level_str + "-" + up_buf;
}

}  // namespace gram
