// gram: meta-graph architecture search from the command line.
//
// Subcommands: search, extract, profile, sweep, space-size, export, eval-echo.
// Exit codes: 0 success, 1 usage/config error, 2 runtime error, 3 evaluator
// protocol error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gram/architecture.hpp"
#include "gram/errors.hpp"
#include "gram/evaluator.hpp"
#include "gram/log.hpp"
#include "gram/meta_graph.hpp"
#include "gram/profiler.hpp"
#include "gram/search.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitProtocol = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw gram::io_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

gram::ArchitectureSpec load_spec(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(slurp(path));
    } catch (const nlohmann::json::exception& e) {
        throw gram::corrupt_file_error(std::string("spec is not valid JSON: ") + e.what());
    }
    return gram::import_architecture(doc);
}

gram::CostModel load_cost_model_or_default(const std::string& path) {
    return path.empty() ? gram::CostModel::defaults() : gram::CostModel::load(path);
}

// "0.2:0.8:0.05" (inclusive endpoints) or "0.1,0.3,0.5".
std::vector<double> parse_levels(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double start = 0, stop = 0, step = 0;
        if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0)
            throw gram::value_error("bad level range, expected start:stop:step: " + text);
        for (int i = 0;; ++i) {
            const double v = start + i * step;
            if (v > stop + 1e-9) break;
            out.push_back(std::min(v, stop));
        }
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

void print_top_edges(const gram::MetaGraph& meta) {
    std::printf("final beta = %.6f after %ld iterations\n", meta.beta(), meta.iteration());
    for (const auto& dag : meta.dags()) {
        struct Entry {
            double w;
            int i, j;
        };
        std::vector<Entry> entries;
        dag.for_each_edge([&](int i, int j, std::size_t idx) {
            entries.push_back({dag.weights()[idx], i, j});
        });
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.w > b.w; });
        std::printf("dag %d top edges:", dag.index());
        const std::size_t top = std::min<std::size_t>(10, entries.size());
        for (std::size_t e = 0; e < top; ++e)
            std::printf(" (%d,%d)=%.4f", entries[e].i, entries[e].j, entries[e].w);
        std::printf("\n");
    }
}

int cmd_search(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& resume_path, const std::string& out_dir_flag) {
    gram::SearchConfig config = gram::load_search_config(config_path);
    if (seed) config.meta.seed = *seed;
    if (!out_dir_flag.empty()) config.output_dir = out_dir_flag;
    config.validate();

    std::optional<gram::MetaGraph> resume;
    if (!resume_path.empty()) resume = gram::load_checkpoint(resume_path);

    auto result = gram::run_search(config, std::move(resume));
    print_top_edges(result.meta);
    if (!config.output_dir.empty())
        std::printf("artifacts written to %s\n", config.output_dir.c_str());
    return kExitOk;
}

int cmd_space_size(int n, int m, int h) {
    const auto size = gram::search_space_size(n, m, h);
    std::printf("%s (log10=%.3f)\n", size.count.to_string().c_str(), size.log10);
    return kExitOk;
}

int cmd_extract(const std::string& ckpt, double level, double upscale, int input_size,
                const std::string& tmpl_str, int classes, const std::string& out_dir,
                const std::string& cost_model_path) {
    const auto meta = gram::load_checkpoint(ckpt);
    const auto tmpl = gram::parse_template(tmpl_str);
    const gram::TensorShape input{input_size, input_size, 3};
    const auto model = load_cost_model_or_default(cost_model_path);
    auto [spec, report] = gram::extract_best(meta, level, tmpl, input, classes, upscale, model);

    const std::string name = gram::swiftnet_name(input_size, level, upscale);
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/" + name + ".json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw gram::io_error("cannot write " + path);
    out << gram::export_json(spec).dump(2) << '\n';
    std::printf("%s: macs=%llu params=%llu latency_ms=%.3f\n", name.c_str(),
                static_cast<unsigned long long>(report.macs),
                static_cast<unsigned long long>(report.params), report.latency_ms);
    std::printf("wrote %s\n", path.c_str());
    return kExitOk;
}

int cmd_profile(const std::string& spec_path, const std::string& cost_model_path,
                std::optional<double> accuracy) {
    const auto spec = load_spec(spec_path);
    const auto model = load_cost_model_or_default(cost_model_path);
    const auto report = gram::profile(spec, model, accuracy);
    std::printf("macs=%llu\n", static_cast<unsigned long long>(report.macs));
    std::printf("params=%llu\n", static_cast<unsigned long long>(report.params));
    std::printf("latency_ms=%.3f\n", report.latency_ms);
    if (report.accuracy_density) std::printf("density=%.2f\n", *report.accuracy_density);
    return kExitOk;
}

int cmd_sweep(const std::string& ckpt, const std::string& levels_text, const std::string& tmpl_str,
              int input_size, int classes, const std::string& cost_model_path,
              const std::string& out_path) {
    const auto meta = gram::load_checkpoint(ckpt);
    const auto levels = parse_levels(levels_text);
    const auto model = load_cost_model_or_default(cost_model_path);
    const gram::TensorShape input{input_size, input_size, 3};
    const auto rows = gram::sweep_pruning(meta, levels, gram::parse_template(tmpl_str), input,
                                          classes, model);
    const std::string csv = gram::sweep_csv(rows);
    if (out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw gram::io_error("cannot write " + out_path);
        out << csv;
        std::printf("wrote %s (%zu rows)\n", out_path.c_str(), rows.size());
    }
    return kExitOk;
}

int cmd_export(const std::string& spec_path, const std::string& format,
               const std::string& out_path) {
    const auto spec = load_spec(spec_path);
    std::string text;
    if (format == "json") {
        text = gram::export_json(spec).dump(2) + "\n";
    } else if (format == "dot") {
        text = gram::export_dot(spec);
    } else {
        throw gram::value_error("unknown export format: " + format);
    }
    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw gram::io_error("cannot write " + out_path);
        out << text;
        std::printf("wrote %s\n", out_path.c_str());
    }
    return kExitOk;
}

// Loopback evaluator for protocol tests. Reads requests from stdin and echoes
// fixed metrics; fault flags simulate misbehaving trainers.
int cmd_eval_echo(double accuracy, double latency, const std::string& fail_mode, int fail_after) {
    std::string line;
    int handled = 0;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        nlohmann::json request;
        try {
            request = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            return kExitProtocol;
        }
        if (request.value("cmd", "") == "shutdown") return kExitOk;
        if (request.value("protocol", 0) != gram::kProtocolVersion) return kExitProtocol;
        if (!request.contains("id") || !request.contains("architecture")) return kExitProtocol;

        if (handled >= fail_after) {
            if (fail_mode == "hang") {
                std::this_thread::sleep_for(std::chrono::hours(1));
                return kExitRuntime;
            }
            if (fail_mode == "malformed") {
                std::printf("this is not json\n");
                std::fflush(stdout);
                ++handled;
                continue;
            }
            if (fail_mode == "wrong-id") {
                nlohmann::json reply{{"id", request["id"].get<long long>() + 1},
                                     {"accuracy", accuracy},
                                     {"latency_ms", latency}};
                std::printf("%s\n", reply.dump().c_str());
                std::fflush(stdout);
                ++handled;
                continue;
            }
            if (fail_mode == "wrong-protocol") {
                nlohmann::json reply{{"id", request["id"].get<long long>()},
                                     {"protocol", gram::kProtocolVersion + 1},
                                     {"accuracy", accuracy},
                                     {"latency_ms", latency}};
                std::printf("%s\n", reply.dump().c_str());
                std::fflush(stdout);
                ++handled;
                continue;
            }
            if (fail_mode == "crash") return kExitRuntime;
        }
        nlohmann::json reply{
            {"id", request["id"].get<long long>()}, {"accuracy", accuracy}, {"latency_ms", latency}};
        std::printf("%s\n", reply.dump().c_str());
        std::fflush(stdout);
        ++handled;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gram: DAG meta-graph neural architecture search engine"};
    app.require_subcommand(1);

    // search
    auto* search = app.add_subcommand("search", "run the search loop from a config file");
    std::string search_config, search_resume, search_out;
    std::optional<std::uint64_t> search_seed;
    search->add_option("--config", search_config, "search config JSON")->required();
    search->add_option("--seed", search_seed, "override the config seed");
    search->add_option("--resume", search_resume, "resume from a checkpoint file");
    search->add_option("--out", search_out, "override the output directory");

    // space-size ("--h" needs the short help flag out of the way)
    auto* space = app.add_subcommand("space-size", "exact search-space size for n, m, h");
    space->set_help_flag("--help", "print help");
    int sp_n = 30, sp_m = 3, sp_h = 3;
    space->add_option("--n", sp_n, "nodes per DAG")->required();
    space->add_option("--m", sp_m, "DAGs per hierarchy")->required();
    space->add_option("--h", sp_h, "hierarchies")->required();

    // extract
    auto* extract = app.add_subcommand("extract", "prune, up-scale and export an architecture");
    std::string ex_ckpt, ex_tmpl = "imagenet", ex_out = ".", ex_cost;
    double ex_level = 0.4, ex_upscale = 1.0;
    int ex_input = 96, ex_classes = 1000;
    extract->add_option("--ckpt", ex_ckpt, "meta-graph checkpoint")->required();
    extract->add_option("--level", ex_level, "pruning level in [0,1]")->check(CLI::Range(0.0, 1.0));
    extract->add_option("--upscale", ex_upscale, "channel up-scaling factor >= 1");
    extract->add_option("--input", ex_input, "square input size");
    extract->add_option("--template", ex_tmpl, "cifar or imagenet");
    extract->add_option("--classes", ex_classes, "classifier outputs");
    extract->add_option("--out", ex_out, "output directory");
    extract->add_option("--cost-model", ex_cost, "cost model JSON");

    // profile
    auto* profile = app.add_subcommand("profile", "MACs/params/latency for a spec file");
    std::string pr_spec, pr_cost;
    std::optional<double> pr_accuracy;
    profile->add_option("--spec", pr_spec, "architecture JSON")->required();
    profile->add_option("--cost-model", pr_cost, "cost model JSON");
    profile->add_option("--accuracy", pr_accuracy, "accuracy percent; enables density output");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "profile across a grid of pruning levels");
    std::string sw_ckpt, sw_levels = "0:1:0.1", sw_tmpl = "cifar", sw_cost, sw_out;
    int sw_input = 32, sw_classes = 10;
    sweep->add_option("--ckpt", sw_ckpt, "meta-graph checkpoint")->required();
    sweep->add_option("--levels", sw_levels, "start:stop:step or comma list");
    sweep->add_option("--template", sw_tmpl, "cifar or imagenet");
    sweep->add_option("--input", sw_input, "square input size");
    sweep->add_option("--classes", sw_classes, "classifier outputs");
    sweep->add_option("--cost-model", sw_cost, "cost model JSON");
    sweep->add_option("--out", sw_out, "CSV path (stdout when omitted)");

    // export
    auto* exp = app.add_subcommand("export", "re-emit a spec as json or dot");
    std::string xp_spec, xp_format = "dot", xp_out;
    exp->add_option("--spec", xp_spec, "architecture JSON")->required();
    exp->add_option("--format", xp_format, "json or dot");
    exp->add_option("--out", xp_out, "output path (stdout when omitted)");

    // eval-echo
    auto* echo = app.add_subcommand("eval-echo", "loopback external evaluator for tests");
    double ec_accuracy = 0.5, ec_latency = 1.0;
    std::string ec_fail = "none";
    int ec_fail_after = 0;
    echo->add_option("--accuracy", ec_accuracy, "accuracy to reply");
    echo->add_option("--latency", ec_latency, "latency_ms to reply");
    echo->add_option("--fail-mode", ec_fail, "none|hang|malformed|wrong-id|wrong-protocol|crash");
    echo->add_option("--fail-after", ec_fail_after, "good replies before the fault");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (app.got_subcommand(search))
            return cmd_search(search_config, search_seed, search_resume, search_out);
        if (app.got_subcommand(space)) return cmd_space_size(sp_n, sp_m, sp_h);
        if (app.got_subcommand(extract))
            return cmd_extract(ex_ckpt, ex_level, ex_upscale, ex_input, ex_tmpl, ex_classes,
                               ex_out, ex_cost);
        if (app.got_subcommand(profile)) return cmd_profile(pr_spec, pr_cost, pr_accuracy);
        if (app.got_subcommand(sweep))
            return cmd_sweep(sw_ckpt, sw_levels, sw_tmpl, sw_input, sw_classes, sw_cost, sw_out);
        if (app.got_subcommand(exp)) return cmd_export(xp_spec, xp_format, xp_out);
        if (app.got_subcommand(echo))
            return cmd_eval_echo(ec_accuracy, ec_latency, ec_fail, ec_fail_after);
    } catch (const gram::config_error& e) {
        gram::log_error(e.what());
        return kExitUsage;
    } catch (const gram::protocol_error& e) {
        gram::log_error(std::string(gram::protocol_error::kind_name(e.what_kind())) + ": " +
                        e.what());
        return kExitProtocol;
    } catch (const gram::error& e) {
        gram::log_error(e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        gram::log_error(e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
