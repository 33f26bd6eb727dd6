#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gram/architecture.hpp"
#include "gram/errors.hpp"
#include "gram/meta_graph.hpp"

// Cost accounting for assembled architectures. MACs count multiply-accumulates
// of convolutions and dense layers only; batch-norm, activations and pooling
// contribute none. Parameters follow the convention: convolutions carry no
// bias under batch norm, each batch norm adds 2 per output channel, the final
// head layer carries a bias and no batch norm.

namespace gram {

struct ProfiledLayer {
    std::string name;
    std::string kind;  // cost-table key: conv1x1 | conv3x3 | pool | dense
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    int hierarchy = -1;  // -1 for stem/head layers
    int dag = -1;        // -1 for anything that is not a DAG node
};

namespace detail {

inline std::uint64_t conv_macs(const TensorShape& out, int kernel, int in_channels) {
    return static_cast<std::uint64_t>(out.height) * static_cast<std::uint64_t>(out.width) *
           static_cast<std::uint64_t>(kernel) * static_cast<std::uint64_t>(kernel) *
           static_cast<std::uint64_t>(in_channels) * static_cast<std::uint64_t>(out.channels);
}

inline const char* conv_kind(int kernel) { return kernel == 1 ? "conv1x1" : "conv3x3"; }

}  // namespace detail

// Shape key of the layer feeding the named head layer.
inline std::string prev_layer_id(const ArchitectureSpec& spec, const std::string& head_name) {
    std::string prev = spec.hierarchies.empty()
                           ? (spec.stem.empty() ? std::string("input") : spec.stem.back().name)
                           : "h" + std::to_string(spec.hierarchies.size() - 1) + ".pool";
    for (const Layer& l : spec.head) {
        if (l.name == head_name) return prev;
        prev = l.name;
    }
    throw state_error("unknown head layer: " + head_name);
}

// Flattens a shape-annotated spec into cost-bearing layers. Each DAG node is
// one layer whose MACs sum the node operation applied to every kept input
// (sources read the hierarchy input). Identity pass-throughs contribute
// nothing. Flatten and the batch-norm/ELU markers are not layers.
inline std::vector<ProfiledLayer> profiled_layers(const ArchitectureSpec& spec) {
    if (!spec.annotated()) throw state_error("profiling requires a shape-annotated spec");
    std::vector<ProfiledLayer> out;

    std::string prev = "input";
    for (const Layer& l : spec.stem) {
        const TensorShape& shape = spec.shape_of(l.name);
        const int in_ch = spec.shape_of(prev).channels;
        ProfiledLayer p;
        p.name = l.name;
        p.kind = detail::conv_kind(l.kernel);
        p.macs = detail::conv_macs(shape, l.kernel, in_ch);
        p.params = static_cast<std::uint64_t>(l.kernel) * l.kernel * in_ch * l.filters +
                   (l.batch_norm ? 2ULL * l.filters : 0ULL) + (l.bias ? l.filters : 0ULL);
        out.push_back(std::move(p));
        prev = l.name;
    }

    for (std::size_t hi = 0; hi < spec.hierarchies.size(); ++hi) {
        const auto& hierarchy = spec.hierarchies[hi];
        const int input_ch = spec.shape_of("h" + std::to_string(hi) + ".in").channels;
        for (std::size_t dj = 0; dj < hierarchy.dags.size(); ++dj) {
            const DagSubgraph& sub = hierarchy.dags[dj];
            if (sub.empty_graph()) continue;
            const auto srcs = sub.sources();
            for (const DagNode& node : sub.nodes) {
                const std::string id =
                    detail::node_id(static_cast<int>(hi), static_cast<int>(dj), node.id);
                const TensorShape& shape = spec.shape_of(id);
                ProfiledLayer p;
                p.name = id;
                p.kind = detail::conv_kind(node.op.kernel());
                p.hierarchy = static_cast<int>(hi);
                p.dag = static_cast<int>(dj);
                for (const Edge& e : sub.in_edges(node.id)) {
                    const int c_in = sub.op_of(e.from).filters;
                    p.macs += detail::conv_macs(shape, node.op.kernel(), c_in);
                    p.params += static_cast<std::uint64_t>(node.op.kernel()) * node.op.kernel() *
                                c_in * node.op.filters;
                }
                if (std::find(srcs.begin(), srcs.end(), node.id) != srcs.end()) {
                    p.macs += detail::conv_macs(shape, node.op.kernel(), input_ch);
                    p.params += static_cast<std::uint64_t>(node.op.kernel()) * node.op.kernel() *
                                input_ch * node.op.filters;
                }
                p.params += 2ULL * node.op.filters;  // batch norm
                out.push_back(std::move(p));
            }
        }
        ProfiledLayer pool;
        pool.name = hierarchy.pool.name;
        pool.kind = "pool";
        pool.hierarchy = static_cast<int>(hi);
        out.push_back(std::move(pool));
    }

    for (const Layer& l : spec.head) {
        const TensorShape& shape = spec.shape_of(l.name);
        switch (l.kind) {
            case LayerKind::conv: {
                const int in_ch = spec.shape_of(prev_layer_id(spec, l.name)).channels;
                ProfiledLayer p;
                p.name = l.name;
                p.kind = detail::conv_kind(l.kernel);
                p.macs = detail::conv_macs(shape, l.kernel, in_ch);
                p.params = static_cast<std::uint64_t>(l.kernel) * l.kernel * in_ch * l.filters +
                           (l.bias ? l.filters : 0ULL) + (l.batch_norm ? 2ULL * l.filters : 0ULL);
                out.push_back(std::move(p));
                break;
            }
            case LayerKind::global_pool: {
                ProfiledLayer p;
                p.name = l.name;
                p.kind = "pool";
                out.push_back(std::move(p));
                break;
            }
            case LayerKind::dense: {
                const int in_ch = spec.shape_of(prev_layer_id(spec, l.name)).channels;
                ProfiledLayer p;
                p.name = l.name;
                p.kind = "dense";
                p.macs = static_cast<std::uint64_t>(in_ch) * l.filters;
                p.params = static_cast<std::uint64_t>(in_ch) * l.filters + l.filters;
                out.push_back(std::move(p));
                break;
            }
            case LayerKind::flatten:
                break;
            case LayerKind::pool:
                throw state_error("fixed pooling is not a head layer");
        }
    }
    return out;
}

inline std::uint64_t count_macs(const ArchitectureSpec& spec) {
    std::uint64_t total = 0;
    for (const auto& l : profiled_layers(spec)) total += l.macs;
    return total;
}

inline std::uint64_t count_params(const ArchitectureSpec& spec) {
    std::uint64_t total = 0;
    for (const auto& l : profiled_layers(spec)) total += l.params;
    return total;
}

// ---- latency model ------------------------------------------------------------

inline constexpr int kCostModelVersion = 1;

// Linear latency model: each layer costs (M-MACs * coefficient + overhead) ms.
// With the parallel flag set, the DAGs of one hierarchy contribute the maximum
// of their latencies instead of the sum.
struct CostModel {
    bool parallel = false;
    double overhead_ms = 0.01;
    std::map<std::string, double> coeffs;  // ms per M-MACs, keyed by op kind

    static CostModel defaults() {
        CostModel m;
        m.coeffs = {{"conv1x1", 0.05}, {"conv3x3", 0.08}, {"pool", 0.02}, {"dense", 0.05}};
        return m;
    }

    double coeff(const std::string& kind) const {
        auto it = coeffs.find(kind);
        if (it == coeffs.end()) throw model_error("cost model has no coefficient for " + kind);
        if (it->second < 0.0) throw model_error("cost coefficient for " + kind + " is negative");
        return it->second;
    }

    nlohmann::json to_json() const {
        return {{"version", kCostModelVersion},
                {"parallel", parallel},
                {"overhead_ms", overhead_ms},
                {"coeffs", coeffs}};
    }

    static CostModel from_json(const nlohmann::json& doc) {
        try {
            const int version = doc.at("version").get<int>();
            if (version != kCostModelVersion)
                throw version_error("unsupported cost model version " + std::to_string(version));
            CostModel m;
            m.parallel = doc.at("parallel").get<bool>();
            m.overhead_ms = doc.at("overhead_ms").get<double>();
            m.coeffs = doc.at("coeffs").get<std::map<std::string, double>>();
            if (m.overhead_ms < 0.0) throw model_error("overhead_ms must be >= 0");
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw schema_error(std::string("cost model schema mismatch: ") + e.what());
        }
    }

    static CostModel load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open cost model: " + path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw corrupt_file_error(std::string("cost model is not valid JSON: ") + e.what());
        }
        return from_json(doc);
    }
};

inline double estimate_latency(const std::vector<ProfiledLayer>& layers, const CostModel& model) {
    double total = 0.0;
    std::map<int, std::map<int, double>> dag_latency;  // hierarchy -> dag -> ms
    for (const auto& l : layers) {
        const double ms = static_cast<double>(l.macs) / 1e6 * model.coeff(l.kind) +
                          model.overhead_ms;
        if (l.hierarchy >= 0 && l.dag >= 0)
            dag_latency[l.hierarchy][l.dag] += ms;
        else
            total += ms;
    }
    for (const auto& [hierarchy, dags] : dag_latency) {
        if (model.parallel) {
            double worst = 0.0;
            for (const auto& [dag, ms] : dags) worst = std::max(worst, ms);
            total += worst;
        } else {
            for (const auto& [dag, ms] : dags) total += ms;
        }
    }
    return total;
}

inline double estimate_latency(const ArchitectureSpec& spec, const CostModel& model) {
    return estimate_latency(profiled_layers(spec), model);
}

// Accuracy percent per million MACs.
inline double accuracy_density(double accuracy_percent, std::uint64_t macs) {
    if (macs == 0) throw value_error("accuracy density is undefined for zero MACs");
    return accuracy_percent / (static_cast<double>(macs) / 1e6);
}

struct ProfileReport {
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    double latency_ms = 0.0;
    std::optional<double> accuracy_density;
};

inline ProfileReport profile(const ArchitectureSpec& spec, const CostModel& model,
                             std::optional<double> accuracy_percent = std::nullopt) {
    ProfileReport report;
    const auto layers = profiled_layers(spec);
    for (const auto& l : layers) {
        report.macs += l.macs;
        report.params += l.params;
    }
    report.latency_ms = estimate_latency(layers, model);
    if (accuracy_percent) report.accuracy_density = accuracy_density(*accuracy_percent, report.macs);
    return report;
}

// ---- pruning-level sweep --------------------------------------------------------

struct SweepRow {
    double level = 0.0;
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    double latency_ms = 0.0;
};

inline std::vector<SweepRow> sweep_pruning(const MetaGraph& meta, std::vector<double> levels,
                                           NetTemplate tmpl, const TensorShape& input,
                                           int num_classes, const CostModel& model) {
    std::sort(levels.begin(), levels.end());
    std::vector<SweepRow> rows;
    rows.reserve(levels.size());
    for (double level : levels) {
        const auto subgraphs = prune(meta, level);
        auto spec = assemble(subgraphs, meta.config().hierarchies, tmpl, input, num_classes);
        spec = infer_shapes(spec, input);
        const auto report = profile(spec, model);
        rows.push_back({level, report.macs, report.params, report.latency_ms});
    }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "level,macs,params,latency_ms\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6g,%llu,%llu,%.6f\n", r.level,
                      static_cast<unsigned long long>(r.macs),
                      static_cast<unsigned long long>(r.params), r.latency_ms);
        out += buf;
    }
    return out;
}

}  // namespace gram
