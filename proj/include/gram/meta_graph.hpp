#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gram/bigint.hpp"
#include "gram/errors.hpp"
#include "gram/node_op.hpp"
#include "gram/rng.hpp"

// The meta-graph is a set of K = m*h complete DAGs over n ordered nodes.
// Every edge (i,j) with i < j carries a positive connection weight,
// max-normalized per DAG so weights double as edge-inclusion probabilities.
// One search iteration:
//
//   sample each edge independently with p = clamp(w, p_min, p_max)
//   w <- w * exp[alpha * (eta' - beta)]   for each sampled edge
//   w <- w / max_w                        per DAG (max back to 1)
//   beta <- (1 - rho) * beta + rho * eta'
//
// The multiplicative step runs in log space with a single exponentiation at
// normalization time, so compounded multipliers cannot overflow.

namespace gram {

struct MetaGraphConfig {
    int hierarchies = 3;         // h
    int dags_per_hierarchy = 3;  // m
    int nodes_per_dag = 30;      // n
    std::vector<NodeOp> op_palette = default_op_palette();
    std::uint64_t seed = 0;
    double p_min = 0.05;   // exploration floor on edge-inclusion probability
    double p_max = 1.0;    // exploration cap; 1.0 disables it
    double alpha = 0.9;    // update rate
    double beta0 = 0.4;    // initial baseline
    double rho = 0.1;      // baseline moving-average rate
    double gamma = 0.01;   // latency penalty per millisecond
    bool learn_op_assignments = false;  // reserved; node ops are fixed at init

    int dag_count() const { return hierarchies * dags_per_hierarchy; }

    void validate() const {
        if (hierarchies < 1) throw config_error("hierarchies (h) must be >= 1");
        if (dags_per_hierarchy < 1) throw config_error("dags_per_hierarchy (m) must be >= 1");
        if (nodes_per_dag < 2) throw config_error("nodes_per_dag (n) must be >= 2");
        if (op_palette.empty()) throw config_error("op_palette must be non-empty");
        for (const auto& op : op_palette)
            if (op.filters < 1) throw config_error("op_palette filters must be >= 1");
        if (!(p_min > 0.0 && p_min <= 1.0)) throw config_error("p_min must be in (0,1]");
        if (!(p_max >= p_min && p_max <= 1.0)) throw config_error("p_max must be in [p_min,1]");
        if (!(alpha > 0.0)) throw config_error("alpha must be > 0");
        if (!std::isfinite(beta0)) throw config_error("beta0 must be finite");
        if (!(rho > 0.0 && rho <= 1.0)) throw config_error("rho must be in (0,1]");
        if (!(gamma >= 0.0)) throw config_error("gamma must be >= 0");
        if (learn_op_assignments)
            throw config_error("learn_op_assignments is reserved and must be false");
    }

    bool operator==(const MetaGraphConfig&) const = default;
};

struct Edge {
    int from = 0;
    int to = 0;
    auto operator<=>(const Edge&) const = default;
};

// One accepted evaluation: iteration counter after the update, raw metrics,
// penalized score, baseline after the update, and sampled edge counts.
struct HistoryRecord {
    long t = 0;
    double eta = 0.0;
    double tau = 0.0;
    double eta_prime = 0.0;
    double beta = 0.0;
    std::vector<int> edges_per_dag;
    bool operator==(const HistoryRecord&) const = default;
};

struct SkipRecord {
    long step = 0;
    std::string reason;
    bool operator==(const SkipRecord&) const = default;
};

// One complete DAG with its fixed node operations and its connection weights,
// stored as a packed upper triangle.
class Dag {
public:
    Dag() = default;

    Dag(int index, int node_count)
        : index_(index), n_(node_count), weights_(edge_count_for(node_count), 1.0) {}

    static std::size_t edge_count_for(int n) {
        return static_cast<std::size_t>(n) * (n - 1) / 2;
    }

    // Packed index for (i,j), i < j, row-major over the upper triangle.
    std::size_t edge_index(int i, int j) const {
        check_edge(i, j);
        const std::size_t row_offset =
            static_cast<std::size_t>(i) * (2 * n_ - i - 1) / 2;
        return row_offset + static_cast<std::size_t>(j - i - 1);
    }

    int index() const { return index_; }
    int node_count() const { return n_; }
    std::size_t edge_count() const { return weights_.size(); }

    double weight(int i, int j) const { return weights_[edge_index(i, j)]; }

    void set_weight(int i, int j, double w) {
        if (!(std::isfinite(w) && w > 0.0)) throw value_error("edge weight must be finite and > 0");
        weights_[edge_index(i, j)] = w;
    }

    const std::vector<double>& weights() const { return weights_; }

    const std::vector<NodeOp>& node_ops() const { return node_ops_; }
    const NodeOp& node_op(int v) const { return node_ops_.at(static_cast<std::size_t>(v)); }
    void assign_node_ops(std::vector<NodeOp> ops) { node_ops_ = std::move(ops); }

    template <typename Fn>
    void for_each_edge(Fn&& fn) const {
        std::size_t idx = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j) fn(i, j, idx++);
    }

    double max_weight() const {
        return *std::max_element(weights_.begin(), weights_.end());
    }

    // Multiplies the given edges by exp(advantage) and renormalizes so the
    // largest weight is exactly 1. Runs in log space; weights are floored at
    // a tiny positive value so they never reach zero.
    void apply_update(const std::vector<Edge>& sampled, double advantage) {
        std::vector<double> lw(weights_.size());
        for (std::size_t i = 0; i < weights_.size(); ++i) lw[i] = std::log(weights_[i]);
        for (const Edge& e : sampled) lw[edge_index(e.from, e.to)] += advantage;
        std::size_t arg_max = 0;
        for (std::size_t i = 1; i < lw.size(); ++i)
            if (lw[i] > lw[arg_max]) arg_max = i;
        const double z = lw[arg_max];
        for (std::size_t i = 0; i < weights_.size(); ++i)
            weights_[i] = std::max(std::exp(lw[i] - z), kWeightFloor);
        weights_[arg_max] = 1.0;
    }

    // Renormalizes so the maximum weight is exactly 1.
    void normalize() { apply_update({}, 0.0); }

    bool operator==(const Dag&) const = default;

private:
    static constexpr double kWeightFloor = 1e-300;

    void check_edge(int i, int j) const {
        if (i < 0 || j >= n_ || i >= j)
            throw range_error("edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is not a forward edge of a " + std::to_string(n_) + "-node DAG");
    }

    int index_ = 0;
    int n_ = 0;
    std::vector<double> weights_;
    std::vector<NodeOp> node_ops_;
};

// One concrete subgraph per DAG, drawn from the current weights. Acyclic by
// construction (all edges run from lower to higher node id).
struct SampledGraphSet {
    struct DagSample {
        std::vector<Edge> edges;
        std::vector<int> active_nodes;  // union of sampled-edge endpoints
        bool empty() const { return edges.empty(); }
        bool operator==(const DagSample&) const = default;
    };

    std::vector<DagSample> dags;
    int nodes_per_dag = 0;
    long iteration = 0;            // meta-graph iteration the draw was taken at
    std::uint64_t draw_index = 0;  // rng draw counter at the start of the draw

    int total_edges() const {
        int total = 0;
        for (const auto& d : dags) total += static_cast<int>(d.edges.size());
        return total;
    }

    std::vector<int> edge_counts() const {
        std::vector<int> counts;
        counts.reserve(dags.size());
        for (const auto& d : dags) counts.push_back(static_cast<int>(d.edges.size()));
        return counts;
    }

    bool operator==(const SampledGraphSet&) const = default;
};

struct UpdateOutcome {
    double advantage = 0.0;    // alpha * (eta' - beta), applied in log space
    double multiplier = 1.0;   // exp(advantage), the pre-normalization factor
    double beta_before = 0.0;
    double beta_after = 0.0;
};

class MetaGraph {
public:
    MetaGraph() = default;

    explicit MetaGraph(MetaGraphConfig config) : config_(std::move(config)) {
        config_.validate();
        beta_ = config_.beta0;
        rng_ = Rng(config_.seed);
        const int k_total = config_.dag_count();
        dags_.reserve(static_cast<std::size_t>(k_total));
        for (int k = 0; k < k_total; ++k) {
            Dag dag(k, config_.nodes_per_dag);
            std::vector<NodeOp> ops;
            ops.reserve(static_cast<std::size_t>(config_.nodes_per_dag));
            for (int v = 0; v < config_.nodes_per_dag; ++v)
                ops.push_back(config_.op_palette[rng_.next_index(config_.op_palette.size())]);
            dag.assign_node_ops(std::move(ops));
            dags_.push_back(std::move(dag));
        }
    }

    const MetaGraphConfig& config() const { return config_; }
    const std::vector<Dag>& dags() const { return dags_; }
    Dag& dag(int k) { return dags_.at(static_cast<std::size_t>(k)); }
    const Dag& dag(int k) const { return dags_.at(static_cast<std::size_t>(k)); }
    int hierarchy_of(int dag_index) const { return dag_index / config_.dags_per_hierarchy; }

    long iteration() const { return t_; }
    double beta() const { return beta_; }
    const std::vector<HistoryRecord>& history() const { return history_; }
    const std::vector<SkipRecord>& skipped() const { return skipped_; }
    Rng& rng() { return rng_; }
    const Rng& rng() const { return rng_; }

    // Steps already consumed by a search loop, counting skips.
    long completed_steps() const {
        return static_cast<long>(history_.size() + skipped_.size());
    }

    // Draws one subgraph per DAG using the supplied generator. Each edge is
    // included independently with probability clamp(w, p_min, p_max).
    SampledGraphSet subsample(Rng& rng) const {
        SampledGraphSet out;
        out.iteration = t_;
        out.draw_index = rng.draws();
        out.nodes_per_dag = config_.nodes_per_dag;
        out.dags.reserve(dags_.size());
        for (const Dag& dag : dags_) {
            SampledGraphSet::DagSample sample;
            dag.for_each_edge([&](int i, int j, std::size_t idx) {
                const double p = std::clamp(dag.weights()[idx], config_.p_min, config_.p_max);
                if (rng.next_double() < p) sample.edges.push_back({i, j});
            });
            for (const Edge& e : sample.edges) {
                if (e.from >= e.to) throw state_error("sampled edge violates node order");
                sample.active_nodes.push_back(e.from);
                sample.active_nodes.push_back(e.to);
            }
            std::sort(sample.active_nodes.begin(), sample.active_nodes.end());
            sample.active_nodes.erase(
                std::unique(sample.active_nodes.begin(), sample.active_nodes.end()),
                sample.active_nodes.end());
            out.dags.push_back(std::move(sample));
        }
        return out;
    }

    SampledGraphSet subsample() { return subsample(rng_); }

    // Applies the multiplicative update for one evaluated sample, advances the
    // iteration counter, appends a history record and moves the baseline.
    // DAGs with no sampled edges are left untouched. eta/tau are recorded in
    // the history; when omitted the penalized score stands in for eta.
    UpdateOutcome update_weights(const SampledGraphSet& sampled, double eta_prime,
                                 double eta = std::numeric_limits<double>::quiet_NaN(),
                                 double tau = std::numeric_limits<double>::quiet_NaN()) {
        if (!std::isfinite(eta_prime)) throw value_error("eta_prime must be finite");
        if (sampled.iteration != t_)
            throw state_error("sampled set was drawn at iteration " +
                              std::to_string(sampled.iteration) + ", meta-graph is at " +
                              std::to_string(t_));
        if (sampled.dags.size() != dags_.size())
            throw state_error("sampled set covers a different number of DAGs");

        UpdateOutcome outcome;
        outcome.beta_before = beta_;
        outcome.advantage = config_.alpha * (eta_prime - beta_);
        outcome.multiplier = std::exp(outcome.advantage);
        for (std::size_t k = 0; k < dags_.size(); ++k) {
            const auto& edges = sampled.dags[k].edges;
            if (edges.empty()) continue;
            dags_[k].apply_update(edges, outcome.advantage);
        }
        ++t_;
        outcome.beta_after = update_beta(eta_prime);
        HistoryRecord rec;
        rec.t = t_;
        rec.eta = std::isfinite(eta) ? eta : eta_prime;
        rec.tau = std::isfinite(tau) ? tau : 0.0;
        rec.eta_prime = eta_prime;
        rec.beta = outcome.beta_after;
        rec.edges_per_dag = sampled.edge_counts();
        history_.push_back(std::move(rec));
        return outcome;
    }

    // Exponential moving average of penalized scores.
    double update_beta(double eta_prime) {
        if (!std::isfinite(eta_prime)) throw value_error("eta_prime must be finite");
        beta_ = (1.0 - config_.rho) * beta_ + config_.rho * eta_prime;
        return beta_;
    }

    void record_skip(long step, const std::string& reason) {
        skipped_.push_back({step, reason});
    }

    bool operator==(const MetaGraph&) const = default;

    // Checkpoint codec lives here so every field stays in one place.
    nlohmann::json to_json() const;
    static MetaGraph from_json(const nlohmann::json& doc);

private:
    MetaGraphConfig config_;
    std::vector<Dag> dags_;
    long t_ = 0;
    double beta_ = 0.0;
    std::vector<HistoryRecord> history_;
    std::vector<SkipRecord> skipped_;
    Rng rng_;
};

// ---- search-space size ------------------------------------------------------

struct SpaceSize {
    BigUint count;
    double log10 = 0.0;
};

// (sum_{i=1}^{n} C(n-1, i)) ^ (m*h), evaluated exactly. Equals
// (2^(n-1) - 1)^(m*h).
inline SpaceSize search_space_size(int n, int m, int h) {
    if (n < 1 || m < 1 || h < 1) throw range_error("search_space_size: n, m, h must be >= 1");
    BigUint per_dag;
    for (int i = 1; i <= n; ++i)
        per_dag += binomial(static_cast<std::uint64_t>(n - 1), static_cast<std::uint64_t>(i));
    SpaceSize out;
    out.count = per_dag.pow(static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(h));
    out.log10 = out.count.log10();
    return out;
}

// ---- checkpoint persistence -------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json config_to_json(const MetaGraphConfig& c) {
    nlohmann::json palette = nlohmann::json::array();
    for (const auto& op : c.op_palette) palette.push_back(op.to_string());
    return {
        {"hierarchies", c.hierarchies},
        {"dags_per_hierarchy", c.dags_per_hierarchy},
        {"nodes_per_dag", c.nodes_per_dag},
        {"op_palette", palette},
        {"seed", c.seed},
        {"p_min", c.p_min},
        {"p_max", c.p_max},
        {"alpha", c.alpha},
        {"beta0", c.beta0},
        {"rho", c.rho},
        {"gamma", c.gamma},
        {"learn_op_assignments", c.learn_op_assignments},
    };
}

inline MetaGraphConfig config_from_json(const nlohmann::json& j) {
    MetaGraphConfig c;
    c.hierarchies = j.at("hierarchies").get<int>();
    c.dags_per_hierarchy = j.at("dags_per_hierarchy").get<int>();
    c.nodes_per_dag = j.at("nodes_per_dag").get<int>();
    c.op_palette.clear();
    for (const auto& s : j.at("op_palette")) c.op_palette.push_back(NodeOp::parse(s.get<std::string>()));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.p_min = j.at("p_min").get<double>();
    c.p_max = j.value("p_max", 1.0);
    c.alpha = j.at("alpha").get<double>();
    c.beta0 = j.at("beta0").get<double>();
    c.rho = j.at("rho").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.learn_op_assignments = j.value("learn_op_assignments", false);
    return c;
}

}  // namespace detail

inline nlohmann::json MetaGraph::to_json() const {
    nlohmann::json dags = nlohmann::json::array();
    for (const Dag& dag : dags_) {
        nlohmann::json ops = nlohmann::json::array();
        for (const auto& op : dag.node_ops()) ops.push_back(op.to_string());
        nlohmann::json weights = nlohmann::json::array();
        dag.for_each_edge([&](int i, int j, std::size_t idx) {
            weights.push_back({i, j, dag.weights()[idx]});
        });
        dags.push_back({{"node_ops", ops}, {"weights", weights}});
    }
    nlohmann::json history = nlohmann::json::array();
    for (const auto& r : history_) {
        history.push_back({{"t", r.t},
                           {"eta", r.eta},
                           {"tau", r.tau},
                           {"eta_prime", r.eta_prime},
                           {"beta", r.beta},
                           {"edges_per_dag", r.edges_per_dag}});
    }
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : skipped_) skipped.push_back({{"step", s.step}, {"reason", s.reason}});
    return {
        {"version", kCheckpointVersion},
        {"config", detail::config_to_json(config_)},
        {"dags", dags},
        {"t", t_},
        {"beta", beta_},
        {"history", history},
        {"skipped", skipped},
        {"rng", rng_.save_state()},
    };
}

inline MetaGraph MetaGraph::from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw version_error("unsupported checkpoint version " + std::to_string(version));

        MetaGraph meta;
        meta.config_ = detail::config_from_json(doc.at("config"));
        meta.config_.validate();
        const auto& dags = doc.at("dags");
        if (static_cast<int>(dags.size()) != meta.config_.dag_count())
            throw schema_error("checkpoint DAG count does not match config");
        int k = 0;
        for (const auto& dj : dags) {
            Dag dag(k, meta.config_.nodes_per_dag);
            std::vector<NodeOp> ops;
            for (const auto& s : dj.at("node_ops")) ops.push_back(NodeOp::parse(s.get<std::string>()));
            if (static_cast<int>(ops.size()) != meta.config_.nodes_per_dag)
                throw schema_error("checkpoint node_ops length does not match n");
            dag.assign_node_ops(std::move(ops));
            std::size_t seen = 0;
            for (const auto& triple : dj.at("weights")) {
                dag.set_weight(triple.at(0).get<int>(), triple.at(1).get<int>(),
                               triple.at(2).get<double>());
                ++seen;
            }
            if (seen != dag.edge_count())
                throw schema_error("checkpoint weight count does not match n(n-1)/2");
            meta.dags_.push_back(std::move(dag));
            ++k;
        }
        meta.t_ = doc.at("t").get<long>();
        meta.beta_ = doc.at("beta").get<double>();
        for (const auto& rj : doc.at("history")) {
            HistoryRecord r;
            r.t = rj.at("t").get<long>();
            r.eta = rj.at("eta").get<double>();
            r.tau = rj.at("tau").get<double>();
            r.eta_prime = rj.at("eta_prime").get<double>();
            r.beta = rj.at("beta").get<double>();
            r.edges_per_dag = rj.at("edges_per_dag").get<std::vector<int>>();
            meta.history_.push_back(std::move(r));
        }
        for (const auto& sj : doc.value("skipped", nlohmann::json::array()))
            meta.skipped_.push_back({sj.at("step").get<long>(), sj.at("reason").get<std::string>()});
        meta.rng_ = Rng::restore(doc.at("rng").get<std::string>());
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("checkpoint schema mismatch: ") + e.what());
    } catch (const value_error& e) {
        throw schema_error(std::string("checkpoint schema mismatch: ") + e.what());
    } catch (const config_error& e) {
        throw schema_error(std::string("checkpoint carries an invalid config: ") + e.what());
    }
}

inline void save_checkpoint(const MetaGraph& meta, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    out << meta.to_json().dump(2) << '\n';
    if (!out) throw io_error("write failed: " + path);
}

inline MetaGraph load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw corrupt_file_error(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    return MetaGraph::from_json(doc);
}

}  // namespace gram
