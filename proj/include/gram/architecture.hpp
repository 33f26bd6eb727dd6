#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gram/errors.hpp"
#include "gram/meta_graph.hpp"
#include "gram/node_op.hpp"

// Turns meta-graph state into concrete network descriptions: threshold
// pruning, channel up-scaling, stem/hierarchy/head assembly, shape inference
// and JSON/DOT export. Everything here is a pure value transformation; no
// tensors are ever materialized.

namespace gram {

enum class NetTemplate { cifar, imagenet };

inline const char* to_string(NetTemplate t) {
    return t == NetTemplate::cifar ? "cifar" : "imagenet";
}

inline NetTemplate parse_template(const std::string& s) {
    if (s == "cifar") return NetTemplate::cifar;
    if (s == "imagenet") return NetTemplate::imagenet;
    throw value_error("unknown template: " + s + " (expected cifar or imagenet)");
}

struct TensorShape {
    int height = 0;
    int width = 0;
    int channels = 0;

    void validate() const {
        if (height < 1 || width < 1 || channels < 1)
            throw shape_error("tensor dimensions must be >= 1");
    }

    std::string to_string() const {
        return std::to_string(height) + "x" + std::to_string(width) + "x" +
               std::to_string(channels);
    }

    bool operator==(const TensorShape&) const = default;
};

enum class LayerKind { conv, pool, global_pool, flatten, dense };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::pool: return "pool";
        case LayerKind::global_pool: return "global_pool";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
    }
    return "?";
}

// Fixed (non-searched) layer of a stem or head. batch_norm and bias are
// markers for profilers and external trainers; they carry no weights here.
struct Layer {
    LayerKind kind = LayerKind::conv;
    std::string name;
    int kernel = 1;
    int stride = 1;
    int filters = 0;
    bool batch_norm = false;
    bool bias = false;

    bool operator==(const Layer&) const = default;
};

struct DagNode {
    int id = 0;
    NodeOp op;
    bool operator==(const DagNode&) const = default;
};

// A concrete subgraph of one DAG: only the nodes touched by at least one kept
// edge appear. An edgeless subgraph stands for an identity pass-through.
struct DagSubgraph {
    int dag_index = 0;
    std::vector<DagNode> nodes;  // ascending by id
    std::vector<Edge> edges;     // sorted, from < to

    bool empty_graph() const { return edges.empty(); }

    bool has_node(int id) const {
        return std::any_of(nodes.begin(), nodes.end(),
                           [id](const DagNode& n) { return n.id == id; });
    }

    const NodeOp& op_of(int id) const {
        for (const auto& n : nodes)
            if (n.id == id) return n.op;
        throw state_error("subgraph has no node " + std::to_string(id));
    }

    // Nodes with no kept predecessor; they read the hierarchy input.
    std::vector<int> sources() const {
        std::set<int> with_pred;
        for (const Edge& e : edges) with_pred.insert(e.to);
        std::vector<int> out;
        for (const auto& n : nodes)
            if (!with_pred.count(n.id)) out.push_back(n.id);
        return out;
    }

    // Nodes with no kept successor; their outputs are concatenated.
    std::vector<int> sinks() const {
        std::set<int> with_succ;
        for (const Edge& e : edges) with_succ.insert(e.from);
        std::vector<int> out;
        for (const auto& n : nodes)
            if (!with_succ.count(n.id)) out.push_back(n.id);
        return out;
    }

    std::vector<Edge> in_edges(int id) const {
        std::vector<Edge> out;
        for (const Edge& e : edges)
            if (e.to == id) out.push_back(e);
        return out;
    }

    void validate() const {
        for (const Edge& e : edges) {
            if (e.from >= e.to) throw state_error("subgraph edge violates node order");
            if (!has_node(e.from) || !has_node(e.to))
                throw state_error("subgraph edge references a missing node");
        }
        for (std::size_t i = 1; i < nodes.size(); ++i)
            if (nodes[i - 1].id >= nodes[i].id) throw state_error("subgraph nodes must be ascending");
    }

    bool operator==(const DagSubgraph&) const = default;
};

struct Hierarchy {
    std::vector<DagSubgraph> dags;
    Layer pool;
    bool operator==(const Hierarchy&) const = default;
};

struct ArchitectureSpec {
    NetTemplate tmpl = NetTemplate::cifar;
    double upscale_factor = 1.0;
    TensorShape input;
    int num_classes = 10;
    std::vector<Layer> stem;
    std::vector<Hierarchy> hierarchies;
    std::vector<Layer> head;
    std::map<std::string, TensorShape> shapes;  // filled by infer_shapes

    bool annotated() const { return !shapes.empty(); }

    const TensorShape& shape_of(const std::string& id) const {
        auto it = shapes.find(id);
        if (it == shapes.end()) throw state_error("no shape annotation for " + id);
        return it->second;
    }

    bool operator==(const ArchitectureSpec&) const = default;
};

// ---- subgraph extraction ----------------------------------------------------

namespace detail {

inline DagSubgraph make_subgraph(const Dag& dag, std::vector<Edge> edges) {
    std::sort(edges.begin(), edges.end());
    DagSubgraph sub;
    sub.dag_index = dag.index();
    sub.edges = std::move(edges);
    std::set<int> active;
    for (const Edge& e : sub.edges) {
        active.insert(e.from);
        active.insert(e.to);
    }
    for (int id : active) sub.nodes.push_back({id, dag.node_op(id)});
    sub.validate();
    return sub;
}

}  // namespace detail

// Keeps every edge whose weight is >= level. Never empties a normalized DAG:
// the max-weight edge sits at 1.0 and every level is at most 1.0.
inline std::vector<DagSubgraph> prune(const MetaGraph& meta, double level) {
    if (!(level >= 0.0 && level <= 1.0)) throw range_error("pruning level must be in [0,1]");
    std::vector<DagSubgraph> out;
    out.reserve(meta.dags().size());
    for (const Dag& dag : meta.dags()) {
        std::vector<Edge> kept;
        dag.for_each_edge([&](int i, int j, std::size_t idx) {
            if (dag.weights()[idx] >= level) kept.push_back({i, j});
        });
        out.push_back(detail::make_subgraph(dag, std::move(kept)));
    }
    return out;
}

inline std::vector<DagSubgraph> subgraphs_from_sample(const MetaGraph& meta,
                                                      const SampledGraphSet& sampled) {
    if (sampled.dags.size() != meta.dags().size())
        throw state_error("sample covers a different number of DAGs");
    std::vector<DagSubgraph> out;
    out.reserve(sampled.dags.size());
    for (std::size_t k = 0; k < sampled.dags.size(); ++k)
        out.push_back(detail::make_subgraph(meta.dags()[k], sampled.dags[k].edges));
    return out;
}

// Scales every node's output channel count by factor, rounding to the nearest
// integer with a floor of one filter. Structure is untouched.
inline std::vector<DagSubgraph> upscale_channels(std::vector<DagSubgraph> subgraphs,
                                                 double factor) {
    if (!(factor >= 1.0)) throw range_error("up-scaling factor must be >= 1");
    for (auto& sub : subgraphs)
        for (auto& node : sub.nodes)
            node.op.filters = std::max(1, static_cast<int>(std::lround(node.op.filters * factor)));
    return subgraphs;
}

// ---- assembly ---------------------------------------------------------------

namespace detail {

inline Layer make_pool(const std::string& name) {
    Layer pool;
    pool.kind = LayerKind::pool;
    pool.name = name;
    pool.kernel = 2;
    pool.stride = 2;
    return pool;
}

}  // namespace detail

// Lays out stem -> h hierarchies (m parallel subgraphs + 2x2/2 pooling) -> head.
// The imagenet template opens with 7x7/2 and 3x3/2 stem convolutions and closes
// with a 1x1 convolution to num_classes followed by global average pooling; the
// cifar template has no stem and closes with global average pooling and a dense
// classifier.
inline ArchitectureSpec assemble(const std::vector<DagSubgraph>& subgraphs, int hierarchy_count,
                                 NetTemplate tmpl, const TensorShape& input, int num_classes,
                                 double upscale_factor = 1.0) {
    input.validate();
    if (num_classes < 1) throw value_error("num_classes must be >= 1");
    if (hierarchy_count < 1) throw value_error("hierarchy count must be >= 1");
    if (subgraphs.empty() || subgraphs.size() % static_cast<std::size_t>(hierarchy_count) != 0)
        throw value_error("subgraph count must be a positive multiple of the hierarchy count");
    if (!(upscale_factor >= 1.0)) throw range_error("up-scaling factor must be >= 1");

    ArchitectureSpec spec;
    spec.tmpl = tmpl;
    spec.input = input;
    spec.num_classes = num_classes;
    spec.upscale_factor = upscale_factor;

    if (tmpl == NetTemplate::imagenet) {
        Layer conv1;
        conv1.kind = LayerKind::conv;
        conv1.name = "stem.0";
        conv1.kernel = 7;
        conv1.stride = 2;
        conv1.filters = 64;
        conv1.batch_norm = true;
        Layer conv2 = conv1;
        conv2.name = "stem.1";
        conv2.kernel = 3;
        spec.stem = {conv1, conv2};
    }

    // Every stride-2 layer must divide the running spatial dims exactly.
    int h_dim = input.height, w_dim = input.width;
    auto halve = [&](const std::string& layer_name) {
        if (h_dim % 2 != 0 || w_dim % 2 != 0 || h_dim < 2 || w_dim < 2)
            throw shape_error("spatial dims " + std::to_string(h_dim) + "x" +
                              std::to_string(w_dim) + " cannot be halved at " + layer_name);
        h_dim /= 2;
        w_dim /= 2;
    };
    for (const Layer& l : spec.stem) halve(l.name);

    const std::size_t per_hierarchy = subgraphs.size() / static_cast<std::size_t>(hierarchy_count);
    std::size_t next = 0;
    for (int hi = 0; hi < hierarchy_count; ++hi) {
        Hierarchy hierarchy;
        for (std::size_t j = 0; j < per_hierarchy; ++j) hierarchy.dags.push_back(subgraphs[next++]);
        hierarchy.pool = detail::make_pool("h" + std::to_string(hi) + ".pool");
        halve(hierarchy.pool.name);
        spec.hierarchies.push_back(std::move(hierarchy));
    }

    if (tmpl == NetTemplate::imagenet) {
        Layer conv;
        conv.kind = LayerKind::conv;
        conv.name = "head.conv";
        conv.kernel = 1;
        conv.filters = num_classes;
        conv.bias = true;
        Layer gap;
        gap.kind = LayerKind::global_pool;
        gap.name = "head.gap";
        Layer flatten;
        flatten.kind = LayerKind::flatten;
        flatten.name = "head.flatten";
        spec.head = {conv, gap, flatten};
    } else {
        Layer gap;
        gap.kind = LayerKind::global_pool;
        gap.name = "head.gap";
        Layer flatten;
        flatten.kind = LayerKind::flatten;
        flatten.name = "head.flatten";
        Layer dense;
        dense.kind = LayerKind::dense;
        dense.name = "head.dense";
        dense.filters = num_classes;
        dense.bias = true;
        spec.head = {gap, flatten, dense};
    }
    return spec;
}

// ---- shape inference ----------------------------------------------------------

namespace detail {

inline std::string node_id(int hierarchy, int dag, int node) {
    return "h" + std::to_string(hierarchy) + ".d" + std::to_string(dag) + ".n" +
           std::to_string(node);
}

inline std::string dag_out_id(int hierarchy, int dag) {
    return "h" + std::to_string(hierarchy) + ".d" + std::to_string(dag) + ".out";
}

}  // namespace detail

// Annotates every layer and node with its output shape. Node convolutions use
// SAME padding and stride 1, so all summed inputs of a node share one spatial
// size and the node output is (H, W, filters). Sink outputs concatenate per
// DAG, DAG outputs concatenate per hierarchy, and a hierarchy whose subgraphs
// are all empty passes its input through unchanged.
inline ArchitectureSpec infer_shapes(ArchitectureSpec spec, const TensorShape& input) {
    input.validate();
    spec.input = input;
    spec.shapes.clear();
    spec.shapes["input"] = input;

    TensorShape cur = input;
    for (const Layer& l : spec.stem) {
        if (l.stride > 1 && (cur.height % l.stride != 0 || cur.width % l.stride != 0))
            throw shape_error("input spatial dims not divisible at " + l.name);
        cur = {cur.height / l.stride, cur.width / l.stride, l.filters};
        cur.validate();
        spec.shapes[l.name] = cur;
    }

    for (std::size_t hi = 0; hi < spec.hierarchies.size(); ++hi) {
        auto& hierarchy = spec.hierarchies[hi];
        spec.shapes["h" + std::to_string(hi) + ".in"] = cur;
        const bool all_empty = std::all_of(hierarchy.dags.begin(), hierarchy.dags.end(),
                                           [](const DagSubgraph& d) { return d.empty_graph(); });
        int concat_channels = 0;
        for (std::size_t dj = 0; dj < hierarchy.dags.size(); ++dj) {
            const DagSubgraph& sub = hierarchy.dags[dj];
            sub.validate();
            if (sub.empty_graph()) {
                spec.shapes[detail::dag_out_id(static_cast<int>(hi), static_cast<int>(dj))] = cur;
                concat_channels += cur.channels;
                continue;
            }
            int dag_out = 0;
            for (const DagNode& node : sub.nodes) {
                const TensorShape node_shape{cur.height, cur.width, node.op.filters};
                node_shape.validate();
                spec.shapes[detail::node_id(static_cast<int>(hi), static_cast<int>(dj), node.id)] =
                    node_shape;
            }
            for (int sink : sub.sinks()) dag_out += sub.op_of(sink).filters;
            spec.shapes[detail::dag_out_id(static_cast<int>(hi), static_cast<int>(dj))] = {
                cur.height, cur.width, dag_out};
            concat_channels += dag_out;
        }
        // All-empty hierarchy: identical identity copies collapse to one.
        if (all_empty) concat_channels = cur.channels;
        cur = {cur.height, cur.width, concat_channels};
        spec.shapes["h" + std::to_string(hi) + ".concat"] = cur;

        if (cur.height % 2 != 0 || cur.width % 2 != 0 || cur.height < 2 || cur.width < 2)
            throw shape_error("input too small to pool at " + hierarchy.pool.name);
        cur = {cur.height / 2, cur.width / 2, cur.channels};
        spec.shapes[hierarchy.pool.name] = cur;
    }

    for (const Layer& l : spec.head) {
        switch (l.kind) {
            case LayerKind::conv:
                cur = {cur.height, cur.width, l.filters};
                break;
            case LayerKind::global_pool:
                cur = {1, 1, cur.channels};
                break;
            case LayerKind::flatten:
                cur = {1, 1, cur.channels};
                break;
            case LayerKind::dense:
                cur = {1, 1, l.filters};
                break;
            case LayerKind::pool:
                throw state_error("fixed pooling is not a head layer");
        }
        cur.validate();
        spec.shapes[l.name] = cur;
    }
    spec.shapes["output"] = {1, 1, cur.channels};
    return spec;
}

inline ArchitectureSpec infer_shapes(const ArchitectureSpec& spec) {
    return infer_shapes(spec, spec.input);
}

// ---- JSON export/import -------------------------------------------------------

inline constexpr int kArchitectureVersion = 1;

namespace detail {

inline nlohmann::json layer_to_json(const Layer& l) {
    return {
        {"name", l.name},         {"kind", std::string(to_string(l.kind))},
        {"kernel", l.kernel},     {"stride", l.stride},
        {"filters", l.filters},   {"batch_norm", l.batch_norm},
        {"bias", l.bias},
    };
}

inline Layer layer_from_json(const nlohmann::json& j) {
    Layer l;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv") l.kind = LayerKind::conv;
    else if (kind == "pool") l.kind = LayerKind::pool;
    else if (kind == "global_pool") l.kind = LayerKind::global_pool;
    else if (kind == "flatten") l.kind = LayerKind::flatten;
    else if (kind == "dense") l.kind = LayerKind::dense;
    else throw schema_error("unknown layer kind: " + kind);
    l.name = j.at("name").get<std::string>();
    l.kernel = j.at("kernel").get<int>();
    l.stride = j.at("stride").get<int>();
    l.filters = j.at("filters").get<int>();
    l.batch_norm = j.at("batch_norm").get<bool>();
    l.bias = j.at("bias").get<bool>();
    return l;
}

}  // namespace detail

inline nlohmann::json export_json(const ArchitectureSpec& spec) {
    if (!spec.annotated()) throw state_error("export requires a shape-annotated spec");
    nlohmann::json stem = nlohmann::json::array();
    for (const Layer& l : spec.stem) stem.push_back(detail::layer_to_json(l));
    nlohmann::json head = nlohmann::json::array();
    for (const Layer& l : spec.head) head.push_back(detail::layer_to_json(l));

    nlohmann::json hierarchies = nlohmann::json::array();
    for (const auto& hierarchy : spec.hierarchies) {
        nlohmann::json dags = nlohmann::json::array();
        for (const auto& sub : hierarchy.dags) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& node : sub.nodes)
                nodes.push_back({{"id", node.id},
                                 {"op", std::string(to_string(node.op.kind))},
                                 {"filters", node.op.filters}});
            nlohmann::json edges = nlohmann::json::array();
            for (const Edge& e : sub.edges) edges.push_back({e.from, e.to});
            dags.push_back({{"index", sub.dag_index}, {"nodes", nodes}, {"edges", edges}});
        }
        hierarchies.push_back({{"dags", dags}, {"pool", "pool2x2/2"}});
    }

    nlohmann::json shapes = nlohmann::json::object();
    for (const auto& [id, shape] : spec.shapes)
        shapes[id] = {shape.height, shape.width, shape.channels};

    return {
        {"version", kArchitectureVersion},
        {"template", std::string(to_string(spec.tmpl))},
        {"upscale_factor", spec.upscale_factor},
        {"input", {spec.input.height, spec.input.width, spec.input.channels}},
        {"num_classes", spec.num_classes},
        {"stem", stem},
        {"hierarchies", hierarchies},
        {"head", head},
        {"shapes", shapes},
    };
}

inline ArchitectureSpec import_architecture(const nlohmann::json& doc) {
    try {
        const int version = doc.at("version").get<int>();
        if (version != kArchitectureVersion)
            throw version_error("unsupported architecture version " + std::to_string(version));
        ArchitectureSpec spec;
        spec.tmpl = parse_template(doc.at("template").get<std::string>());
        spec.upscale_factor = doc.at("upscale_factor").get<double>();
        const auto& in = doc.at("input");
        spec.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
        spec.num_classes = doc.at("num_classes").get<int>();
        for (const auto& lj : doc.at("stem")) spec.stem.push_back(detail::layer_from_json(lj));
        for (const auto& lj : doc.at("head")) spec.head.push_back(detail::layer_from_json(lj));
        int hi = 0;
        for (const auto& hj : doc.at("hierarchies")) {
            Hierarchy hierarchy;
            for (const auto& dj : hj.at("dags")) {
                DagSubgraph sub;
                sub.dag_index = dj.at("index").get<int>();
                for (const auto& nj : dj.at("nodes")) {
                    NodeOp op;
                    const std::string kind = nj.at("op").get<std::string>();
                    if (kind == "conv1x1") op.kind = ConvKind::conv1x1;
                    else if (kind == "conv3x3") op.kind = ConvKind::conv3x3;
                    else throw schema_error("unknown node op kind: " + kind);
                    op.filters = nj.at("filters").get<int>();
                    sub.nodes.push_back({nj.at("id").get<int>(), op});
                }
                for (const auto& ej : dj.at("edges"))
                    sub.edges.push_back({ej.at(0).get<int>(), ej.at(1).get<int>()});
                sub.validate();
                hierarchy.dags.push_back(std::move(sub));
            }
            hierarchy.pool = detail::make_pool("h" + std::to_string(hi) + ".pool");
            spec.hierarchies.push_back(std::move(hierarchy));
            ++hi;
        }
        for (const auto& [id, sj] : doc.at("shapes").items())
            spec.shapes[id] = {sj.at(0).get<int>(), sj.at(1).get<int>(), sj.at(2).get<int>()};
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("architecture schema mismatch: ") + e.what());
    }
}

// ---- DOT export ---------------------------------------------------------------

namespace detail {

inline std::string dot_name(const std::string& id) {
    std::string out = id;
    std::replace(out.begin(), out.end(), '.', '_');
    return out;
}

}  // namespace detail

// Graphviz rendering: one cluster per hierarchy, one sub-cluster per DAG,
// nodes labeled op/filters/shape.
inline std::string export_dot(const ArchitectureSpec& spec) {
    if (!spec.annotated()) throw state_error("export requires a shape-annotated spec");
    std::ostringstream os;
    os << "digraph gram {\n";
    os << "  rankdir=TB;\n";
    os << "  node [shape=box, fontname=\"Helvetica\"];\n";
    os << "  input [label=\"input\\n" << spec.input.to_string() << "\"];\n";

    std::string prev = "input";
    for (const Layer& l : spec.stem) {
        const std::string id = detail::dot_name(l.name);
        os << "  " << id << " [label=\"conv" << l.kernel << "x" << l.kernel << "/" << l.filters
           << " s" << l.stride << "\\n" << spec.shape_of(l.name).to_string() << "\"];\n";
        os << "  " << prev << " -> " << id << ";\n";
        prev = id;
    }

    for (std::size_t hi = 0; hi < spec.hierarchies.size(); ++hi) {
        const auto& hierarchy = spec.hierarchies[hi];
        const std::string hname = "h" + std::to_string(hi);
        os << "  subgraph cluster_" << hname << " {\n";
        os << "    label=\"hierarchy " << hi << "\";\n";
        for (std::size_t dj = 0; dj < hierarchy.dags.size(); ++dj) {
            const auto& sub = hierarchy.dags[dj];
            const std::string dname = hname + "_d" + std::to_string(dj);
            os << "    subgraph cluster_" << dname << " {\n";
            os << "      label=\"dag " << sub.dag_index << "\";\n";
            if (sub.empty_graph()) {
                os << "      " << dname << "_identity [label=\"identity\\n"
                   << spec.shape_of(detail::dag_out_id(static_cast<int>(hi), static_cast<int>(dj)))
                          .to_string()
                   << "\"];\n";
            } else {
                for (const DagNode& node : sub.nodes) {
                    const std::string sid = detail::node_id(static_cast<int>(hi),
                                                            static_cast<int>(dj), node.id);
                    os << "      " << detail::dot_name(sid) << " [label=\"" << node.op.to_string()
                       << "\\n" << spec.shape_of(sid).to_string() << "\"];\n";
                }
                for (const Edge& e : sub.edges)
                    os << "      "
                       << detail::dot_name(detail::node_id(static_cast<int>(hi),
                                                           static_cast<int>(dj), e.from))
                       << " -> "
                       << detail::dot_name(detail::node_id(static_cast<int>(hi),
                                                           static_cast<int>(dj), e.to))
                       << ";\n";
            }
            os << "    }\n";
        }
        os << "    " << hname << "_concat [label=\"concat\\n"
           << spec.shape_of(hname + ".concat").to_string() << "\"];\n";
        os << "    " << hname << "_pool [label=\"pool2x2/2\\n"
           << spec.shape_of(hname + ".pool").to_string() << "\"];\n";
        os << "  }\n";

        // Wiring: previous output feeds sources (or the identity), sinks feed concat.
        for (std::size_t dj = 0; dj < hierarchy.dags.size(); ++dj) {
            const auto& sub = hierarchy.dags[dj];
            const std::string dname = hname + "_d" + std::to_string(dj);
            if (sub.empty_graph()) {
                os << "  " << prev << " -> " << dname << "_identity;\n";
                os << "  " << dname << "_identity -> " << hname << "_concat;\n";
                continue;
            }
            for (int src : sub.sources())
                os << "  " << prev << " -> "
                   << detail::dot_name(detail::node_id(static_cast<int>(hi), static_cast<int>(dj), src))
                   << ";\n";
            for (int sink : sub.sinks())
                os << "  "
                   << detail::dot_name(detail::node_id(static_cast<int>(hi), static_cast<int>(dj), sink))
                   << " -> " << hname << "_concat;\n";
        }
        os << "  " << hname << "_concat -> " << hname << "_pool;\n";
        prev = hname + "_pool";
    }

    for (const Layer& l : spec.head) {
        const std::string id = detail::dot_name(l.name);
        std::string label;
        switch (l.kind) {
            case LayerKind::conv:
                label = "conv" + std::to_string(l.kernel) + "x" + std::to_string(l.kernel) + "/" +
                        std::to_string(l.filters);
                break;
            case LayerKind::global_pool: label = "global_avg_pool"; break;
            case LayerKind::flatten: label = "flatten"; break;
            case LayerKind::dense: label = "dense/" + std::to_string(l.filters); break;
            case LayerKind::pool: label = "pool"; break;
        }
        os << "  " << id << " [label=\"" << label << "\\n" << spec.shape_of(l.name).to_string()
           << "\"];\n";
        os << "  " << prev << " -> " << id << ";\n";
        prev = id;
    }
    os << "}\n";
    return os.str();
}

}  // namespace gram
