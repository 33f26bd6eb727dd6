#pragma once

#include <string>
#include <vector>

#include "gram/errors.hpp"

namespace gram {

enum class ConvKind { conv1x1, conv3x3 };

inline const char* to_string(ConvKind k) {
    return k == ConvKind::conv1x1 ? "conv1x1" : "conv3x3";
}

// Operation assigned to a DAG node: a convolution with a fixed output channel
// count, implicitly followed by batch normalization and ELU.
struct NodeOp {
    ConvKind kind = ConvKind::conv1x1;
    int filters = 0;

    int kernel() const { return kind == ConvKind::conv1x1 ? 1 : 3; }

    std::string to_string() const {
        return std::string(gram::to_string(kind)) + "/" + std::to_string(filters);
    }

    // Parses "conv3x3/32" style strings.
    static NodeOp parse(const std::string& s) {
        const auto slash = s.find('/');
        if (slash == std::string::npos) throw value_error("node op must look like conv3x3/32: " + s);
        const std::string kind_str = s.substr(0, slash);
        NodeOp op;
        if (kind_str == "conv1x1") {
            op.kind = ConvKind::conv1x1;
        } else if (kind_str == "conv3x3") {
            op.kind = ConvKind::conv3x3;
        } else {
            throw value_error("unknown op kind: " + kind_str);
        }
        try {
            op.filters = std::stoi(s.substr(slash + 1));
        } catch (const std::exception&) {
            throw value_error("bad filter count in node op: " + s);
        }
        if (op.filters < 1) throw value_error("node op filters must be >= 1: " + s);
        return op;
    }

    bool operator==(const NodeOp&) const = default;
};

// 1x1 convolutions with 32/64/128 filters and 3x3 convolutions with 32/64.
inline std::vector<NodeOp> default_op_palette() {
    return {
        {ConvKind::conv1x1, 32}, {ConvKind::conv1x1, 64}, {ConvKind::conv1x1, 128},
        {ConvKind::conv3x3, 32}, {ConvKind::conv3x3, 64},
    };
}

}  // namespace gram
