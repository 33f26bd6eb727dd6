#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "gram/errors.hpp"

namespace gram {

// Deterministic random source. Raw mt19937_64 output is mapped to doubles and
// bounded integers here instead of going through std distributions, whose
// algorithms are implementation-defined; this keeps seeded streams identical
// across standard libraries and lets checkpoints capture the exact stream
// position.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on {0, ..., n-1}.
    std::uint64_t next_index(std::uint64_t n) {
        if (n == 0) throw range_error("next_index: n must be positive");
        ++draws_;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    // Count of logical draws so far; used for sample provenance.
    std::uint64_t draws() const { return draws_; }

    std::string save_state() const {
        std::ostringstream oss;
        oss << draws_ << ' ' << engine_;
        return oss.str();
    }

    static Rng restore(const std::string& state) {
        Rng r;
        std::istringstream iss(state);
        iss >> r.draws_ >> r.engine_;
        if (iss.fail()) throw schema_error("rng state string is not parseable");
        return r;
    }

    bool operator==(const Rng& other) const {
        return draws_ == other.draws_ && engine_ == other.engine_;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

}  // namespace gram
