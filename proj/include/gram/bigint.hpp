#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gram/errors.hpp"

namespace gram {

// Minimal unsigned big integer: just enough exact arithmetic for counting
// combinatorial search spaces. Limbs are base-1e9, little-endian.
class BigUint {
    static constexpr std::uint64_t kBase = 1000000000ULL;

public:
    BigUint() = default;

    BigUint(std::uint64_t v) {  // NOLINT: implicit by design
        while (v > 0) {
            limbs_.push_back(static_cast<std::uint32_t>(v % kBase));
            v /= kBase;
        }
    }

    bool is_zero() const { return limbs_.empty(); }

    BigUint& operator+=(const BigUint& other) {
        if (limbs_.size() < other.limbs_.size()) limbs_.resize(other.limbs_.size(), 0);
        std::uint64_t carry = 0;
        for (std::size_t i = 0; i < limbs_.size(); ++i) {
            std::uint64_t cur = carry + limbs_[i];
            if (i < other.limbs_.size()) cur += other.limbs_[i];
            limbs_[i] = static_cast<std::uint32_t>(cur % kBase);
            carry = cur / kBase;
        }
        if (carry > 0) limbs_.push_back(static_cast<std::uint32_t>(carry));
        return *this;
    }

    friend BigUint operator+(BigUint a, const BigUint& b) { return a += b; }

    friend BigUint operator*(const BigUint& a, const BigUint& b) {
        if (a.is_zero() || b.is_zero()) return BigUint{};
        BigUint out;
        out.limbs_.assign(a.limbs_.size() + b.limbs_.size(), 0);
        for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
            std::uint64_t carry = 0;
            for (std::size_t j = 0; j < b.limbs_.size(); ++j) {
                std::uint64_t cur = out.limbs_[i + j] + carry +
                                    static_cast<std::uint64_t>(a.limbs_[i]) * b.limbs_[j];
                out.limbs_[i + j] = static_cast<std::uint32_t>(cur % kBase);
                carry = cur / kBase;
            }
            std::size_t pos = i + b.limbs_.size();
            while (carry > 0) {
                std::uint64_t cur = out.limbs_[pos] + carry;
                out.limbs_[pos] = static_cast<std::uint32_t>(cur % kBase);
                carry = cur / kBase;
                ++pos;
            }
        }
        out.trim();
        return out;
    }

    BigUint& mul_small(std::uint32_t f) {
        if (f == 0 || is_zero()) {
            limbs_.clear();
            return *this;
        }
        std::uint64_t carry = 0;
        for (auto& limb : limbs_) {
            std::uint64_t cur = static_cast<std::uint64_t>(limb) * f + carry;
            limb = static_cast<std::uint32_t>(cur % kBase);
            carry = cur / kBase;
        }
        while (carry > 0) {
            limbs_.push_back(static_cast<std::uint32_t>(carry % kBase));
            carry /= kBase;
        }
        return *this;
    }

    // Exact division by a small divisor; the remainder must be zero.
    BigUint& div_small_exact(std::uint32_t d) {
        if (d == 0) throw range_error("division by zero");
        std::uint64_t rem = 0;
        for (std::size_t i = limbs_.size(); i-- > 0;) {
            std::uint64_t cur = rem * kBase + limbs_[i];
            limbs_[i] = static_cast<std::uint32_t>(cur / d);
            rem = cur % d;
        }
        if (rem != 0) throw value_error("div_small_exact: not divisible");
        trim();
        return *this;
    }

    BigUint pow(std::uint64_t e) const {
        BigUint result(1);
        BigUint base = *this;
        while (e > 0) {
            if (e & 1) result = result * base;
            e >>= 1;
            if (e > 0) base = base * base;
        }
        return result;
    }

    std::string to_string() const {
        if (is_zero()) return "0";
        std::string s = std::to_string(limbs_.back());
        char buf[10];
        for (std::size_t i = limbs_.size() - 1; i-- > 0;) {
            std::snprintf(buf, sizeof(buf), "%09u", limbs_[i]);
            s += buf;
        }
        return s;
    }

    // Base-10 logarithm; -inf for zero.
    double log10() const {
        if (is_zero()) return -HUGE_VAL;
        const std::string s = to_string();
        const std::size_t lead = std::min<std::size_t>(s.size(), 17);
        const double frac = std::stod("0." + s.substr(0, lead));
        return static_cast<double>(s.size()) + std::log10(frac);
    }

    bool operator==(const BigUint& other) const = default;

private:
    void trim() {
        while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
    }

    std::vector<std::uint32_t> limbs_;
};

// Exact binomial coefficient; zero when k > n.
inline BigUint binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return BigUint{};
    if (k > n - k) k = n - k;
    BigUint c(1);
    for (std::uint64_t i = 1; i <= k; ++i) {
        c.mul_small(static_cast<std::uint32_t>(n - k + i));
        c.div_small_exact(static_cast<std::uint32_t>(i));
    }
    return c;
}

}  // namespace gram
