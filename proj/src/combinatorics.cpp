#include "shelfrec/combinatorics.hpp"

#include <algorithm>
#include <cmath>

#include "shelfrec/common.hpp"

namespace shelfrec::combinatorics {

namespace {
constexpr std::uint32_t kBase = 1000000000u;
}

BigUInt::BigUInt(std::uint64_t v) {
    while (v > 0) {
        limbs_.push_back(static_cast<std::uint32_t>(v % kBase));
        v /= kBase;
    }
}

BigUInt& BigUInt::operator*=(std::uint32_t m) {
    if (m == 0) {
        limbs_.clear();
        return *this;
    }
    std::uint64_t carry = 0;
    for (auto& l : limbs_) {
        const std::uint64_t cur = static_cast<std::uint64_t>(l) * m + carry;
        l = static_cast<std::uint32_t>(cur % kBase);
        carry = cur / kBase;
    }
    while (carry > 0) {
        limbs_.push_back(static_cast<std::uint32_t>(carry % kBase));
        carry /= kBase;
    }
    return *this;
}

std::uint32_t BigUInt::remainder(std::uint32_t m) const {
    if (m == 0) throw ArgumentError("BigUInt: division by zero");
    std::uint64_t rem = 0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) rem = (rem * kBase + *it) % m;
    return static_cast<std::uint32_t>(rem);
}

BigUInt& BigUInt::divide_exact(std::uint32_t m) {
    if (m == 0) throw ArgumentError("BigUInt: division by zero");
    std::uint64_t rem = 0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) {
        const std::uint64_t cur = rem * kBase + *it;
        *it = static_cast<std::uint32_t>(cur / m);
        rem = cur % m;
    }
    if (rem != 0) throw ArgumentError("BigUInt: inexact division");
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
    return *this;
}

std::string BigUInt::to_string() const {
    if (limbs_.empty()) return "0";
    std::string out = std::to_string(limbs_.back());
    for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
        std::string part = std::to_string(*it);
        out += std::string(9 - part.size(), '0') + part;
    }
    return out;
}

double BigUInt::to_double() const {
    double v = 0.0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) v = v * kBase + *it;
    return v;
}

BigUInt binomial(std::uint32_t n, std::uint32_t k) {
    if (k > n) return BigUInt(0);
    k = std::min(k, n - k);
    BigUInt r(1);
    // after step i the value is C(n - k + i, i), always an integer
    for (std::uint32_t i = 1; i <= k; ++i) {
        r *= (n - k + i);
        r.divide_exact(i);
    }
    return r;
}

BigUInt assortment_count(std::uint32_t p, std::uint32_t m) {
    if (p == 0) return BigUInt(m == 0 ? 1 : 0);
    return binomial(p + m - 1, m);
}

}  // namespace shelfrec::combinatorics
