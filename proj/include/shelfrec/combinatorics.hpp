#pragma once
// Exact counting of product-quantity assignments with a small arbitrary-precision integer.

#include <cstdint>
#include <string>
#include <vector>

namespace shelfrec::combinatorics {

// Non-negative integer stored as base-1e9 limbs, least significant first.
class BigUInt {
public:
    BigUInt() = default;
    explicit BigUInt(std::uint64_t v);

    BigUInt& operator*=(std::uint32_t m);
    // Exact division; throws ArgumentError when m does not divide the value.
    BigUInt& divide_exact(std::uint32_t m);
    std::uint32_t remainder(std::uint32_t m) const;

    std::string to_string() const;
    double to_double() const;
    bool operator==(const BigUInt&) const = default;

private:
    std::vector<std::uint32_t> limbs_;  // empty means zero
};

// C(n, k)
BigUInt binomial(std::uint32_t n, std::uint32_t k);

// Number of ways to fill m slots from p products with repetition: C(p + m - 1, m).
BigUInt assortment_count(std::uint32_t p, std::uint32_t m);

}  // namespace shelfrec::combinatorics
