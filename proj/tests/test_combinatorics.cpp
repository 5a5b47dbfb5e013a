#include <doctest.h>

#include <gmpxx.h>

#include "gen.hpp"
#include "shelfrec/combinatorics.hpp"

using namespace shelfrec;
using namespace shelfrec::combinatorics;

TEST_SUITE_BEGIN("combinatorics");

namespace {

std::string gmp_binomial(unsigned long n, unsigned long k) {
    mpz_class r;
    mpz_bin_uiui(r.get_mpz_t(), n, k);
    return r.get_str();
}

}  // namespace

TEST_CASE("binomials against GMP") {
    CHECK(binomial(119, 20).to_string() == "24551856075980529765105");
    CHECK(binomial(119, 20).to_string() == gmp_binomial(119, 20));
    CHECK(binomial(100, 50).to_string() == gmp_binomial(100, 50));
    CHECK(binomial(0, 0).to_string() == "1");
    CHECK(binomial(5, 7).to_string() == "0");
    CHECK(binomial(10, 10).to_string() == "1");
    Rng rng(4);
    for (int i = 0; i < 300; ++i) {
        const auto n = static_cast<std::uint32_t>(gen::int_in(rng, 0, 400));
        const auto k = static_cast<std::uint32_t>(gen::int_in(rng, 0, static_cast<int>(n) + 2));
        CHECK(binomial(n, k).to_string() == gmp_binomial(n, k));
    }
}

TEST_CASE("assortment count is stars and bars") {
    CHECK(assortment_count(100, 20) == binomial(119, 20));
    CHECK(assortment_count(1, 8).to_string() == "1");
    CHECK(assortment_count(3, 2).to_string() == "6");
    CHECK(assortment_count(100, 20).to_double() == doctest::Approx(2.4551856075980529765105e22));
}

TEST_CASE("arithmetic") {
    BigUInt x(1000000000ULL);
    x *= 1000000000u;
    CHECK(x.to_string() == "1000000000000000000");
    CHECK(x.remainder(7) == static_cast<std::uint32_t>(1000000000000000000ULL % 7));
    x.divide_exact(1000u);
    CHECK(x.to_string() == "1000000000000000");
    CHECK_THROWS_AS(x.divide_exact(7), ArgumentError);
    CHECK(BigUInt().to_string() == "0");
    CHECK(BigUInt(0).to_string() == "0");
    BigUInt z(5);
    z *= 0;
    CHECK(z == BigUInt());
}

TEST_SUITE_END();
