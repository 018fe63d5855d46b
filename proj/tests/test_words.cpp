#include <doctest.h>

#include <cmath>
#include <vector>

#include "rdslab/words.hpp"

using namespace rdslab;

TEST_CASE("identical (seed, stream) reproduce identical symbols") {
    const WordStream a(0xDEADBEEF, 42, 5);
    const WordStream b(0xDEADBEEF, 42, 5);
    for (std::uint64_t i = 0; i < 10000; ++i) CHECK(a.symbol(i) == b.symbol(i));
}

TEST_CASE("m = 1 gives the constant symbol 0 and m = 0 throws") {
    const WordStream ws(1, 2, 1);
    for (std::uint64_t i = 0; i < 64; ++i) CHECK(ws.symbol(i) == 0);
    CHECK_THROWS_AS(WordStream(1, 2, 0), std::invalid_argument);
}

TEST_CASE("binomial frequency within 3 sigma for m = 2") {
    const WordStream ws(1234567, 89, 2);
    const std::size_t N = 1000000;
    std::size_t zeros = 0;
    for (std::uint64_t i = 0; i < N; ++i)
        if (ws.symbol(i) == 0) ++zeros;
    const double freq = static_cast<double>(zeros) / static_cast<double>(N);
    const double sigma = 0.5 / std::sqrt(static_cast<double>(N));
    CHECK(std::fabs(freq - 0.5) <= 3.0 * sigma);
}

TEST_CASE("every symbol frequency within 3 sigma for m = 5") {
    const unsigned m = 5;
    const WordStream ws(77, 3, m);
    const std::size_t N = 1000000;
    std::vector<std::size_t> counts(m, 0);
    for (std::uint64_t i = 0; i < N; ++i) counts[ws.symbol(i)]++;
    const double p = 1.0 / m;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(N));
    for (unsigned s = 0; s < m; ++s) {
        const double freq = static_cast<double>(counts[s]) / N;
        CHECK(std::fabs(freq - p) <= 3.0 * sigma);
    }
}

TEST_CASE("shift increments the index offset") {
    const WordStream ws(9, 9, 3);
    const auto sh = ws.shifted(7);
    for (std::uint64_t i = 0; i < 100; ++i) CHECK(sh.symbol(i) == ws.symbol(i + 7));
}
