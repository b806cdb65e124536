#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "zico/rng.hpp"

using namespace zico;

TEST_CASE("rng same seed gives identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("rng different seeds diverge") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("rng copy replays the stream including the normal cache") {
    Rng a(7);
    a.normal(); // leaves one cached value behind
    Rng b = a;
    for (int i = 0; i < 50; ++i) CHECK(a.normal() == b.normal());
    for (int i = 0; i < 50; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) and has a sane mean") {
    Rng rng(3);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform_int covers its range uniformly") {
    Rng rng(11);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const int v = rng.uniform_int(7);
        REQUIRE(v >= 0);
        REQUIRE(v < 7);
        ++counts[size_t(v)];
    }
    // each bucket expects 10000 draws, sd ~ 92.5, so 500 is > 5 sigma
    for (const int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("normal has mean 0 variance 1") {
    Rng rng(5);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sign is +-1 in near-equal proportion") {
    Rng rng(9);
    int pos = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double s = rng.sign();
        REQUIRE((s == 1.0 || s == -1.0));
        if (s > 0) ++pos;
    }
    CHECK(std::abs(pos - n / 2) < 250);
}

TEST_CASE("permutation is a valid permutation and varies with seed") {
    Rng rng(13);
    const auto p = rng.permutation(50);
    REQUIRE(p.size() == 50);
    std::set<int> seen(p.begin(), p.end());
    CHECK(seen.size() == 50);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 49);

    Rng other(14);
    CHECK(other.permutation(50) != p);
}

TEST_CASE("derive_seed is stable and label-sensitive") {
    const uint64_t a = derive_seed(42, "alpha");
    CHECK(a == derive_seed(42, "alpha"));
    CHECK(a != derive_seed(42, "beta"));
    CHECK(a != derive_seed(43, "alpha"));

    const uint64_t i0 = derive_seed(42, uint64_t(0));
    CHECK(i0 == derive_seed(42, uint64_t(0)));
    CHECK(i0 != derive_seed(42, uint64_t(1)));
}

TEST_CASE("derive_seed spreads near-identical labels") {
    std::set<uint64_t> children;
    for (uint64_t i = 0; i < 1000; ++i) children.insert(derive_seed(0, i));
    CHECK(children.size() == 1000);
}
