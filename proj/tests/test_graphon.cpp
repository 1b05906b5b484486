#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "skir/graphon.hpp"
#include "support.hpp"

using namespace skir;
using skir::test::age_graphon;

TEST_CASE("eval_graphon reference values") {
    CHECK(eval_graphon(ConstantGraphon{0.8}, 0.3, 0.7) == 0.8);
    CHECK(eval_graphon(PowerLawGraphon{1.0, -1.0}, 0.5, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    // 18-29 block is [0, 0.25), 65+ block is [0.75, 1].
    CHECK(eval_graphon(age_graphon(), 0.1, 0.9) == 0.7);
    CHECK(eval_graphon(age_graphon(), 0.9, 0.1) == 0.7);
    CHECK(eval_graphon(age_graphon(), 1.0, 1.0) == 0.8);
}

TEST_CASE("power law kernel is clamped into [0, 1]") {
    const PowerLawGraphon g{2.0, 0.5};  // c / sqrt(xy), unbounded near 0
    CHECK(eval_graphon(g, 0.0, 0.0) == 1.0);
    CHECK(eval_graphon(g, 1e-9, 0.3) == 1.0);
    CHECK(eval_graphon(PowerLawGraphon{0.5, 0.5}, 1.0, 1.0) == doctest::Approx(0.5));
    CHECK(eval_graphon(PowerLawGraphon{1.0, -1.0}, 0.0, 0.7) == doctest::Approx(kIndexFloor * 0.7));
}

TEST_CASE("eval_graphon rejects indices outside the unit interval") {
    CHECK_THROWS_AS(eval_graphon(ConstantGraphon{0.5}, -0.01, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(eval_graphon(ConstantGraphon{0.5}, 0.5, 1.01), std::invalid_argument);
    CHECK_THROWS_AS(eval_graphon(age_graphon(), std::nan(""), 0.5), std::invalid_argument);
}

TEST_CASE("graphon validation") {
    CHECK_NOTHROW(validate(GraphonSpec{age_graphon()}));
    CHECK_THROWS_AS(validate(GraphonSpec{ConstantGraphon{1.5}}), std::invalid_argument);
    CHECK_THROWS_AS(validate(GraphonSpec{PowerLawGraphon{0.0, -1.0}}), std::invalid_argument);
    PiecewiseGraphon asym{{0.5, 0.5}, {1.0, 0.2, 0.3, 1.0}};
    CHECK_THROWS_AS(validate(GraphonSpec{asym}), std::invalid_argument);
    PiecewiseGraphon bad_sum{{0.5, 0.4}, {1.0, 0.2, 0.2, 1.0}};
    CHECK_THROWS_AS(validate(GraphonSpec{bad_sum}), std::invalid_argument);
    PiecewiseGraphon bad_entry{{0.5, 0.5}, {1.0, 1.2, 1.2, 1.0}};
    CHECK_THROWS_AS(validate(GraphonSpec{bad_entry}), std::invalid_argument);
    PiecewiseGraphon bad_shape{{0.5, 0.5}, {1.0, 0.2, 0.2}};
    CHECK_THROWS_AS(validate(GraphonSpec{bad_shape}), std::invalid_argument);
}

TEST_CASE("sample_population examples") {
    SUBCASE("constant kernel gives an all-ones matrix") {
        const auto pop = sample_population(ConstantGraphon{1.0}, 3, 42, SamplingMode::uniform_iid);
        REQUIRE(pop.size() == 3);
        for (double w : pop.weights) CHECK(w == 1.0);
        CHECK(pop.quad_weight() == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("power law: first agent weakest, last strongest") {
        for (std::uint64_t seed : {1u, 2u, 3u, 11u, 99u}) {
            const auto pop = sample_population(PowerLawGraphon{1.0, -1.0}, 50, seed, SamplingMode::uniform_iid);
            std::vector<double> sums(pop.size(), 0.0);
            for (std::size_t i = 0; i < pop.size(); ++i)
                for (std::size_t j = 0; j < pop.size(); ++j) sums[i] += pop.weight(i, j);
            CHECK(std::min_element(sums.begin(), sums.end()) == sums.begin());
            CHECK(std::max_element(sums.begin(), sums.end()) == sums.end() - 1);
        }
    }
    SUBCASE("age groups, n = 8: two agents per block with diagonal weights inside blocks") {
        const auto g = age_graphon();
        const auto pop = sample_population(g, 8, 0, SamplingMode::group_proportional);
        REQUIRE(pop.size() == 8);
        CHECK(pop.n_groups == 4);
        std::vector<int> counts(4, 0);
        for (auto grp : pop.group_of) ++counts[grp];
        CHECK(counts == std::vector<int>{2, 2, 2, 2});
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                CHECK(pop.weight(i, j) == g.entry(pop.group_of[i], pop.group_of[j]));
                if (pop.group_of[i] == pop.group_of[j])
                    CHECK(pop.weight(i, j) == g.entry(pop.group_of[i], pop.group_of[i]));
            }
    }
    CHECK_THROWS_AS(sample_population(ConstantGraphon{1.0}, 0, 1, SamplingMode::uniform_iid), std::invalid_argument);
}

TEST_CASE("group_proportional apportionment totals exactly n") {
    const PiecewiseGraphon g{{0.1, 0.3, 0.6}, {1, 0.5, 0.2, 0.5, 1, 0.4, 0.2, 0.4, 1}};
    for (std::size_t n : {1u, 2u, 3u, 7u, 10u, 11u, 50u, 333u}) {
        const auto pop = sample_population(g, n, 0, SamplingMode::group_proportional);
        REQUIRE(pop.size() == n);
        std::vector<double> counts(3, 0.0);
        for (auto grp : pop.group_of) counts[grp] += 1.0;
        for (std::size_t b = 0; b < 3; ++b) CHECK(std::abs(counts[b] - g.block_lengths[b] * n) < 1.0);
        for (std::size_t a = 0; a < n; ++a) CHECK(g.block_of(pop.indices[a]) == pop.group_of[a]);
    }
}

// Random specs of every kind for the structural properties below.
static GraphonSpec random_spec(std::mt19937_64& rng) {
    switch (rng() % 3) {
        case 0:
            return PowerLawGraphon{test::uniform(rng, 0.1, 3.0), test::uniform(rng, -2.0, 1.0)};
        case 1: {
            const std::size_t k = 1 + rng() % 5;
            PiecewiseGraphon g;
            double total = 0.0;
            for (std::size_t b = 0; b < k; ++b) total += g.block_lengths.emplace_back(test::uniform(rng, 0.1, 1.0));
            for (auto& l : g.block_lengths) l /= total;
            double s = 0.0;
            for (std::size_t b = 0; b + 1 < k; ++b) s += g.block_lengths[b];
            g.block_lengths.back() = 1.0 - s;
            g.block_matrix.assign(k * k, 0.0);
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = a; b < k; ++b)
                    g.block_matrix[a * k + b] = g.block_matrix[b * k + a] = test::uniform(rng, 0.0, 1.0);
            return g;
        }
        default:
            return ConstantGraphon{test::uniform(rng, 0.0, 1.0)};
    }
}

TEST_CASE("property: weights lie in [0, 1], are symmetric and match the kernel") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const GraphonSpec spec = random_spec(rng);
        const std::size_t n = 1 + rng() % 40;
        const auto mode = (rng() % 2) ? SamplingMode::uniform_iid : SamplingMode::group_proportional;
        const auto pop = sample_population(spec, n, rng(), mode);
        REQUIRE(pop.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) CHECK(pop.indices[i - 1] < pop.indices[i]);
            for (std::size_t j = 0; j < n; ++j) {
                const double w = pop.weight(i, j);
                CHECK(w >= 0.0);
                CHECK(w <= 1.0);
                CHECK(w == pop.weight(j, i));
                CHECK(w == eval_graphon(spec, pop.indices[i], pop.indices[j]));
            }
        }
    }
}

TEST_CASE("property: power law with exponent -1 has nondecreasing row sums") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const PowerLawGraphon g{test::uniform(rng, 0.2, 5.0), -1.0};
        const auto pop = sample_population(g, 2 + rng() % 60, rng(), SamplingMode::uniform_iid);
        double prev = -1.0;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < pop.size(); ++j) s += pop.weight(i, j);
            CHECK(s >= prev);
            prev = s;
        }
    }
}

TEST_CASE("property: sampling is reproducible bitwise") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const GraphonSpec spec = random_spec(rng);
        const std::size_t n = 1 + rng() % 30;
        const std::uint64_t seed = rng();
        for (auto mode : {SamplingMode::uniform_iid, SamplingMode::group_proportional}) {
            const auto a = sample_population(spec, n, seed, mode);
            const auto b = sample_population(spec, n, seed, mode);
            CHECK(a.indices == b.indices);
            CHECK(a.weights == b.weights);
            CHECK(a.group_of == b.group_of);
        }
    }
    const auto a = sample_population(PowerLawGraphon{}, 20, 1, SamplingMode::uniform_iid);
    const auto b = sample_population(PowerLawGraphon{}, 20, 2, SamplingMode::uniform_iid);
    CHECK(a.indices != b.indices);
}
