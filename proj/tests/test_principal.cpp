#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <utility>

#include "doctest.h"
#include "skir/error.hpp"
#include "skir/principal.hpp"
#include "support.hpp"

using namespace skir;
using skir::test::uniform;

namespace {

constexpr std::size_t K = 1, I = 2;

std::vector<StateVector> constant_mean(const TimeGrid& grid, double pk, double pi) {
    return std::vector<StateVector>(grid.nodes(), StateVector{1.0 - pk - pi, pk, pi, 0.0});
}

// Brute-force enumeration of pure Nash cells, written independently of solve_dsge.
std::set<std::pair<std::size_t, std::size_t>> enumerate_nash(const CostMatrix& m) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (!m.at(i, j).valid) continue;
            bool ok = true;
            for (std::size_t k = 0; k < m.rows(); ++k)
                if (m.at(k, j).valid && m.at(k, j).j1 < m.at(i, j).j1) ok = false;
            for (std::size_t l = 0; l < m.cols(); ++l)
                if (m.at(i, l).valid && m.at(i, l).j2 < m.at(i, j).j2) ok = false;
            if (ok) out.emplace(i, j);
        }
    return out;
}

std::set<std::pair<std::size_t, std::size_t>> as_set(const std::vector<NashCell>& cells) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : cells) out.emplace(c.i, c.j);
    return out;
}

}  // namespace

TEST_CASE("policy grid spans the box evenly, zero first, phi-major") {
    const auto g = PolicyGrid::even(0.5, 6, 0.4, 5);
    REQUIRE(g.size() == 30);
    CHECK(g.entry(0) == Policy{0.0, 0.0});
    CHECK(g.entry(1) == Policy{0.0, g.psi_values[1]});
    CHECK(g.entry(5) == Policy{g.phi_values[1], 0.0});
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(g.phi_values[k] - 0.1 * k) <= 1e-12);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(g.psi_values[k] - 0.1 * k) <= 1e-12);
    CHECK(g.phi_values.back() == 0.5);
    const auto entries = g.entries();
    for (std::size_t k = 1; k < entries.size(); ++k)
        CHECK(std::make_pair(entries[k - 1].phi, entries[k - 1].psi) < std::make_pair(entries[k].phi, entries[k].psi));
    const auto single = PolicyGrid::even(0.5, 1, 0.5, 1);
    CHECK(single.size() == 1);
    CHECK(single.entry(0) == Policy{});
}

TEST_CASE("single principal cost examples") {
    const TimeGrid t2{2.0, 40}, t1{1.0, 10};
    CHECK(principal_cost_single(PolicyPath::constant_path({}, t2), constant_mean(t2, 0.3, 0.3), 1.0, t2) == 0.0);
    CHECK(principal_cost_single(PolicyPath::constant_path({}, t2), constant_mean(t2, 1.0, 0.0), 1.0, t2) ==
          doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(principal_cost_single(PolicyPath::constant_path({0.3, 0.1}, t1), constant_mean(t1, 0.2, 0.2), 1.0, t1) ==
          doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("principal cost uses the trapezoidal rule") {
    const TimeGrid grid{1.0, 2};
    std::vector<StateVector> mean(3);
    const double pk[] = {0.0, 0.25, 1.0};  // t^2 at t = 0, 1/2, 1
    for (int k = 0; k < 3; ++k) mean[k] = {1.0 - pk[k], pk[k], 0.0, 0.0};
    // Trapezoid with h = 1/2: -(0/2 + 0.25 + 1/2) / 2
    CHECK(principal_cost_single(PolicyPath::constant_path({}, grid), mean, 1.0, grid) ==
          doctest::Approx(-0.375).epsilon(1e-15));
    PolicyPath varying = PolicyPath::constant_path({}, grid);
    varying.constant = false;
    varying.values = {Policy{0.0, 0.0}, Policy{1.0, 0.0}, Policy{0.0, 2.0}};
    const auto flat = constant_mean(grid, 0.1, 0.1);
    CHECK(principal_cost_single(varying, flat, 2.0, grid) == doctest::Approx(2.0 * (1.0 + 2.0) / 2.0));
}

TEST_CASE("duo principal cost examples") {
    const TimeGrid t1{1.0, 20};
    const auto zero = PolicyPath::constant_path({}, t1);
    auto c = principal_costs_duo(zero, zero, constant_mean(t1, 0.2, 0.2), 1.0, 1.0, t1);
    CHECK(c.j1 == 0.0);
    CHECK(c.j2 == 0.0);
    c = principal_costs_duo(zero, zero, constant_mean(t1, 1.0, 0.0), 1.0, 1.0, t1);
    CHECK(c.j1 == doctest::Approx(-1.0));
    CHECK(c.j2 == doctest::Approx(1.0));
    c = principal_costs_duo(zero, PolicyPath::constant_path({0.5, 0.0}, t1), constant_mean(t1, 0.1, 0.1), 2.0, 2.0,
                            t1);
    CHECK(c.j2 == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.j1 == 0.0);
    // Per-principal scale constants.
    c = principal_costs_duo(PolicyPath::constant_path({0.5, 0.0}, t1), PolicyPath::constant_path({0.5, 0.0}, t1),
                            constant_mean(t1, 0.1, 0.1), 1.0, 3.0, t1);
    CHECK(c.j1 == doctest::Approx(0.25));
    CHECK(c.j2 == doctest::Approx(0.75));
}

TEST_CASE("costs of non-converged solutions are rejected") {
    const auto g = test::age_game(4, {10.0, 100});
    SolverOptions opt;
    opt.max_iter = 1;
    const auto sol = ggne_fixed_point(g, PolicyProfile::none(g.grid), opt);
    REQUIRE_FALSE(sol.converged);
    const auto zero = PolicyPath::constant_path({}, g.grid);
    CHECK_THROWS_AS(principal_cost_single(zero, sol, 1.0, g.grid), NotConvergedError);
    CHECK_THROWS_AS(principal_costs_duo(zero, zero, sol, 1.0, 1.0, g.grid), NotConvergedError);
}

TEST_CASE("sgge on a singleton grid returns the zero policy") {
    const auto g = test::age_game(8, {10.0, 100});
    const auto res = solve_sgge(g, PolicyGrid::even(0.5, 1, 0.5, 1), 1.0);
    CHECK(res.lambda_star == Policy{});
    const auto sol = ggne_fixed_point(g, PolicyProfile::none(g.grid));
    CHECK(res.cost == principal_cost_single(PolicyPath::constant_path({}, g.grid), sol, 1.0, g.grid));
    CHECK(res.table.size() == 1);
}

TEST_CASE("sgge returns the exhaustive minimum and dominates the zero policy") {
    const auto g = test::age_game(8, {10.0, 100});
    const auto grid = PolicyGrid::even(0.5, 3, 0.5, 3);
    const auto res = solve_sgge(g, grid, 1.0);
    REQUIRE(res.table.size() == 9);
    CHECK(res.failed_cells() == 0);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < res.table.size(); ++c) {
        CHECK(res.table[c].policy == grid.entry(c));
        // Each cell cost is reproduced by an independent solve.
        const auto path = PolicyPath::constant_path(grid.entry(c), g.grid);
        const auto sol = ggne_fixed_point(g, PolicyProfile::single(path));
        CHECK(res.table[c].cost == principal_cost_single(path, sol, 1.0, g.grid));
        best = std::min(best, res.table[c].cost);
    }
    CHECK(res.cost == best);
    CHECK(res.cost <= res.table[0].cost);
    CHECK(res.table[res.index].policy == res.lambda_star);
    CHECK(res.solution.converged);
}

TEST_CASE("sgge breaks ties towards the first grid entry") {
    const auto g = test::age_game(4, {10.0, 100});
    PolicyGrid dup;
    dup.phi_values = {0.2, 0.2};
    dup.psi_values = {0.1};
    const auto res = solve_sgge(g, dup, 1.0);
    REQUIRE(res.table[0].cost == res.table[1].cost);
    CHECK(res.index == 0);
}

TEST_CASE("sgge fails only when every cell fails") {
    const auto g = test::age_game(4, {10.0, 100});
    SolverOptions opt;
    opt.max_iter = 1;
    CHECK_THROWS_AS(solve_sgge(g, PolicyGrid::even(0.5, 2, 0.5, 2), 1.0, opt), NotConvergedError);
}

TEST_CASE("sgge on the age-group setup surges K early and controls I") {
    const auto g = test::age_game();
    const auto res = solve_sgge(g, PolicyGrid::even(0.5, 6, 0.5, 6), 1.0);
    REQUIRE(res.failed_cells() == 0);
    const auto base = ggne_fixed_point(g, PolicyProfile::none(g.grid));
    REQUIRE(base.converged);
    CHECK(res.cost <= principal_cost_single(PolicyPath::constant_path({}, g.grid), base, 1.0, g.grid));
    const auto opt = res.solution.mean_density();
    const auto ref = base.mean_density();
    // Early surge: within the first unit of time.
    CHECK(opt[20][K] > ref[20][K]);
    for (std::size_t k = 0; k < opt.size(); ++k) CHECK(opt[k][I] <= ref[k][I] + 1e-3);
}

TEST_CASE("cost matrix: single cell equals the duo baseline") {
    const auto g = test::symmetric_game(6, {4.0, 40});
    const auto grid = PolicyGrid::even(0.5, 1, 0.5, 1);
    const auto m = build_cost_matrix(g, grid, grid, 1.0, 1.0);
    REQUIRE(m.rows() == 1);
    REQUIRE(m.at(0, 0).valid);
    const auto zero = PolicyPath::constant_path({}, g.grid);
    const auto sol = ggne_fixed_point(g, PolicyProfile::duo(zero, zero));
    const auto c = principal_costs_duo(zero, zero, sol, 1.0, 1.0, g.grid);
    CHECK(m.at(0, 0).j1 == c.j1);
    CHECK(m.at(0, 0).j2 == c.j2);
}

TEST_CASE("cost matrix under K/I relabeling symmetry") {
    const auto g = test::symmetric_game(6, {4.0, 40});
    const auto grid = PolicyGrid::even(0.4, 2, 0.4, 2);
    const auto m = build_cost_matrix(g, grid, grid, 1.0, 1.0);
    REQUIRE(m.invalid_cells() == 0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) CHECK(std::abs(m.at(i, j).j1 - m.at(j, i).j2) <= 1e-6);
    // Nash cells are closed under transposition.
    const auto nash = as_set(solve_dsge(m));
    for (const auto& [i, j] : nash) CHECK(nash.count({j, i}) == 1);

    // A larger policy cost scale weakly increases each principal's cost.
    const auto dear = build_cost_matrix(g, grid, grid, 2.0, 3.0);
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
        CHECK(dear.cells[c].j1 >= m.cells[c].j1);
        CHECK(dear.cells[c].j2 >= m.cells[c].j2);
    }
}

TEST_CASE("dsge examples") {
    auto one = CostMatrix::from_tables({{3.0}}, {{-1.0}});
    const auto n1 = solve_dsge(one);
    REQUIRE(n1.size() == 1);
    CHECK(n1[0].j1 == 3.0);
    CHECK(n1[0].j2 == -1.0);

    // Exhaustive enumeration: (second row, first column) qualifies, and so does
    // (first row, second column): J1 = 2 is the column minimum, J2 = 0 the row minimum.
    const auto m = CostMatrix::from_tables({{1, 2}, {0, 3}}, {{1, 0}, {2, 3}});
    const auto n2 = solve_dsge(m);
    CHECK(as_set(n2) == std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
    for (const auto& c : n2) {
        if (c.i != 1) continue;
        CHECK(c.j1 == 0.0);
        CHECK(c.j2 == 2.0);
    }

    CHECK(solve_dsge(CostMatrix::from_tables({{0, 1}, {1, 0}}, {{1, 0}, {0, 1}})).empty());
}

TEST_CASE("dsge ignores invalid cells") {
    auto m = CostMatrix::from_tables({{1, 2}, {0, 3}}, {{1, 0}, {2, 3}});
    m.at(1, 0).valid = false;
    const auto cells = as_set(solve_dsge(m));
    CHECK(cells == enumerate_nash(m));
    CHECK(cells.count({1, 0}) == 0);
    CHECK(cells.count({0, 0}) == 0);  // J2 prefers column 1 in row 0
    CHECK(cells.count({0, 1}) == 1);
}

TEST_CASE("property: dsge returns exactly the cells passing both best-response tests") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t rows = 1 + rng() % 5, cols = 1 + rng() % 5;
        std::vector<std::vector<double>> j1(rows, std::vector<double>(cols)), j2 = j1;
        for (auto* t : {&j1, &j2})
            for (auto& row : *t)
                for (auto& v : row) v = static_cast<double>(rng() % 4);  // small range forces ties
        auto m = CostMatrix::from_tables(j1, j2);
        for (auto& c : m.cells)
            if (rng() % 8 == 0) c.valid = false;
        const auto cells = solve_dsge(m);
        CHECK(as_set(cells) == enumerate_nash(m));
        for (const auto& c : cells) {
            REQUIRE(m.at(c.i, c.j).valid);
            CHECK(c.j1 == m.at(c.i, c.j).j1);
            CHECK(c.j2 == m.at(c.i, c.j).j2);
            for (std::size_t k = 0; k < rows; ++k)
                if (m.at(k, c.j).valid) CHECK(c.j1 <= m.at(k, c.j).j1);
            for (std::size_t l = 0; l < cols; ++l)
                if (m.at(c.i, l).valid) CHECK(c.j2 <= m.at(c.i, l).j2);
        }
    }
}

TEST_CASE("property: symmetric bimatrix games have transposition-closed Nash sets") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 5;
        std::vector<std::vector<double>> j1(n, std::vector<double>(n)), j2 = j1;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) j1[i][j] = static_cast<double>(rng() % 5);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) j2[i][j] = j1[j][i];
        const auto cells = as_set(solve_dsge(CostMatrix::from_tables(j1, j2)));
        for (const auto& [i, j] : cells) CHECK(cells.count({j, i}) == 1);
    }
}
