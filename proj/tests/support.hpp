#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "skir/fbode.hpp"
#include "skir/graphon.hpp"
#include "skir/model.hpp"

namespace skir::test {

/// Age-group connectivity (18-29, 30-49, 50-64, 65+), equal block lengths.
inline PiecewiseGraphon age_graphon() {
    return PiecewiseGraphon{{0.25, 0.25, 0.25, 0.25},
                            {1.0, 0.9, 0.8, 0.7,  //
                             0.9, 0.9, 0.8, 0.8,  //
                             0.8, 0.8, 0.9, 0.8,  //
                             0.7, 0.8, 0.8, 0.8}};
}

/// Per-group rates for the same four age groups.
inline std::vector<Rates> age_rates() {
    return {Rates{0.4, 0.5, 0.75, 0.1, 0.1, 0.0}, Rates{0.3, 0.42, 0.62, 0.05, 0.05, 0.0},
            Rates{0.3, 0.32, 0.48, 0.05, 0.05, 0.0}, Rates{0.3, 0.2, 0.3, 0.15, 0.15, 0.0}};
}

inline constexpr StateVector kAgeInitial{0.95, 0.02, 0.03, 0.0};

inline GameInstance make_game(AgentPopulation pop, const std::vector<Rates>& group_rates, StateVector p0,
                              TimeGrid grid, double a_bar = kDefaultControlCap) {
    GameInstance g;
    g.population = std::move(pop);
    g.grid = grid;
    g.a_bar = a_bar;
    for (std::size_t a = 0; a < g.population.size(); ++a) {
        const std::size_t grp = group_rates.size() == 1 ? 0 : g.population.group_of[a];
        g.rates.push_back(group_rates[grp]);
        g.initial.push_back(p0);
    }
    return g;
}

inline GameInstance age_game(std::size_t n = 50, TimeGrid grid = {}, double a_bar = kDefaultControlCap) {
    return make_game(sample_population(age_graphon(), n, 1, SamplingMode::group_proportional), age_rates(),
                     kAgeInitial, grid, a_bar);
}

/// K and I enter symmetrically: equal betas, equal mus, equal initial masses.
inline GameInstance symmetric_game(std::size_t n = 12, TimeGrid grid = {4.0, 80}) {
    const Rates r{0.5, 0.5, 0.5, 0.1, 0.1, 0.05};
    return make_game(sample_population(PowerLawGraphon{1.0, -1.0}, n, 5, SamplingMode::uniform_iid), {r},
                     {0.9, 0.04, 0.04, 0.02}, grid);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Rates random_rates(std::mt19937_64& rng) {
    return Rates{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1),
                 uniform(rng, 0.01, 0.5), uniform(rng, 0.01, 0.5), uniform(rng, 0, 0.3)};
}

inline StateVector random_simplex(std::mt19937_64& rng) {
    StateVector v;
    double s = 0.0;
    for (auto& x : v) s += (x = -std::log(uniform(rng, 1e-12, 1.0)));
    for (auto& x : v) x /= s;
    return v;
}

inline StateVector random_values(std::mt19937_64& rng, double scale = 2.0) {
    return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale),
            uniform(rng, -scale, scale)};
}

inline double max_abs_diff(const std::vector<StateVector>& a, const std::vector<StateVector>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
        for (std::size_t e = 0; e < kNumStates; ++e) d = std::max(d, std::abs(a[k][e] - b[k][e]));
    return d;
}

}  // namespace skir::test
