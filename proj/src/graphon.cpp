#include "skir/graphon.hpp"
#include "skir/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace skir {

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(issues.empty() ? std::string("invalid config")
                                        : fmt::format("invalid config: {}", fmt::join(issues, "; "))),
      issues_(std::move(issues)) {}

std::size_t PiecewiseGraphon::block_of(double x) const {
    double edge = 0.0;
    for (std::size_t k = 0; k + 1 < block_lengths.size(); ++k) {
        edge += block_lengths[k];
        if (x < edge) return k;
    }
    return block_lengths.size() - 1;
}

namespace {

void validate_one(const PowerLawGraphon& g) {
    if (!(g.c > 0.0) || !std::isfinite(g.c))
        throw std::invalid_argument("power_law: c must be positive");
    if (!std::isfinite(g.exponent))
        throw std::invalid_argument("power_law: exponent must be finite");
}

void validate_one(const PiecewiseGraphon& g) {
    const std::size_t k = g.n_blocks();
    if (k == 0) throw std::invalid_argument("piecewise_constant: no blocks");
    if (g.block_matrix.size() != k * k)
        throw std::invalid_argument(
            fmt::format("piecewise_constant: block_matrix has {} entries, expected {}", g.block_matrix.size(), k * k));
    double total = 0.0;
    for (double m : g.block_lengths) {
        if (!(m > 0.0)) throw std::invalid_argument("piecewise_constant: block lengths must be positive");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument(fmt::format("piecewise_constant: block lengths sum to {}, not 1", total));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            const double v = g.entry(a, b);
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument(fmt::format("piecewise_constant: entry ({}, {}) outside [0,1]", a, b));
            if (v != g.entry(b, a))
                throw std::invalid_argument(fmt::format("piecewise_constant: not symmetric at ({}, {})", a, b));
        }
    }
}

void validate_one(const ConstantGraphon& g) {
    if (!(g.w0 >= 0.0 && g.w0 <= 1.0)) throw std::invalid_argument("constant: w0 outside [0,1]");
}

void check_unit(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument(fmt::format("graphon argument {} = {} outside [0,1]", name, v));
}

}  // namespace

void validate(const GraphonSpec& spec) {
    std::visit([](const auto& g) { validate_one(g); }, spec);
}

double eval_graphon(const GraphonSpec& spec, double x, double y) {
    check_unit(x, "x");
    check_unit(y, "y");
    struct Visitor {
        double x, y;
        double operator()(const PowerLawGraphon& g) const {
            const double xy = std::max(x, kIndexFloor) * std::max(y, kIndexFloor);
            return std::clamp(g.c * std::pow(xy, -g.exponent), 0.0, 1.0);
        }
        double operator()(const PiecewiseGraphon& g) const { return g.entry(g.block_of(x), g.block_of(y)); }
        double operator()(const ConstantGraphon& g) const { return g.w0; }
    };
    return std::visit(Visitor{x, y}, spec);
}

std::size_t group_count(const GraphonSpec& spec) {
    if (const auto* g = std::get_if<PiecewiseGraphon>(&spec)) return g->n_blocks();
    return 1;
}

AgentPopulation make_population(const GraphonSpec& spec, std::vector<double> indices) {
    validate(spec);
    if (indices.empty()) throw std::invalid_argument("population must contain at least one agent");
    std::sort(indices.begin(), indices.end());
    for (double x : indices) check_unit(x, "index");

    AgentPopulation pop;
    const std::size_t n = indices.size();
    pop.indices = std::move(indices);
    pop.n_groups = group_count(spec);
    pop.group_of.assign(n, 0);
    if (const auto* g = std::get_if<PiecewiseGraphon>(&spec)) {
        for (std::size_t i = 0; i < n; ++i) pop.group_of[i] = g->block_of(pop.indices[i]);
    }
    pop.weights.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double w = eval_graphon(spec, pop.indices[i], pop.indices[j]);
            pop.weights[i * n + j] = w;
            pop.weights[j * n + i] = w;
        }
    }
    return pop;
}

namespace {

// Largest-remainder apportionment of n seats over the given shares.
std::vector<std::size_t> apportion(const std::vector<double>& shares, std::size_t n) {
    std::vector<std::size_t> counts(shares.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < shares.size(); ++k) {
        const double exact = shares[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];
    return counts;
}

}  // namespace

AgentPopulation sample_population(const GraphonSpec& spec, std::size_t n, std::uint64_t seed,
                                  SamplingMode mode) {
    if (n == 0) throw std::invalid_argument("sample_population: n must be at least 1");
    validate(spec);

    std::vector<double> indices;
    indices.reserve(n);
    if (mode == SamplingMode::uniform_iid) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) indices.push_back(unif(rng));
        return make_population(spec, std::move(indices));
    }

    std::vector<double> lengths{1.0};
    if (const auto* g = std::get_if<PiecewiseGraphon>(&spec)) lengths = g->block_lengths;
    const auto counts = apportion(lengths, n);
    double left = 0.0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
        const double cell = lengths[k] / static_cast<double>(std::max<std::size_t>(counts[k], 1));
        for (std::size_t j = 0; j < counts[k]; ++j) indices.push_back(left + (static_cast<double>(j) + 0.5) * cell);
        left += lengths[k];
    }
    return make_population(spec, std::move(indices));
}

}  // namespace skir
