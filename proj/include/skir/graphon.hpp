#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

namespace skir {

/// w(x, y) = c (x y)^(-exponent), clamped into [0, 1].
struct PowerLawGraphon {
    double c = 1.0;
    double exponent = -1.0;
};

/// Block-constant kernel: [0, 1] is split into consecutive blocks of the given
/// lengths and w(x, y) = block_matrix[block(x)][block(y)].
struct PiecewiseGraphon {
    std::vector<double> block_lengths;
    std::vector<double> block_matrix;  // row-major, K x K

    std::size_t n_blocks() const noexcept { return block_lengths.size(); }
    double entry(std::size_t a, std::size_t b) const { return block_matrix[a * n_blocks() + b]; }
    std::size_t block_of(double x) const;
};

struct ConstantGraphon {
    double w0 = 1.0;
};

using GraphonSpec = std::variant<PowerLawGraphon, PiecewiseGraphon, ConstantGraphon>;

/// Indices below this are lifted before evaluating the power-law kernel.
inline constexpr double kIndexFloor = 1e-6;

/// Throws std::invalid_argument describing the first violated invariant.
void validate(const GraphonSpec& spec);

double eval_graphon(const GraphonSpec& spec, double x, double y);

enum class SamplingMode { uniform_iid, group_proportional };

/// A finite sample of agents from a graphon together with the dense weight
/// matrix used for every integral over the index set (quadrature weight 1/n).
struct AgentPopulation {
    std::vector<double> indices;     // sorted, strictly increasing
    std::vector<double> weights;     // n x n, row-major
    std::vector<std::size_t> group_of;
    std::size_t n_groups = 1;

    std::size_t size() const noexcept { return indices.size(); }
    double quad_weight() const noexcept { return 1.0 / static_cast<double>(indices.size()); }
    double weight(std::size_t i, std::size_t j) const { return weights[i * size() + j]; }
};

/// Draws n agents. uniform_iid sorts n i.i.d. uniforms; group_proportional
/// allocates agents to blocks by largest remainder and places them at the
/// midpoints of equal sub-cells (for non-block kernels this is the midpoint rule).
AgentPopulation sample_population(const GraphonSpec& spec, std::size_t n, std::uint64_t seed,
                                  SamplingMode mode);

/// Population with explicitly given indices (sorted internally).
AgentPopulation make_population(const GraphonSpec& spec, std::vector<double> indices);

/// Number of groups the kernel defines (block count, or 1).
std::size_t group_count(const GraphonSpec& spec);

}  // namespace skir
