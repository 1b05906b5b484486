#include "skir/principal.hpp"
#include "skir/error.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace skir {

namespace {

std::vector<double> even_values(double bar, std::size_t count) {
    if (count == 0) throw std::invalid_argument("policy grid: need at least one point");
    if (!(bar >= 0.0)) throw std::invalid_argument("policy grid: bound must be nonnegative");
    std::vector<double> v(count, 0.0);
    if (count == 1) return v;
    for (std::size_t k = 0; k < count; ++k) v[k] = bar * static_cast<double>(k) / static_cast<double>(count - 1);
    return v;
}

double trapezoid(std::span<const double> f, double dt) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) s += 0.5 * dt * (f[k] + f[k + 1]);
    return s;
}

// Integral of c |lambda_t|^2 + sign (pbar_I - pbar_K).
double principal_integral(const PolicyPath& lambda, std::span<const StateVector> mean_density, double c_lambda,
                          double sign, const TimeGrid& grid) {
    const std::size_t nodes = grid.nodes();
    if (lambda.values.size() != nodes || mean_density.size() != nodes)
        throw std::invalid_argument(fmt::format("principal cost: expected {} nodes, got policy {} and density {}",
                                                nodes, lambda.values.size(), mean_density.size()));
    std::vector<double> integrand(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        const Policy l = lambda.values[k];
        integrand[k] = c_lambda * (l.phi * l.phi + l.psi * l.psi) +
                       sign * (mean_density[k][idx(State::I)] - mean_density[k][idx(State::K)]);
    }
    return trapezoid(integrand, grid.dt());
}

void require_converged(const EquilibriumSolution& sol) {
    if (!sol.converged)
        throw NotConvergedError(fmt::format("principal cost requested for a non-converged equilibrium ({} iterations)",
                                            sol.iterations));
}

}  // namespace

PolicyGrid PolicyGrid::even(double phi_bar, std::size_t n_phi, double psi_bar, std::size_t n_psi) {
    return PolicyGrid{even_values(phi_bar, n_phi), even_values(psi_bar, n_psi)};
}

Policy PolicyGrid::entry(std::size_t index) const {
    return Policy{phi_values.at(index / psi_values.size()), psi_values.at(index % psi_values.size())};
}

std::vector<Policy> PolicyGrid::entries() const {
    std::vector<Policy> out;
    out.reserve(size());
    for (std::size_t k = 0; k < size(); ++k) out.push_back(entry(k));
    return out;
}

double principal_cost_single(const PolicyPath& lambda, std::span<const StateVector> mean_density, double c_lambda,
                             const TimeGrid& grid) {
    return principal_integral(lambda, mean_density, c_lambda, +1.0, grid);
}

double principal_cost_single(const PolicyPath& lambda, const EquilibriumSolution& sol, double c_lambda,
                             const TimeGrid& grid) {
    require_converged(sol);
    return principal_cost_single(lambda, sol.mean_density(), c_lambda, grid);
}

DuoCosts principal_costs_duo(const PolicyPath& lambda_k, const PolicyPath& lambda_i,
                             std::span<const StateVector> mean_density, double c_lambda_k, double c_lambda_i,
                             const TimeGrid& grid) {
    return DuoCosts{principal_integral(lambda_k, mean_density, c_lambda_k, +1.0, grid),
                    principal_integral(lambda_i, mean_density, c_lambda_i, -1.0, grid)};
}

DuoCosts principal_costs_duo(const PolicyPath& lambda_k, const PolicyPath& lambda_i, const EquilibriumSolution& sol,
                             double c_lambda_k, double c_lambda_i, const TimeGrid& grid) {
    require_converged(sol);
    return principal_costs_duo(lambda_k, lambda_i, sol.mean_density(), c_lambda_k, c_lambda_i, grid);
}

std::size_t StackelbergResult::failed_cells() const {
    std::size_t n = 0;
    for (const auto& c : table) n += c.converged ? 0 : 1;
    return n;
}

StackelbergResult solve_sgge(const GameInstance& game, const PolicyGrid& grid, double c_lambda,
                             const SolverOptions& options) {
    if (grid.size() == 0) throw std::invalid_argument("solve_sgge: empty policy grid");
    StackelbergResult result;
    result.table.reserve(grid.size());
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const Policy lambda = grid.entry(c);
        const PolicyPath path = PolicyPath::constant_path(lambda, game.grid);
        EquilibriumSolution sol;
        try {
            sol = ggne_fixed_point(game, PolicyProfile::single(path), options);
        } catch (const DivergedError&) {
            sol.converged = false;
        }
        GridCell cell{lambda, 0.0, sol.converged, sol.iterations,
                      sol.residual_history.empty() ? 0.0 : sol.residual_history.back()};
        if (sol.converged) {
            cell.cost = principal_cost_single(path, sol, c_lambda, game.grid);
            // Strict improvement keeps the lexicographically smallest (phi, psi) on ties.
            if (cell.cost < best) {
                best = cell.cost;
                found = true;
                result.lambda_star = lambda;
                result.cost = cell.cost;
                result.index = c;
                result.solution = std::move(sol);
            }
        }
        result.table.push_back(cell);
    }
    if (!found) throw NotConvergedError("solve_sgge: no policy on the grid produced a converged equilibrium");
    return result;
}

std::size_t CostMatrix::invalid_cells() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.valid ? 0 : 1;
    return n;
}

CostMatrix CostMatrix::from_tables(const std::vector<std::vector<double>>& j1,
                                   const std::vector<std::vector<double>>& j2) {
    if (j1.size() != j2.size() || j1.empty()) throw std::invalid_argument("cost tables must have equal, nonzero rows");
    const std::size_t cols = j1.front().size();
    CostMatrix m;
    m.policies_k.resize(j1.size());
    m.policies_i.resize(cols);
    for (std::size_t i = 0; i < j1.size(); ++i) {
        if (j1[i].size() != cols || j2[i].size() != cols) throw std::invalid_argument("cost tables are ragged");
        for (std::size_t j = 0; j < cols; ++j) m.cells.push_back(CostCell{j1[i][j], j2[i][j], true, 0});
    }
    return m;
}

CostMatrix build_cost_matrix(const GameInstance& game, const PolicyGrid& grid_k, const PolicyGrid& grid_i,
                             double c_lambda_k, double c_lambda_i, const SolverOptions& options) {
    if (grid_k.size() == 0 || grid_i.size() == 0) throw std::invalid_argument("build_cost_matrix: empty policy grid");
    CostMatrix m;
    m.policies_k = grid_k.entries();
    m.policies_i = grid_i.entries();
    m.cells.resize(m.rows() * m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const PolicyPath path_k = PolicyPath::constant_path(m.policies_k[i], game.grid);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const PolicyPath path_i = PolicyPath::constant_path(m.policies_i[j], game.grid);
            CostCell& cell = m.at(i, j);
            try {
                const EquilibriumSolution sol = ggne_fixed_point(game, PolicyProfile::duo(path_k, path_i), options);
                cell.iterations = sol.iterations;
                cell.valid = sol.converged;
                if (sol.converged) {
                    const DuoCosts costs = principal_costs_duo(path_k, path_i, sol, c_lambda_k, c_lambda_i, game.grid);
                    cell.j1 = costs.j1;
                    cell.j2 = costs.j2;
                }
            } catch (const DivergedError&) {
                cell.valid = false;
            }
        }
    }
    return m;
}

std::vector<NashCell> solve_dsge(const CostMatrix& m) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> col_min(m.cols(), inf), row_min(m.rows(), inf);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const CostCell& c = m.at(i, j);
            if (!c.valid) continue;
            col_min[j] = std::min(col_min[j], c.j1);
            row_min[i] = std::min(row_min[i], c.j2);
        }
    }
    std::vector<NashCell> out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const CostCell& c = m.at(i, j);
            if (c.valid && c.j1 <= col_min[j] && c.j2 <= row_min[i]) out.push_back(NashCell{i, j, c.j1, c.j2});
        }
    }
    return out;
}

}  // namespace skir
