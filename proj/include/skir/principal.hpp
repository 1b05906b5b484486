#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "skir/fbode.hpp"

namespace skir {

/// Evenly spaced constant policies on [0, phi_bar] x [0, psi_bar]. Entries are
/// enumerated phi-major, so the zero policy comes first and enumeration order is
/// lexicographic in (phi, psi).
struct PolicyGrid {
    std::vector<double> phi_values;
    std::vector<double> psi_values;

    static PolicyGrid even(double phi_bar, std::size_t n_phi, double psi_bar, std::size_t n_psi);

    std::size_t size() const noexcept { return phi_values.size() * psi_values.size(); }
    Policy entry(std::size_t index) const;
    std::vector<Policy> entries() const;
};

/// Trapezoidal quadrature of c (phi^2 + psi^2) - sign * (pbar_K - pbar_I) on the grid,
/// where sign = +1 for a principal preferring K.
double principal_cost_single(const PolicyPath& lambda, std::span<const StateVector> mean_density, double c_lambda,
                             const TimeGrid& grid);

/// Rejects non-converged solutions with NotConvergedError.
double principal_cost_single(const PolicyPath& lambda, const EquilibriumSolution& sol, double c_lambda,
                             const TimeGrid& grid);

struct DuoCosts {
    double j1 = 0.0;  // principal K
    double j2 = 0.0;  // principal I
};

DuoCosts principal_costs_duo(const PolicyPath& lambda_k, const PolicyPath& lambda_i,
                             std::span<const StateVector> mean_density, double c_lambda_k, double c_lambda_i,
                             const TimeGrid& grid);

DuoCosts principal_costs_duo(const PolicyPath& lambda_k, const PolicyPath& lambda_i, const EquilibriumSolution& sol,
                             double c_lambda_k, double c_lambda_i, const TimeGrid& grid);

struct GridCell {
    Policy policy;
    double cost = 0.0;  // meaningful only when converged
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

struct StackelbergResult {
    Policy lambda_star;
    double cost = 0.0;
    std::size_t index = 0;
    std::vector<GridCell> table;
    EquilibriumSolution solution;  // GGNE at lambda_star

    std::size_t failed_cells() const;
};

/// Grid search over constant single-principal policies. Non-converged cells are
/// kept in the table but excluded from the argmin; throws NotConvergedError if
/// no cell converges.
StackelbergResult solve_sgge(const GameInstance& game, const PolicyGrid& grid, double c_lambda,
                             const SolverOptions& options = {});

struct CostCell {
    double j1 = 0.0;
    double j2 = 0.0;
    bool valid = false;
    int iterations = 0;
};

struct CostMatrix {
    std::vector<Policy> policies_k;  // rows
    std::vector<Policy> policies_i;  // columns
    std::vector<CostCell> cells;     // row-major

    std::size_t rows() const noexcept { return policies_k.size(); }
    std::size_t cols() const noexcept { return policies_i.size(); }
    CostCell& at(std::size_t i, std::size_t j) { return cells[i * cols() + j]; }
    const CostCell& at(std::size_t i, std::size_t j) const { return cells[i * cols() + j]; }
    std::size_t invalid_cells() const;

    /// Matrix built directly from cost tables (no policies attached).
    static CostMatrix from_tables(const std::vector<std::vector<double>>& j1,
                                  const std::vector<std::vector<double>>& j2);
};

/// Duo GGNE and both principal costs for every (row, column) policy pair.
CostMatrix build_cost_matrix(const GameInstance& game, const PolicyGrid& grid_k, const PolicyGrid& grid_i,
                             double c_lambda_k, double c_lambda_i, const SolverOptions& options = {});

struct NashCell {
    std::size_t i = 0;
    std::size_t j = 0;
    double j1 = 0.0;
    double j2 = 0.0;
};

/// Every valid cell where the row is a best response for principal K within its
/// column and the column is a best response for principal I within its row
/// (weak inequalities, invalid cells ignored).
std::vector<NashCell> solve_dsge(const CostMatrix& m);

}  // namespace skir
