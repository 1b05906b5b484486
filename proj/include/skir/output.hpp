#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "skir/finite_player.hpp"
#include "skir/principal.hpp"

namespace skir {

/// CSV emission. Every file has a header row, floats carry 12 significant
/// digits, and rows are ordered by agent and then time.

void write_density_csv(const std::filesystem::path& file, const DensityFlow& p, const AgentPopulation& pop,
                       const TimeGrid& grid);
void write_value_csv(const std::filesystem::path& file, const ValueFlow& u, const TimeGrid& grid);
void write_aggregate_csv(const std::filesystem::path& file, const AggregateField& z, const TimeGrid& grid);
void write_control_csv(const std::filesystem::path& file, const ControlField& theta, const TimeGrid& grid);

/// Agent-averaged densities for several labelled runs: policy, t, p_S..p_R.
void write_mean_density_csv(const std::filesystem::path& file,
                            const std::vector<std::pair<std::string, std::vector<StateVector>>>& runs,
                            const TimeGrid& grid);

void write_sgge_table(const std::filesystem::path& file, const StackelbergResult& result);
void write_cost_matrix_csv(const std::filesystem::path& file, const CostMatrix& m);
void write_nash_csv(const std::filesystem::path& file, const CostMatrix& m, const std::vector<NashCell>& cells);

/// Density layout with a trailing source column: mc rows hold the Monte Carlo
/// fractions, mf rows the matching mean-field average. Population-level rows
/// use agent_index = group = -1.
void write_mc_csv(const std::filesystem::path& file, const EmpiricalFlow& flow,
                  const std::vector<StateVector>& mean_field, const TimeGrid& grid);

/// Writes the density, value, aggregate and control files with the given
/// prefix and returns their paths.
std::vector<std::filesystem::path> emit_csv(const EquilibriumSolution& sol, const AgentPopulation& pop,
                                            const TimeGrid& grid, const std::filesystem::path& dir,
                                            const std::string& prefix = "");

struct DensityRow {
    long agent_index = 0;
    long group = 0;
    double t = 0.0;
    StateVector p{};
};

/// Parses a file written by write_density_csv.
std::vector<DensityRow> read_density_csv(const std::filesystem::path& file);

}  // namespace skir
