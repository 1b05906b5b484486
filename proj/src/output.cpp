#include "skir/output.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace skir {

namespace {

std::ofstream open_csv(const std::filesystem::path& file, const char* header) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    out << header << '\n';
    return out;
}

std::string g12(double v) { return fmt::format("{:.12g}", v); }

std::string state_columns(const StateVector& v) {
    return fmt::format("{},{},{},{}", g12(v[0]), g12(v[1]), g12(v[2]), g12(v[3]));
}

void write_state_field(const std::filesystem::path& file, const NodeField<StateVector>& f, const TimeGrid& grid,
                       const char* header) {
    auto out = open_csv(file, header);
    for (std::size_t a = 0; a < f.agents(); ++a)
        for (std::size_t k = 0; k < f.nodes(); ++k)
            out << a << ',' << g12(grid.time(k)) << ',' << state_columns(f(a, k)) << '\n';
}

}  // namespace

void write_density_csv(const std::filesystem::path& file, const DensityFlow& p, const AgentPopulation& pop,
                       const TimeGrid& grid) {
    auto out = open_csv(file, "agent_index,group,t,p_S,p_K,p_I,p_R");
    for (std::size_t a = 0; a < p.agents(); ++a)
        for (std::size_t k = 0; k < p.nodes(); ++k)
            out << a << ',' << pop.group_of[a] << ',' << g12(grid.time(k)) << ',' << state_columns(p(a, k)) << '\n';
}

void write_value_csv(const std::filesystem::path& file, const ValueFlow& u, const TimeGrid& grid) {
    write_state_field(file, u, grid, "agent_index,t,u_S,u_K,u_I,u_R");
}

void write_control_csv(const std::filesystem::path& file, const ControlField& theta, const TimeGrid& grid) {
    write_state_field(file, theta, grid, "agent_index,t,theta_S,theta_K,theta_I,theta_R");
}

void write_aggregate_csv(const std::filesystem::path& file, const AggregateField& z, const TimeGrid& grid) {
    auto out = open_csv(file, "agent_index,t,Z_K,Z_I");
    for (std::size_t a = 0; a < z.agents(); ++a)
        for (std::size_t k = 0; k < z.nodes(); ++k)
            out << a << ',' << g12(grid.time(k)) << ',' << g12(z(a, k).z_k) << ',' << g12(z(a, k).z_i) << '\n';
}

void write_mean_density_csv(const std::filesystem::path& file,
                            const std::vector<std::pair<std::string, std::vector<StateVector>>>& runs,
                            const TimeGrid& grid) {
    auto out = open_csv(file, "policy,t,p_S,p_K,p_I,p_R");
    for (const auto& [label, mean] : runs)
        for (std::size_t k = 0; k < mean.size(); ++k)
            out << label << ',' << g12(grid.time(k)) << ',' << state_columns(mean[k]) << '\n';
}

void write_sgge_table(const std::filesystem::path& file, const StackelbergResult& result) {
    auto out = open_csv(file, "phi_K,psi_K,J1,converged,iterations");
    for (const auto& c : result.table)
        out << g12(c.policy.phi) << ',' << g12(c.policy.psi) << ',' << (c.converged ? g12(c.cost) : "nan") << ','
            << (c.converged ? 1 : 0) << ',' << c.iterations << '\n';
}

void write_cost_matrix_csv(const std::filesystem::path& file, const CostMatrix& m) {
    auto out = open_csv(file, "phi_K,psi_K,phi_I,psi_I,J1,J2,converged,iterations");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const CostCell& c = m.at(i, j);
            out << g12(m.policies_k[i].phi) << ',' << g12(m.policies_k[i].psi) << ',' << g12(m.policies_i[j].phi)
                << ',' << g12(m.policies_i[j].psi) << ',' << (c.valid ? g12(c.j1) : "nan") << ','
                << (c.valid ? g12(c.j2) : "nan") << ',' << (c.valid ? 1 : 0) << ',' << c.iterations << '\n';
        }
}

void write_nash_csv(const std::filesystem::path& file, const CostMatrix& m, const std::vector<NashCell>& cells) {
    auto out = open_csv(file, "i,j,phi_K,psi_K,phi_I,psi_I,J1,J2");
    for (const auto& c : cells)
        out << c.i << ',' << c.j << ',' << g12(m.policies_k[c.i].phi) << ',' << g12(m.policies_k[c.i].psi) << ','
            << g12(m.policies_i[c.j].phi) << ',' << g12(m.policies_i[c.j].psi) << ',' << g12(c.j1) << ','
            << g12(c.j2) << '\n';
}

void write_mc_csv(const std::filesystem::path& file, const EmpiricalFlow& flow,
                  const std::vector<StateVector>& mean_field, const TimeGrid& grid) {
    auto out = open_csv(file, "agent_index,group,t,p_S,p_K,p_I,p_R,source");
    for (std::size_t k = 0; k < flow.fractions.size(); ++k)
        out << "-1,-1," << g12(grid.time(k)) << ',' << state_columns(flow.fractions[k]) << ",mc\n";
    for (std::size_t k = 0; k < mean_field.size(); ++k)
        out << "-1,-1," << g12(grid.time(k)) << ',' << state_columns(mean_field[k]) << ",mf\n";
}

std::vector<std::filesystem::path> emit_csv(const EquilibriumSolution& sol, const AgentPopulation& pop,
                                            const TimeGrid& grid, const std::filesystem::path& dir,
                                            const std::string& prefix) {
    std::vector<std::filesystem::path> files{dir / (prefix + "densities.csv"), dir / (prefix + "values.csv"),
                                             dir / (prefix + "aggregates.csv"), dir / (prefix + "controls.csv")};
    write_density_csv(files[0], sol.p, pop, grid);
    write_value_csv(files[1], sol.u, grid);
    write_aggregate_csv(files[2], sol.z, grid);
    write_control_csv(files[3], sol.theta, grid);
    return files;
}

std::vector<DensityRow> read_density_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error(fmt::format("cannot read {}", file.string()));
    std::string line;
    std::getline(in, line);
    if (line.rfind("agent_index,group,t,p_S,p_K,p_I,p_R", 0) != 0)
        throw std::runtime_error(fmt::format("{}: unexpected header '{}'", file.string(), line));
    std::vector<DensityRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 7) throw std::runtime_error(fmt::format("{}: short row '{}'", file.string(), line));
        DensityRow r;
        r.agent_index = std::stol(cells[0]);
        r.group = std::stol(cells[1]);
        r.t = std::stod(cells[2]);
        for (std::size_t e = 0; e < kNumStates; ++e) r.p[e] = std::stod(cells[3 + e]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace skir
