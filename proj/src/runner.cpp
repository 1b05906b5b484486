#include "skir/runner.hpp"
#include "skir/error.hpp"
#include "skir/output.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "json.hpp"

namespace skir {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

json policy_json(const Policy& p) { return json{{"phi", p.phi}, {"psi", p.psi}}; }

json solve_json(const std::string& label, const EquilibriumSolution& sol) {
    return json{{"label", label},
                {"converged", sol.converged},
                {"iterations", sol.iterations},
                {"final_residual", sol.residual_history.empty() ? 0.0 : sol.residual_history.back()},
                {"residual_history", sol.residual_history}};
}

json config_json(const ExperimentConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["n_agents"] = cfg.n_agents;
    j["horizon"] = cfg.grid.horizon;
    j["n_steps"] = cfg.grid.n_steps;
    j["a_bar"] = cfg.a_bar;
    j["policy"] = {{"phi_bar", cfg.policy.phi_bar}, {"psi_bar", cfg.policy.psi_bar}, {"n_phi", cfg.policy.n_phi},
                   {"n_psi", cfg.policy.n_psi},     {"c_lambda", cfg.policy.c_lambda},
                   {"c_lambda_I", cfg.policy.c_lambda_for_i()}};
    j["solver"] = {{"tol", cfg.solver.tol},
                   {"max_iter", cfg.solver.max_iter},
                   {"damping", cfg.solver.damping},
                   {"integrator", cfg.solver.integrator == Integrator::rk4 ? "rk4" : "euler"}};
    return j;
}

class Runner {
public:
    explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg), dir_(cfg.output_dir) {}

    RunReport execute() {
        const auto start = Clock::now();
        std::filesystem::create_directories(dir_);
        report_["config"] = config_json(cfg_);
        report_["config_ini"] = cfg_.to_ini();
        add_file(dir_ / "resolved.cfg", [&](const auto& f) { std::ofstream(f) << cfg_.to_ini(); });

        game_ = cfg_.build_game();
        const double phi_bar = cfg_.mode == RunMode::ggne
                                   ? std::max(cfg_.policy.fixed_k.phi, cfg_.policy.fixed_i.value_or(Policy{}).phi)
                                   : cfg_.policy.phi_bar;
        const ShortTimeCheck st = check_short_time(game_.rates, game_.a_bar, phi_bar, game_.grid.horizon);
        report_["short_time"] = {{"value", st.value}, {"satisfied", st.satisfied}, {"phi_bar", phi_bar}};
        report_["solves"] = json::array();

        try {
            switch (cfg_.mode) {
                case RunMode::ggne: run_ggne(); break;
                case RunMode::sgge: run_sgge(); break;
                case RunMode::dsge: run_dsge(); break;
            }
            if (cfg_.simulation.enabled && main_solution_) run_monte_carlo();
        } catch (const DivergedError& e) {
            fail(exit_not_converged, e.what());
        } catch (const StabilityError& e) {
            fail(exit_not_converged, e.what());
        } catch (const NotConvergedError& e) {
            fail(exit_not_converged, e.what());
        } catch (const ThinningError& e) {
            fail(exit_failure, e.what());
        }

        timings_["total"] = seconds_since(start);
        report_["timings_seconds"] = timings_;
        report_["exit_code"] = result_.exit_code;

        const auto report_path = dir_ / "report.json";
        result_.manifest.push_back(report_path);
        json files = json::array();
        for (const auto& f : result_.manifest) files.push_back(f.filename().string());
        report_["outputs"] = files;
        result_.json = report_.dump(2);
        std::ofstream(report_path) << result_.json << '\n';
        return std::move(result_);
    }

private:
    template <class Writer>
    void add_file(const std::filesystem::path& file, Writer&& write) {
        write(file);
        result_.manifest.push_back(file);
    }

    void add_files(const std::vector<std::filesystem::path>& files) {
        result_.manifest.insert(result_.manifest.end(), files.begin(), files.end());
    }

    void fail(int code, const std::string& message) {
        if (result_.exit_code == exit_success) result_.exit_code = code;
        report_["errors"].push_back(message);
    }

    void record_solve(const std::string& label, const EquilibriumSolution& sol) {
        report_["solves"].push_back(solve_json(label, sol));
        if (!sol.converged)
            fail(exit_not_converged, fmt::format("{}: no convergence after {} iterations", label, sol.iterations));
    }

    EquilibriumSolution timed_solve(const std::string& label, const PolicyProfile& profile) {
        const auto start = Clock::now();
        EquilibriumSolution sol = ggne_fixed_point(game_, profile, cfg_.solver);
        timings_[label] = seconds_since(start);
        record_solve(label, sol);
        return sol;
    }

    void run_ggne() {
        const PolicyPath pk = PolicyPath::constant_path(cfg_.policy.fixed_k, game_.grid);
        profile_ = cfg_.policy.fixed_i
                       ? PolicyProfile::duo(pk, PolicyPath::constant_path(*cfg_.policy.fixed_i, game_.grid))
                       : PolicyProfile::single(pk);
        EquilibriumSolution sol = timed_solve("ggne", profile_);
        add_files(emit_csv(sol, game_.population, game_.grid, dir_));
        add_file(dir_ / "mean_density.csv", [&](const auto& f) {
            write_mean_density_csv(f, {{"fixed", sol.mean_density()}}, game_.grid);
        });
        json result{{"policy_K", policy_json(cfg_.policy.fixed_k)}};
        if (cfg_.policy.fixed_i) result["policy_I"] = policy_json(*cfg_.policy.fixed_i);
        if (sol.converged) {
            const auto mean = sol.mean_density();
            if (cfg_.policy.fixed_i) {
                const DuoCosts c = principal_costs_duo(profile_.k, profile_.i, mean, cfg_.policy.c_lambda,
                                                       cfg_.policy.c_lambda_for_i(), game_.grid);
                result["J1"] = c.j1;
                result["J2"] = c.j2;
            } else {
                result["J0"] = principal_cost_single(profile_.k, mean, cfg_.policy.c_lambda, game_.grid);
            }
        }
        report_["result"] = result;
        main_solution_ = std::move(sol);
    }

    void run_sgge() {
        const auto start = Clock::now();
        StackelbergResult res = solve_sgge(game_, cfg_.policy_grid(), cfg_.policy.c_lambda, cfg_.solver);
        timings_["grid_search"] = seconds_since(start);
        add_file(dir_ / "principal_table.csv", [&](const auto& f) { write_sgge_table(f, res); });

        json cells = json::array();
        for (const auto& c : res.table) {
            cells.push_back({{"phi", c.policy.phi},
                             {"psi", c.policy.psi},
                             {"converged", c.converged},
                             {"iterations", c.iterations},
                             {"final_residual", c.residual}});
            if (!c.converged)
                fail(exit_not_converged, fmt::format("sgge cell (phi={}, psi={}) did not converge", c.policy.phi,
                                                     c.policy.psi));
        }
        report_["grid_cells"] = cells;

        const EquilibriumSolution baseline = timed_solve("baseline", PolicyProfile::none(game_.grid));
        record_solve("optimal", res.solution);
        add_files(emit_csv(res.solution, game_.population, game_.grid, dir_, "optimal_"));
        add_files(emit_csv(baseline, game_.population, game_.grid, dir_, "baseline_"));
        add_file(dir_ / "mean_density.csv", [&](const auto& f) {
            write_mean_density_csv(f, {{"optimal", res.solution.mean_density()}, {"baseline", baseline.mean_density()}},
                                   game_.grid);
        });

        json result{{"lambda_star", policy_json(res.lambda_star)}, {"J0_star", res.cost}};
        if (baseline.converged)
            result["J0_baseline"] =
                principal_cost_single(PolicyPath::constant_path(Policy{}, game_.grid), baseline, cfg_.policy.c_lambda,
                                      game_.grid);
        result["failed_cells"] = res.failed_cells();
        report_["result"] = result;
        profile_ = PolicyProfile::single(PolicyPath::constant_path(res.lambda_star, game_.grid));
        main_solution_ = std::move(res.solution);
    }

    void run_dsge() {
        const auto start = Clock::now();
        const PolicyGrid grid = cfg_.policy_grid();
        const CostMatrix m =
            build_cost_matrix(game_, grid, grid, cfg_.policy.c_lambda, cfg_.policy.c_lambda_for_i(), cfg_.solver);
        timings_["cost_matrix"] = seconds_since(start);
        const std::vector<NashCell> nash = solve_dsge(m);
        add_file(dir_ / "cost_matrix.csv", [&](const auto& f) { write_cost_matrix_csv(f, m); });
        add_file(dir_ / "nash_cells.csv", [&](const auto& f) { write_nash_csv(f, m, nash); });
        if (m.invalid_cells() > 0)
            fail(exit_not_converged, fmt::format("{} cost matrix cells did not converge", m.invalid_cells()));

        json cells = json::array();
        for (const auto& c : nash)
            cells.push_back({{"i", c.i},
                             {"j", c.j},
                             {"policy_K", policy_json(m.policies_k[c.i])},
                             {"policy_I", policy_json(m.policies_i[c.j])},
                             {"J1", c.j1},
                             {"J2", c.j2}});
        json result{{"nash_cells", cells}, {"invalid_cells", m.invalid_cells()}, {"no_pure_nash", nash.empty()}};

        const EquilibriumSolution baseline = timed_solve(
            "baseline", PolicyProfile::duo(PolicyPath::constant_path(Policy{}, game_.grid),
                                           PolicyPath::constant_path(Policy{}, game_.grid)));
        add_files(emit_csv(baseline, game_.population, game_.grid, dir_, "baseline_"));
        std::vector<std::pair<std::string, std::vector<StateVector>>> means;
        if (!nash.empty()) {
            const NashCell& pick = nash.front();
            result["selected"] = {{"i", pick.i}, {"j", pick.j}};
            profile_ = PolicyProfile::duo(PolicyPath::constant_path(m.policies_k[pick.i], game_.grid),
                                          PolicyPath::constant_path(m.policies_i[pick.j], game_.grid));
            EquilibriumSolution eq = timed_solve("equilibrium", profile_);
            add_files(emit_csv(eq, game_.population, game_.grid, dir_, "equilibrium_"));
            means.emplace_back("equilibrium", eq.mean_density());
            main_solution_ = std::move(eq);
        } else {
            profile_ = PolicyProfile::duo(PolicyPath::constant_path(Policy{}, game_.grid),
                                          PolicyPath::constant_path(Policy{}, game_.grid));
            main_solution_ = baseline;
        }
        means.emplace_back("baseline", baseline.mean_density());
        add_file(dir_ / "mean_density.csv", [&](const auto& f) { write_mean_density_csv(f, means, game_.grid); });
        report_["result"] = result;
    }

    void run_monte_carlo() {
        const auto start = Clock::now();
        const SimConfig sc = cfg_.sim_config();
        const EmpiricalFlow flow = simulate(game_, profile_, main_solution_->theta, sc);
        timings_["monte_carlo"] = seconds_since(start);
        const auto mean_field = player_weighted_mean(main_solution_->p, flow.player_agent);
        double gap = 0.0;
        for (std::size_t k = 0; k < mean_field.size(); ++k)
            for (std::size_t e = 0; e < kNumStates; ++e)
                gap = std::max(gap, std::abs(flow.fractions[k][e] - mean_field[k][e]));
        add_file(dir_ / "mc_density.csv", [&](const auto& f) { write_mc_csv(f, flow, mean_field, game_.grid); });
        report_["monte_carlo"] = {{"n_players", sc.n_players}, {"n_paths", sc.n_paths},   {"seed", sc.seed},
                                  {"rate_cap", flow.rate_cap},  {"proposals", flow.proposals}, {"jumps", flow.jumps},
                                  {"sup_gap", gap}};
        result_.mc_ran = true;
        result_.mc_sup_gap = gap;
    }

    const ExperimentConfig& cfg_;
    std::filesystem::path dir_;
    GameInstance game_;
    PolicyProfile profile_;
    std::optional<EquilibriumSolution> main_solution_;
    json report_;
    json timings_ = json::object();
    RunReport result_;
};

}  // namespace

RunReport run(const ExperimentConfig& config) {
    config.validate();
    return Runner(config).execute();
}

}  // namespace skir
