#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "skir/fbode.hpp"
#include "skir/finite_player.hpp"
#include "skir/graphon.hpp"
#include "skir/principal.hpp"

namespace skir {

enum class RunMode { ggne, sgge, dsge };

const char* to_string(RunMode mode) noexcept;
std::optional<RunMode> parse_run_mode(const std::string& s);

struct PolicySettings {
    double phi_bar = 0.5;
    double psi_bar = 0.5;
    std::size_t n_phi = 6;
    std::size_t n_psi = 6;
    double c_lambda = 1.0;
    std::optional<double> c_lambda_i;  // principal I, defaults to c_lambda

    // Fixed policy for ggne mode; a duo solve is used when an I policy is given.
    Policy fixed_k;
    std::optional<Policy> fixed_i;

    double c_lambda_for_i() const noexcept { return c_lambda_i.value_or(c_lambda); }
};

struct SimulationSettings {
    bool enabled = false;
    std::size_t n_players = 2000;
    std::size_t n_paths = 20;
    std::optional<std::uint64_t> seed;  // defaults to the experiment seed
    double rate_cap = 0.0;              // 0 = automatic
    ControlSource control_source = ControlSource::equilibrium_field;
};

struct ExperimentConfig {
    RunMode mode = RunMode::ggne;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    GraphonSpec graphon = ConstantGraphon{1.0};
    std::size_t n_agents = 50;
    SamplingMode sampling = SamplingMode::uniform_iid;

    std::vector<Rates> rates{Rates{}};          // one entry, or one per graphon block
    double a_bar = kDefaultControlCap;
    TimeGrid grid;
    std::vector<StateVector> initial{{0.95, 0.02, 0.03, 0.0}};  // one entry, or one per block

    PolicySettings policy;
    SolverOptions solver;
    SimulationSettings simulation;

    /// Every violated constraint, each prefixed with its field path.
    std::vector<std::string> validation_issues() const;
    /// Throws ConfigError listing validation_issues() when non-empty.
    void validate() const;

    GameInstance build_game() const;
    SimConfig sim_config() const;
    PolicyGrid policy_grid() const;

    /// Fully resolved config in the input format; parsing it back reproduces
    /// this config exactly.
    std::string to_ini() const;
};

/// Parses the INI-style experiment format. Unknown sections or keys, and
/// malformed values, are reported together in a ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

}  // namespace skir
