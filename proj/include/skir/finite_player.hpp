#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "skir/fbode.hpp"

namespace skir {

enum class ControlSource { equilibrium_field, constant_one };

struct SimConfig {
    std::size_t n_players = 2000;
    std::size_t n_paths = 20;
    std::uint64_t seed = 1;
    double rate_cap = 0.0;  // per player; <= 0 selects the automatic bound
    ControlSource control_source = ControlSource::equilibrium_field;
};

/// Population state fractions of the N-player chain at the grid nodes.
struct EmpiricalFlow {
    std::vector<StateVector> fractions;            // averaged over paths
    std::vector<StateVector> fraction_sd;          // sample std. dev. across paths
    std::vector<AggregatePair> mean_aggregates;    // (1/N) sum_j Z^j, averaged over paths
    std::vector<std::vector<StateVector>> paths;   // per-path fractions, kept on request
    std::vector<std::size_t> player_agent;         // mean-field agent each player copies
    double rate_cap = 0.0;
    std::size_t proposals = 0;
    std::size_t jumps = 0;
};

/// Player j copies agent floor(j * n / N); w_ij = W[agent(i)][agent(j)].
std::vector<std::size_t> assign_players(std::size_t n_players, std::size_t n_agents);

/// Per-player bound on the total exit rate, valid for every state, time and
/// configuration of the other players.
double automatic_rate_cap(const GameInstance& game, const PolicyProfile& policy, const ControlField& theta,
                          ControlSource source);

/// Exact simulation of the finite-player chain by thinning. Each player's
/// control is read from theta (piecewise constant between nodes) for the agent
/// it copies; aggregates are the finite sums over the current configuration.
/// Throws ThinningError if a proposed rate exceeds the cap.
EmpiricalFlow simulate(const GameInstance& game, const PolicyProfile& policy, const ControlField& theta,
                       const SimConfig& config, bool keep_paths = false);

/// Z^j_K = (1/N) sum_i w_ij alpha^i 1{X^i = K}, Z^j_I likewise.
/// `weights` is the N x N player matrix, row-major; `controls` holds each
/// player's current control.
std::vector<AggregatePair> empirical_aggregates(std::span<const State> states, std::span<const double> controls,
                                                std::span<const double> weights);

/// Mean-field density averaged with the player-to-agent multiplicities.
std::vector<StateVector> player_weighted_mean(const DensityFlow& p, std::span<const std::size_t> player_agent);

}  // namespace skir
