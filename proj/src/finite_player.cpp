#include "skir/finite_player.hpp"
#include "skir/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace skir {

std::vector<std::size_t> assign_players(std::size_t n_players, std::size_t n_agents) {
    if (n_players == 0 || n_agents == 0) throw std::invalid_argument("assign_players: empty population");
    std::vector<std::size_t> out(n_players);
    for (std::size_t j = 0; j < n_players; ++j) out[j] = j * n_agents / n_players;
    return out;
}

namespace {

StateVector control_at(const ControlField& theta, ControlSource source, std::size_t agent, std::size_t node) {
    if (source == ControlSource::constant_one) return StateVector{1.0, 1.0, 1.0, 1.0};
    return theta(agent, node);
}

}  // namespace

double automatic_rate_cap(const GameInstance& game, const PolicyProfile& policy, const ControlField& theta,
                          ControlSource source) {
    const std::size_t n = game.agents();
    const std::size_t nodes = game.grid.nodes();
    double spread_control = 0.0;  // largest control used by a player in K or I
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t k = 0; k < nodes; ++k) {
            const StateVector c = control_at(theta, source, a, k);
            spread_control = std::max({spread_control, c[idx(State::K)], c[idx(State::I)]});
        }
    double cap = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        double w_max = 0.0;
        for (std::size_t b = 0; b < n; ++b) w_max = std::max(w_max, game.population.weight(a, b));
        // z_K + z_I <= w_max * spread_control because at most every player is in K or I.
        const double z_bound = w_max * spread_control;
        for (std::size_t k = 0; k < nodes; ++k) {
            const StateVector c = control_at(theta, source, a, k);
            const Incentives lam = policy.at(k);
            for (State e : kAllStates) {
                const StateVector out = exit_rates(e, c[idx(e)], AggregatePair{z_bound, z_bound}, lam, game.rates[a]);
                double total = 0.0;
                for (double v : out) total += v;
                cap = std::max(cap, total);
            }
        }
    }
    // Strictly positive so that frozen populations still advance in time.
    return std::max(cap, 1e-12) * (1.0 + 1e-9);
}

std::vector<AggregatePair> empirical_aggregates(std::span<const State> states, std::span<const double> controls,
                                                std::span<const double> weights) {
    const std::size_t n = states.size();
    if (controls.size() != n || weights.size() != n * n)
        throw std::invalid_argument("empirical_aggregates: dimension mismatch");
    std::vector<AggregatePair> z(n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        double zk = 0.0, zi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights[i * n + j] * controls[i];
            if (states[i] == State::K) zk += w;
            if (states[i] == State::I) zi += w;
        }
        z[j] = {zk * inv, zi * inv};
    }
    return z;
}

std::vector<StateVector> player_weighted_mean(const DensityFlow& p, std::span<const std::size_t> player_agent) {
    std::vector<double> mult(p.agents(), 0.0);
    for (std::size_t a : player_agent) mult.at(a) += 1.0;
    const double inv = 1.0 / static_cast<double>(player_agent.size());
    std::vector<StateVector> mean(p.nodes(), StateVector{});
    for (std::size_t a = 0; a < p.agents(); ++a) {
        if (mult[a] == 0.0) continue;
        for (std::size_t k = 0; k < p.nodes(); ++k)
            for (std::size_t e = 0; e < kNumStates; ++e) mean[k][e] += mult[a] * inv * p(a, k)[e];
    }
    return mean;
}

namespace {

// One replication of the N-player chain. Players copying the same agent are
// exchangeable, so the configuration is tracked as per-agent state counts and
// each player's own state.
class PathSimulator {
public:
    PathSimulator(const GameInstance& game, const PolicyProfile& policy, const ControlField& theta,
                  const SimConfig& cfg, std::span<const std::size_t> player_agent, double cap)
        : game_(game), policy_(policy), theta_(theta), cfg_(cfg), player_agent_(player_agent), cap_(cap),
          n_agents_(game.agents()), n_players_(player_agent.size()) {}

    void run(std::uint64_t path, std::vector<StateVector>& fractions, std::vector<AggregatePair>& aggregates,
             std::size_t& proposals, std::size_t& jumps) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg_.seed >> 32),
                          static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        const std::size_t nodes = game_.grid.nodes();
        states_.assign(n_players_, State::S);
        counts_.assign(n_agents_, StateVector{});
        for (std::size_t j = 0; j < n_players_; ++j) {
            const std::size_t a = player_agent_[j];
            const StateVector& p0 = game_.initial[a];
            const double u = unif(rng);
            double acc = 0.0;
            State chosen = State::R;
            for (State e : kAllStates) {
                acc += p0[idx(e)];
                if (u < acc) {
                    chosen = e;
                    break;
                }
            }
            states_[j] = chosen;
            counts_[a][idx(chosen)] += 1.0;
        }

        fractions.assign(nodes, StateVector{});
        aggregates.assign(nodes, AggregatePair{});
        control_node_ = 0;
        refresh_mass();
        record(0, fractions, aggregates);

        const double total_rate = cap_ * static_cast<double>(n_players_);
        std::exponential_distribution<double> clock(total_rate);
        std::uniform_int_distribution<std::size_t> pick(0, n_players_ - 1);
        const double dt = game_.grid.dt();
        std::size_t next_node = 1;
        double t = 0.0;
        while (next_node < nodes) {
            t += clock(rng);
            while (next_node < nodes && game_.grid.time(next_node) <= t) {
                set_control_node(next_node);
                record(next_node++, fractions, aggregates);
            }
            if (next_node >= nodes) break;
            set_control_node(std::min<std::size_t>(static_cast<std::size_t>(t / dt), nodes - 2));

            ++proposals;
            const std::size_t j = pick(rng);
            const std::size_t a = player_agent_[j];
            const State e = states_[j];
            const StateVector rates = player_rates(j);
            double total = 0.0;
            for (double v : rates) total += v;
            if (total > cap_)
                throw ThinningError(fmt::format("exit rate {} of player {} in state {} at t = {} exceeds cap {}", total,
                                                j, state_name(e), t, cap_));
            double threshold = unif(rng) * cap_;
            if (threshold >= total) continue;
            State dest = e;
            for (State f : kAllStates) {
                if (threshold < rates[idx(f)]) {
                    dest = f;
                    break;
                }
                threshold -= rates[idx(f)];
            }
            if (dest == e) continue;
            ++jumps;
            states_[j] = dest;
            counts_[a][idx(e)] -= 1.0;
            counts_[a][idx(dest)] += 1.0;
            update_mass(a);
        }
    }

private:
    void set_control_node(std::size_t k) {
        if (k == control_node_) return;
        control_node_ = k;
        refresh_mass();
    }

    // Control-weighted K and I head counts per agent at the current control node.
    void refresh_mass() {
        mass_k_.assign(n_agents_, 0.0);
        mass_i_.assign(n_agents_, 0.0);
        for (std::size_t a = 0; a < n_agents_; ++a) update_mass(a);
    }

    void update_mass(std::size_t a) {
        const StateVector c = control_at(theta_, cfg_.control_source, a, control_node_);
        mass_k_[a] = c[idx(State::K)] * counts_[a][idx(State::K)];
        mass_i_[a] = c[idx(State::I)] * counts_[a][idx(State::I)];
    }

    AggregatePair agent_aggregate(std::size_t a) const {
        const double* row = game_.population.weights.data() + a * n_agents_;
        double zk = 0.0, zi = 0.0;
        for (std::size_t b = 0; b < n_agents_; ++b) {
            zk += row[b] * mass_k_[b];
            zi += row[b] * mass_i_[b];
        }
        const double inv = 1.0 / static_cast<double>(n_players_);
        return {zk * inv, zi * inv};
    }

    StateVector player_rates(std::size_t j) const {
        const std::size_t a = player_agent_[j];
        const State e = states_[j];
        const StateVector c = control_at(theta_, cfg_.control_source, a, control_node_);
        return exit_rates(e, c[idx(e)], agent_aggregate(a), policy_.at(control_node_), game_.rates[a]);
    }

    void record(std::size_t node, std::vector<StateVector>& fractions, std::vector<AggregatePair>& aggregates) const {
        const double inv = 1.0 / static_cast<double>(n_players_);
        StateVector f{};
        AggregatePair z{};
        for (std::size_t a = 0; a < n_agents_; ++a) {
            double players = 0.0;
            for (std::size_t e = 0; e < kNumStates; ++e) {
                f[e] += counts_[a][e];
                players += counts_[a][e];
            }
            if (players == 0.0) continue;
            const AggregatePair za = agent_aggregate(a);
            z.z_k += players * za.z_k;
            z.z_i += players * za.z_i;
        }
        for (double& v : f) v *= inv;
        fractions[node] = f;
        aggregates[node] = {z.z_k * inv, z.z_i * inv};
    }

    const GameInstance& game_;
    const PolicyProfile& policy_;
    const ControlField& theta_;
    const SimConfig& cfg_;
    std::span<const std::size_t> player_agent_;
    double cap_;
    std::size_t n_agents_;
    std::size_t n_players_;

    std::vector<State> states_;
    std::vector<StateVector> counts_;
    std::vector<double> mass_k_, mass_i_;
    std::size_t control_node_ = 0;
};

}  // namespace

EmpiricalFlow simulate(const GameInstance& game, const PolicyProfile& policy, const ControlField& theta,
                       const SimConfig& config, bool keep_paths) {
    game.validate();
    if (config.n_players == 0) throw std::invalid_argument("simulate: n_players must be positive");
    if (config.n_paths == 0) throw std::invalid_argument("simulate: n_paths must be positive");
    const std::size_t nodes = game.grid.nodes();
    if (config.control_source == ControlSource::equilibrium_field &&
        (theta.agents() != game.agents() || theta.nodes() != nodes))
        throw std::invalid_argument("simulate: control field does not match the game");

    EmpiricalFlow flow;
    flow.player_agent = assign_players(config.n_players, game.agents());
    flow.rate_cap = config.rate_cap > 0.0 ? config.rate_cap
                                          : automatic_rate_cap(game, policy, theta, config.control_source);
    flow.fractions.assign(nodes, StateVector{});
    flow.fraction_sd.assign(nodes, StateVector{});
    flow.mean_aggregates.assign(nodes, AggregatePair{});

    PathSimulator sim(game, policy, theta, config, flow.player_agent, flow.rate_cap);
    std::vector<StateVector> second(nodes, StateVector{});
    std::vector<StateVector> fractions;
    std::vector<AggregatePair> aggregates;
    for (std::size_t path = 0; path < config.n_paths; ++path) {
        sim.run(path, fractions, aggregates, flow.proposals, flow.jumps);
        for (std::size_t k = 0; k < nodes; ++k) {
            for (std::size_t e = 0; e < kNumStates; ++e) {
                flow.fractions[k][e] += fractions[k][e];
                second[k][e] += fractions[k][e] * fractions[k][e];
            }
            flow.mean_aggregates[k].z_k += aggregates[k].z_k;
            flow.mean_aggregates[k].z_i += aggregates[k].z_i;
        }
        if (keep_paths) flow.paths.push_back(fractions);
    }
    const double m = static_cast<double>(config.n_paths);
    for (std::size_t k = 0; k < nodes; ++k) {
        for (std::size_t e = 0; e < kNumStates; ++e) {
            flow.fractions[k][e] /= m;
            const double var = config.n_paths > 1 ? (second[k][e] - m * flow.fractions[k][e] * flow.fractions[k][e]) / (m - 1.0) : 0.0;
            flow.fraction_sd[k][e] = std::sqrt(std::max(var, 0.0));
        }
        flow.mean_aggregates[k].z_k /= m;
        flow.mean_aggregates[k].z_i /= m;
    }
    return flow;
}

}  // namespace skir
