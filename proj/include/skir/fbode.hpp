#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "skir/graphon.hpp"
#include "skir/model.hpp"

namespace skir {

struct TimeGrid {
    double horizon = 10.0;
    int n_steps = 200;

    double dt() const noexcept { return horizon / n_steps; }
    double time(std::size_t k) const noexcept { return horizon * static_cast<double>(k) / n_steps; }
    std::size_t nodes() const noexcept { return static_cast<std::size_t>(n_steps) + 1; }
    void validate() const;
};

/// Per-agent, per-grid-node storage, agent-major.
template <class T>
class NodeField {
public:
    NodeField() = default;
    NodeField(std::size_t agents, std::size_t nodes, const T& init = T{})
        : agents_(agents), nodes_(nodes), data_(agents * nodes, init) {}

    std::size_t agents() const noexcept { return agents_; }
    std::size_t nodes() const noexcept { return nodes_; }

    T& operator()(std::size_t a, std::size_t k) { return data_[a * nodes_ + k]; }
    const T& operator()(std::size_t a, std::size_t k) const { return data_[a * nodes_ + k]; }

    std::span<T> agent(std::size_t a) { return {data_.data() + a * nodes_, nodes_}; }
    std::span<const T> agent(std::size_t a) const { return {data_.data() + a * nodes_, nodes_}; }

    std::vector<T> at_node(std::size_t k) const {
        std::vector<T> out(agents_);
        for (std::size_t a = 0; a < agents_; ++a) out[a] = (*this)(a, k);
        return out;
    }

private:
    std::size_t agents_ = 0;
    std::size_t nodes_ = 0;
    std::vector<T> data_;
};

using DensityFlow = NodeField<StateVector>;
using ValueFlow = NodeField<StateVector>;
using ControlField = NodeField<StateVector>;
using AggregateField = NodeField<AggregatePair>;

/// A principal's policy sampled at the grid nodes.
struct PolicyPath {
    std::vector<Policy> values;
    bool constant = true;

    static PolicyPath constant_path(Policy lambda, const TimeGrid& grid);
    Policy at(std::size_t k) const { return values.at(k); }
    double phi_max() const noexcept;
    double psi_max() const noexcept;
};

struct PolicyProfile {
    PrincipalMode mode = PrincipalMode::single;
    PolicyPath k;
    PolicyPath i;  // all zeros in single mode

    static PolicyProfile single(PolicyPath lambda);
    static PolicyProfile duo(PolicyPath lambda_k, PolicyPath lambda_i);
    static PolicyProfile none(const TimeGrid& grid);

    Incentives at(std::size_t node) const;
};

/// Everything that is fixed while the principals' policy varies.
struct GameInstance {
    AgentPopulation population;
    std::vector<Rates> rates;           // one per agent
    std::vector<StateVector> initial;   // one per agent, on the simplex
    TimeGrid grid;
    double a_bar = kDefaultControlCap;

    std::size_t agents() const noexcept { return population.size(); }
    void validate() const;
};

enum class Integrator { rk4, euler };

struct SolverOptions {
    double tol = 1e-6;
    int max_iter = 500;
    double damping = 1.0;  // Z <- (1 - damping) Z + damping Z_candidate
    Integrator integrator = Integrator::rk4;
};

struct EquilibriumSolution {
    ValueFlow u;
    DensityFlow p;
    AggregateField z;
    ControlField theta;
    int iterations = 0;
    std::vector<double> residual_history;
    bool converged = false;

    /// Agent-averaged density (1/n) sum_x p[x][t] at every node.
    std::vector<StateVector> mean_density() const;
};

struct HjbSolution {
    ValueFlow u;
    ControlField theta;
};

/// Forward Kolmogorov equation dp/dt = p Q(theta, Z, lambda) for every agent.
/// theta, Z and lambda are node values; RK4 evaluates them at half steps by
/// cubic interpolation on the node stencil.
DensityFlow solve_kfp(const GameInstance& game, const ControlField& theta, const AggregateField& z,
                      const PolicyProfile& policy, Integrator integrator = Integrator::rk4);

/// Backward HJB system du/dt = -min_alpha H from u(T) = 0, with the minimising
/// control recomputed at every stage.
HjbSolution solve_hjb(const GameInstance& game, const AggregateField& z, const PolicyProfile& policy,
                      Integrator integrator = Integrator::rk4);

AggregateField aggregate_field(const AgentPopulation& pop, const ControlField& theta, const DensityFlow& p);

/// Optimal controls for given values and aggregates at every node.
ControlField control_field(const GameInstance& game, const ValueFlow& u, const AggregateField& z,
                           const PolicyProfile& policy);

/// Fixed-point iteration over aggregates and controls, starting from theta = 1
/// and p frozen at the initial distribution. Non-convergence is reported through
/// `converged`; non-finite values raise DivergedError.
EquilibriumSolution ggne_fixed_point(const GameInstance& game, const PolicyProfile& policy,
                                     const SolverOptions& options = {});

struct ShortTimeCheck {
    bool satisfied = false;
    double value = 0.0;
};

/// T * beta_bar * [ max((a_bar - 1)^2, 1) / 2 + phi_bar * a_bar ], compared against 1.
ShortTimeCheck check_short_time(std::span<const Rates> rates, double a_bar, double phi_bar, double horizon);

/// Expected running cost of one agent who plays the Markov control `control`
/// (per node, per state) against frozen aggregates.
double evaluate_agent_cost(const GameInstance& game, std::size_t agent, std::span<const StateVector> control,
                           std::span<const AggregatePair> z, const PolicyProfile& policy,
                           Integrator integrator = Integrator::rk4);

/// Largest |a - b| over all entries.
double sup_distance(const NodeField<StateVector>& a, const NodeField<StateVector>& b);

}  // namespace skir
