#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "skir/graphon.hpp"

namespace skir {

/// SKIR states. The ordering S, K, I, R is the layout of every vector and matrix.
enum class State : std::size_t { S = 0, K = 1, I = 2, R = 3 };

inline constexpr std::size_t kNumStates = 4;
inline constexpr std::array<State, kNumStates> kAllStates{State::S, State::K, State::I, State::R};

constexpr std::size_t idx(State e) noexcept { return static_cast<std::size_t>(e); }
const char* state_name(State e) noexcept;

using StateVector = std::array<double, kNumStates>;
using RateMatrix = std::array<StateVector, kNumStates>;

/// Per-agent transition parameters.
struct Rates {
    double beta_s = 0.0;  // meeting intensity in S
    double beta_k = 0.0;  // meeting intensity in K
    double beta_i = 0.0;  // meeting intensity in I
    double mu_k = 0.1;    // K -> R uninterest rate
    double mu_i = 0.1;    // I -> R uninterest rate
    double eta = 0.0;     // R -> S forgetting rate

    double beta_max() const noexcept;
};

/// Throws std::invalid_argument if any rate is negative or a mu is not positive.
void validate(const Rates& r);

inline constexpr double kDefaultControlCap = 5.0;

/// A principal's instantaneous policy: phi rewards agents in her preferred
/// state, psi pushes transitions into it.
struct Policy {
    double phi = 0.0;
    double psi = 0.0;

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// Policies of principal K (prefers state K) and principal I (prefers state I).
/// In single-principal mode the I policy is ignored.
struct Incentives {
    Policy k;
    Policy i;
};

enum class PrincipalMode { single, duo };

/// Graphon-weighted neighbour communication mass in states K and I.
struct AggregatePair {
    double z_k = 0.0;
    double z_i = 0.0;
};

RateMatrix qmatrix_single(double alpha, AggregatePair z, Policy lambda, const Rates& r);
RateMatrix qmatrix_duo(double alpha, AggregatePair z, Policy lambda_k, Policy lambda_i, const Rates& r);

/// Off-diagonal rates out of `e` with the diagonal slot left at zero.
/// Mode-independent: single mode is the duo matrix with a zero I policy.
StateVector exit_rates(State e, double alpha, AggregatePair z, const Incentives& lam, const Rates& r);

double running_cost(PrincipalMode mode, State e, double alpha, double phi_k, double phi_i = 0.0);

/// Closed-form minimiser of the Hamiltonian in alpha, projected onto [0, a_bar].
double optimal_control(PrincipalMode mode, State e, AggregatePair z, const StateVector& u, double phi_k,
                       double phi_i, const Rates& r, double a_bar);

/// First-order value before projection; used to tell interior from boundary cases.
double unprojected_control(PrincipalMode mode, State e, AggregatePair z, const StateVector& u, double phi_k,
                           double phi_i, const Rates& r);

/// sum_e' q(e, e') u(e') + f(e, alpha), diagonal included.
double hamiltonian(PrincipalMode mode, State e, AggregatePair z, const StateVector& u, double alpha,
                   const Incentives& lam, const Rates& r);

/// Z_K[x] = (1/n) sum_y W[x][y] theta[y][K] p[y][K], Z_I likewise.
std::vector<AggregatePair> compute_aggregates(const AgentPopulation& pop, std::span<const StateVector> theta,
                                              std::span<const StateVector> p);

}  // namespace skir
