#include "skir/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace skir {

const char* state_name(State e) noexcept {
    switch (e) {
        case State::S: return "S";
        case State::K: return "K";
        case State::I: return "I";
        case State::R: return "R";
    }
    return "?";
}

double Rates::beta_max() const noexcept { return std::max({beta_s, beta_k, beta_i}); }

void validate(const Rates& r) {
    if (!(r.beta_s >= 0.0 && r.beta_k >= 0.0 && r.beta_i >= 0.0))
        throw std::invalid_argument("meeting intensities must be nonnegative");
    if (!(r.mu_k > 0.0 && r.mu_i > 0.0)) throw std::invalid_argument("uninterest rates must be positive");
    if (!(r.eta >= 0.0)) throw std::invalid_argument("forgetting rate must be nonnegative");
}

namespace {

void check_inputs(double alpha, AggregatePair z, const Incentives& lam) {
    if (!(alpha >= 0.0)) throw std::invalid_argument(fmt::format("control {} is negative", alpha));
    if (!(z.z_k >= 0.0 && z.z_i >= 0.0))
        throw std::invalid_argument(fmt::format("aggregates ({}, {}) must be nonnegative", z.z_k, z.z_i));
    if (!(lam.k.psi >= 0.0 && lam.i.psi >= 0.0 && lam.k.phi >= 0.0 && lam.i.phi >= 0.0))
        throw std::invalid_argument("policies must be nonnegative");
}

RateMatrix assemble(double alpha, AggregatePair z, const Incentives& lam, const Rates& r) {
    RateMatrix q{};
    for (State e : kAllStates) {
        q[idx(e)] = exit_rates(e, alpha, z, lam, r);
        double total = 0.0;
        for (double v : q[idx(e)]) total += v;
        q[idx(e)][idx(e)] = -total;
    }
    return q;
}

}  // namespace

StateVector exit_rates(State e, double alpha, AggregatePair z, const Incentives& lam, const Rates& r) {
    StateVector out{};
    switch (e) {
        case State::S:
            out[idx(State::K)] = r.beta_s * alpha * z.z_k + lam.k.psi;
            out[idx(State::I)] = r.beta_s * alpha * z.z_i + lam.i.psi;
            break;
        case State::K:
            out[idx(State::I)] = r.beta_k * alpha * z.z_i + lam.i.psi;
            out[idx(State::R)] = r.mu_k;
            break;
        case State::I:
            out[idx(State::K)] = r.beta_i * alpha * z.z_k + lam.k.psi;
            out[idx(State::R)] = r.mu_i;
            break;
        case State::R:
            out[idx(State::S)] = r.eta;
            break;
    }
    return out;
}

RateMatrix qmatrix_single(double alpha, AggregatePair z, Policy lambda, const Rates& r) {
    const Incentives lam{lambda, Policy{}};
    check_inputs(alpha, z, lam);
    return assemble(alpha, z, lam, r);
}

RateMatrix qmatrix_duo(double alpha, AggregatePair z, Policy lambda_k, Policy lambda_i, const Rates& r) {
    const Incentives lam{lambda_k, lambda_i};
    check_inputs(alpha, z, lam);
    return assemble(alpha, z, lam, r);
}

double running_cost(PrincipalMode mode, State e, double alpha, double phi_k, double phi_i) {
    if (!(alpha >= 0.0)) throw std::invalid_argument(fmt::format("control {} is negative", alpha));
    double f = 0.5 * (1.0 - alpha) * (1.0 - alpha);
    if (e == State::K) f -= phi_k * alpha;
    if (mode == PrincipalMode::duo && e == State::I) f -= phi_i * alpha;
    return f;
}

double unprojected_control(PrincipalMode mode, State e, AggregatePair z, const StateVector& u, double phi_k,
                           double phi_i, const Rates& r) {
    const double us = u[idx(State::S)], uk = u[idx(State::K)], ui = u[idx(State::I)];
    switch (e) {
        case State::S: return r.beta_s * z.z_k * (us - uk) + r.beta_s * z.z_i * (us - ui) + 1.0;
        case State::K: return r.beta_k * z.z_i * (uk - ui) + 1.0 + phi_k;
        case State::I: return r.beta_i * z.z_k * (ui - uk) + 1.0 + (mode == PrincipalMode::duo ? phi_i : 0.0);
        case State::R: return 1.0;
    }
    return 1.0;
}

double optimal_control(PrincipalMode mode, State e, AggregatePair z, const StateVector& u, double phi_k,
                       double phi_i, const Rates& r, double a_bar) {
    return std::clamp(unprojected_control(mode, e, z, u, phi_k, phi_i, r), 0.0, a_bar);
}

double hamiltonian(PrincipalMode mode, State e, AggregatePair z, const StateVector& u, double alpha,
                   const Incentives& lam, const Rates& r) {
    Incentives eff = lam;
    if (mode == PrincipalMode::single) eff.i = Policy{};
    const StateVector out = exit_rates(e, alpha, z, eff, r);
    double h = 0.0;
    for (std::size_t j = 0; j < kNumStates; ++j) h += out[j] * (u[j] - u[idx(e)]);
    return h + running_cost(mode, e, alpha, eff.k.phi, eff.i.phi);
}

std::vector<AggregatePair> compute_aggregates(const AgentPopulation& pop, std::span<const StateVector> theta,
                                              std::span<const StateVector> p) {
    const std::size_t n = pop.size();
    if (theta.size() != n || p.size() != n)
        throw std::invalid_argument(
            fmt::format("compute_aggregates: expected {} agents, got theta {} and p {}", n, theta.size(), p.size()));
    std::vector<double> mass_k(n), mass_i(n);
    for (std::size_t y = 0; y < n; ++y) {
        mass_k[y] = theta[y][idx(State::K)] * p[y][idx(State::K)];
        mass_i[y] = theta[y][idx(State::I)] * p[y][idx(State::I)];
    }
    std::vector<AggregatePair> z(n);
    const double h = pop.quad_weight();
    for (std::size_t x = 0; x < n; ++x) {
        const double* row = pop.weights.data() + x * n;
        double zk = 0.0, zi = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            zk += row[y] * mass_k[y];
            zi += row[y] * mass_i[y];
        }
        z[x] = {zk * h, zi * h};
    }
    return z;
}

}  // namespace skir
