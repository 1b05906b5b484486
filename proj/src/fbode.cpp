#include "skir/fbode.hpp"
#include "skir/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace skir {

void TimeGrid::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("time grid: horizon must be positive");
    if (n_steps < 2) throw std::invalid_argument("time grid: n_steps must be at least 2");
}

PolicyPath PolicyPath::constant_path(Policy lambda, const TimeGrid& grid) {
    if (!(lambda.phi >= 0.0 && lambda.psi >= 0.0)) throw std::invalid_argument("policy must be nonnegative");
    return PolicyPath{std::vector<Policy>(grid.nodes(), lambda), true};
}

double PolicyPath::phi_max() const noexcept {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, v.phi);
    return m;
}

double PolicyPath::psi_max() const noexcept {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, v.psi);
    return m;
}

PolicyProfile PolicyProfile::single(PolicyPath lambda) {
    PolicyPath zero{std::vector<Policy>(lambda.values.size()), true};
    return PolicyProfile{PrincipalMode::single, std::move(lambda), std::move(zero)};
}

PolicyProfile PolicyProfile::duo(PolicyPath lambda_k, PolicyPath lambda_i) {
    if (lambda_k.values.size() != lambda_i.values.size())
        throw std::invalid_argument("duo policy paths must share the time grid");
    return PolicyProfile{PrincipalMode::duo, std::move(lambda_k), std::move(lambda_i)};
}

PolicyProfile PolicyProfile::none(const TimeGrid& grid) {
    return single(PolicyPath::constant_path(Policy{}, grid));
}

Incentives PolicyProfile::at(std::size_t node) const {
    if (mode == PrincipalMode::single) return Incentives{k.at(node), Policy{}};
    return Incentives{k.at(node), i.at(node)};
}

void GameInstance::validate() const {
    grid.validate();
    const std::size_t n = agents();
    if (n == 0) throw std::invalid_argument("game: empty population");
    if (rates.size() != n) throw std::invalid_argument(fmt::format("game: {} rate sets for {} agents", rates.size(), n));
    if (initial.size() != n)
        throw std::invalid_argument(fmt::format("game: {} initial distributions for {} agents", initial.size(), n));
    if (!(a_bar > 0.0)) throw std::invalid_argument("game: a_bar must be positive");
    for (const auto& r : rates) skir::validate(r);
    for (const auto& p0 : initial) {
        double s = 0.0;
        for (double v : p0) {
            if (!(v >= 0.0)) throw std::invalid_argument("game: initial distribution has a negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("game: initial distribution does not sum to 1");
    }
}

namespace {

// Lagrange weights that interpolate node values at the midpoint of each
// interval [k, k+1], using the four nearest nodes (three on a two-step grid).
class MidpointStencils {
public:
    explicit MidpointStencils(std::size_t nodes) : nodes_(nodes) {
        const std::size_t m = std::min<std::size_t>(4, nodes);
        width_ = m;
        first_.resize(nodes - 1);
        weights_.resize(nodes - 1);
        for (std::size_t k = 0; k + 1 < nodes; ++k) {
            const long start = std::clamp<long>(static_cast<long>(k) - static_cast<long>(m / 2 - 1), 0,
                                                static_cast<long>(nodes - m));
            first_[k] = static_cast<std::size_t>(start);
            const double x = static_cast<double>(k) + 0.5;
            for (std::size_t j = 0; j < m; ++j) {
                double w = 1.0;
                const double xj = static_cast<double>(start) + static_cast<double>(j);
                for (std::size_t l = 0; l < m; ++l) {
                    if (l == j) continue;
                    const double xl = static_cast<double>(start) + static_cast<double>(l);
                    w *= (x - xl) / (xj - xl);
                }
                weights_[k][j] = w;
            }
        }
    }

    template <class T>
    T operator()(std::span<const T> values, std::size_t k) const {
        T out{};
        for (std::size_t j = 0; j < width_; ++j) accumulate(out, values[first_[k] + j], weights_[k][j]);
        return out;
    }

private:
    static void accumulate(StateVector& out, const StateVector& v, double w) {
        for (std::size_t e = 0; e < kNumStates; ++e) out[e] += w * v[e];
    }
    static void accumulate(AggregatePair& out, const AggregatePair& v, double w) {
        out.z_k += w * v.z_k;
        out.z_i += w * v.z_i;
    }
    static void accumulate(Policy& out, const Policy& v, double w) {
        out.phi += w * v.phi;
        out.psi += w * v.psi;
    }

    std::size_t nodes_;
    std::size_t width_ = 0;
    std::vector<std::size_t> first_;
    std::vector<std::array<double, 4>> weights_;
};

AggregatePair nonnegative(AggregatePair z) { return {std::max(z.z_k, 0.0), std::max(z.z_i, 0.0)}; }
Policy nonnegative(Policy p) { return {std::max(p.phi, 0.0), std::max(p.psi, 0.0)}; }

StateVector clamp_controls(StateVector th, double a_bar) {
    for (double& v : th) v = std::clamp(v, 0.0, a_bar);
    return th;
}

// Incentives at the midpoint of interval k.
Incentives mid_incentives(const PolicyProfile& policy, const MidpointStencils& mid, std::size_t k) {
    if (policy.k.constant && policy.i.constant) return policy.at(k);
    const std::span<const Policy> pk(policy.k.values), pi(policy.i.values);
    Incentives lam{nonnegative(mid(pk, k)), nonnegative(mid(pi, k))};
    if (policy.mode == PrincipalMode::single) lam.i = Policy{};
    return lam;
}

RateMatrix generator(const StateVector& theta, AggregatePair z, const Incentives& lam, const Rates& r) {
    RateMatrix q{};
    for (State e : kAllStates) {
        q[idx(e)] = exit_rates(e, theta[idx(e)], z, lam, r);
        double total = 0.0;
        for (double v : q[idx(e)]) total += v;
        q[idx(e)][idx(e)] = -total;
    }
    return q;
}

StateVector left_multiply(const StateVector& p, const RateMatrix& q) {
    StateVector out{};
    for (std::size_t i = 0; i < kNumStates; ++i) {
        const double pi = p[i];
        for (std::size_t j = 0; j < kNumStates; ++j) out[j] += pi * q[i][j];
    }
    return out;
}

StateVector axpy(const StateVector& x, double a, const StateVector& y) {
    StateVector out;
    for (std::size_t e = 0; e < kNumStates; ++e) out[e] = x[e] + a * y[e];
    return out;
}

double max_exit_rate(const RateMatrix& q) {
    double m = 0.0;
    for (std::size_t e = 0; e < kNumStates; ++e) m = std::max(m, -q[e][e]);
    return m;
}

// Explicit-scheme stability bound on rate * dt along the negative real axis.
double stability_limit(Integrator integrator) { return integrator == Integrator::euler ? 1.0 : 2.78; }

void guard_simplex(StateVector& p, std::size_t agent, std::size_t node) {
    bool clipped = false;
    for (double& v : p) {
        if (!std::isfinite(v))
            throw DivergedError(fmt::format("KFP produced a non-finite density (agent {}, node {})", agent, node));
        if (v < 0.0) {
            if (v < -1e-10)
                throw DivergedError(fmt::format("KFP density {} below -1e-10 (agent {}, node {})", v, agent, node));
            v = 0.0;
            clipped = true;
        }
    }
    if (clipped) {
        double s = 0.0;
        for (double v : p) s += v;
        for (double& v : p) v /= s;
    }
}

// Derivative of the value function: du/dt(e) = -H(e, theta*(e)) together with
// the minimising controls.
StateVector hjb_rhs(PrincipalMode mode, const StateVector& u, AggregatePair z, const Incentives& lam, const Rates& r,
                    double a_bar, StateVector* controls = nullptr) {
    for (double x : u)
        if (!std::isfinite(x)) throw DivergedError("HJB produced a non-finite value at an intermediate stage");
    StateVector du;
    for (State e : kAllStates) {
        const double th = optimal_control(mode, e, z, u, lam.k.phi, lam.i.phi, r, a_bar);
        if (controls) (*controls)[idx(e)] = th;
        du[idx(e)] = -hamiltonian(mode, e, z, u, th, lam, r);
    }
    return du;
}

void check_finite(const StateVector& v, const char* what, std::size_t agent, std::size_t node) {
    for (double x : v)
        if (!std::isfinite(x))
            throw DivergedError(fmt::format("{} produced a non-finite value (agent {}, node {})", what, agent, node));
}

void check_shapes(const GameInstance& game, std::size_t agents, std::size_t nodes, const char* what) {
    if (agents != game.agents() || nodes != game.grid.nodes())
        throw std::invalid_argument(fmt::format("{}: field is {}x{}, expected {}x{}", what, agents, nodes,
                                                game.agents(), game.grid.nodes()));
}

}  // namespace

DensityFlow solve_kfp(const GameInstance& game, const ControlField& theta, const AggregateField& z,
                      const PolicyProfile& policy, Integrator integrator) {
    const std::size_t n = game.agents();
    const std::size_t nodes = game.grid.nodes();
    check_shapes(game, theta.agents(), theta.nodes(), "solve_kfp theta");
    check_shapes(game, z.agents(), z.nodes(), "solve_kfp aggregates");
    const double h = game.grid.dt();
    const double limit = stability_limit(integrator);
    const MidpointStencils mid(nodes);

    DensityFlow p(n, nodes);
    for (std::size_t a = 0; a < n; ++a) {
        const Rates& r = game.rates[a];
        const auto th = theta.agent(a);
        const auto za = z.agent(a);
        StateVector state = game.initial[a];
        p(a, 0) = state;
        RateMatrix q_left = generator(th[0], za[0], policy.at(0), r);
        for (std::size_t k = 0; k + 1 < nodes; ++k) {
            const RateMatrix q_right = generator(th[k + 1], za[k + 1], policy.at(k + 1), r);
            if (max_exit_rate(q_left) * h >= limit)
                throw StabilityError(fmt::format("KFP step dt = {} too large: exit rate {} at agent {}, node {}", h,
                                                 max_exit_rate(q_left), a, k));
            if (integrator == Integrator::euler) {
                state = axpy(state, h, left_multiply(state, q_left));
            } else {
                const RateMatrix q_mid = generator(clamp_controls(mid(th, k), game.a_bar), nonnegative(mid(za, k)),
                                                   mid_incentives(policy, mid, k), r);
                if (max_exit_rate(q_mid) * h >= limit)
                    throw StabilityError(fmt::format("KFP step dt = {} too large at agent {}, node {}", h, a, k));
                const StateVector k1 = left_multiply(state, q_left);
                const StateVector k2 = left_multiply(axpy(state, 0.5 * h, k1), q_mid);
                const StateVector k3 = left_multiply(axpy(state, 0.5 * h, k2), q_mid);
                const StateVector k4 = left_multiply(axpy(state, h, k3), q_right);
                for (std::size_t e = 0; e < kNumStates; ++e)
                    state[e] += h / 6.0 * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]);
            }
            guard_simplex(state, a, k + 1);
            p(a, k + 1) = state;
            q_left = q_right;
        }
    }
    return p;
}

HjbSolution solve_hjb(const GameInstance& game, const AggregateField& z, const PolicyProfile& policy,
                      Integrator integrator) {
    const std::size_t n = game.agents();
    const std::size_t nodes = game.grid.nodes();
    check_shapes(game, z.agents(), z.nodes(), "solve_hjb aggregates");
    const double h = game.grid.dt();
    const MidpointStencils mid(nodes);
    const PrincipalMode mode = policy.mode;

    HjbSolution out{ValueFlow(n, nodes), ControlField(n, nodes)};
    for (std::size_t a = 0; a < n; ++a) {
        const Rates& r = game.rates[a];
        const auto za = z.agent(a);
        StateVector u{};
        StateVector controls{};
        out.u(a, nodes - 1) = u;
        hjb_rhs(mode, u, za[nodes - 1], policy.at(nodes - 1), r, game.a_bar, &controls);
        out.theta(a, nodes - 1) = controls;
        for (std::size_t k = nodes - 1; k-- > 0;) {
            // Integrate in reversed time s = T - t, where dv/ds = -du/dt.
            const Incentives lam_right = policy.at(k + 1);
            const StateVector k1 = hjb_rhs(mode, u, za[k + 1], lam_right, r, game.a_bar);
            if (integrator == Integrator::euler) {
                u = axpy(u, -h, k1);
            } else {
                const AggregatePair zm = nonnegative(mid(za, k));
                const Incentives lam_mid = mid_incentives(policy, mid, k);
                const StateVector k2 = hjb_rhs(mode, axpy(u, -0.5 * h, k1), zm, lam_mid, r, game.a_bar);
                const StateVector k3 = hjb_rhs(mode, axpy(u, -0.5 * h, k2), zm, lam_mid, r, game.a_bar);
                const StateVector k4 = hjb_rhs(mode, axpy(u, -h, k3), za[k], policy.at(k), r, game.a_bar);
                for (std::size_t e = 0; e < kNumStates; ++e)
                    u[e] -= h / 6.0 * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]);
            }
            check_finite(u, "HJB", a, k);
            out.u(a, k) = u;
            hjb_rhs(mode, u, za[k], policy.at(k), r, game.a_bar, &controls);
            out.theta(a, k) = controls;
        }
    }
    return out;
}

AggregateField aggregate_field(const AgentPopulation& pop, const ControlField& theta, const DensityFlow& p) {
    const std::size_t n = pop.size();
    const std::size_t nodes = theta.nodes();
    if (theta.agents() != n || p.agents() != n || p.nodes() != nodes)
        throw std::invalid_argument("aggregate_field: dimension mismatch");
    AggregateField z(n, nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        const auto th = theta.at_node(k);
        const auto pk = p.at_node(k);
        const auto zk = compute_aggregates(pop, th, pk);
        for (std::size_t a = 0; a < n; ++a) z(a, k) = zk[a];
    }
    return z;
}

ControlField control_field(const GameInstance& game, const ValueFlow& u, const AggregateField& z,
                           const PolicyProfile& policy) {
    const std::size_t n = game.agents();
    const std::size_t nodes = game.grid.nodes();
    ControlField theta(n, nodes);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t k = 0; k < nodes; ++k) {
            const Incentives lam = policy.at(k);
            for (State e : kAllStates)
                theta(a, k)[idx(e)] = optimal_control(policy.mode, e, z(a, k), u(a, k), lam.k.phi, lam.i.phi,
                                                      game.rates[a], game.a_bar);
        }
    }
    return theta;
}

double sup_distance(const NodeField<StateVector>& a, const NodeField<StateVector>& b) {
    if (a.agents() != b.agents() || a.nodes() != b.nodes()) throw std::invalid_argument("sup_distance: shape mismatch");
    double m = 0.0;
    for (std::size_t x = 0; x < a.agents(); ++x)
        for (std::size_t k = 0; k < a.nodes(); ++k)
            for (std::size_t e = 0; e < kNumStates; ++e) m = std::max(m, std::abs(a(x, k)[e] - b(x, k)[e]));
    return m;
}

EquilibriumSolution ggne_fixed_point(const GameInstance& game, const PolicyProfile& policy,
                                     const SolverOptions& options) {
    game.validate();
    if (!(options.tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
    if (options.max_iter < 1) throw std::invalid_argument("solver: max_iter must be at least 1");
    if (!(options.damping > 0.0 && options.damping <= 1.0))
        throw std::invalid_argument("solver: damping must lie in (0, 1]");
    const std::size_t n = game.agents();
    const std::size_t nodes = game.grid.nodes();
    if (policy.k.values.size() != nodes || policy.i.values.size() != nodes)
        throw std::invalid_argument("solver: policy path does not match the time grid");

    EquilibriumSolution sol;
    sol.theta = ControlField(n, nodes, StateVector{1.0, 1.0, 1.0, 1.0});
    sol.u = ValueFlow(n, nodes);
    sol.p = DensityFlow(n, nodes);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t k = 0; k < nodes; ++k) sol.p(a, k) = game.initial[a];

    for (int it = 1; it <= options.max_iter; ++it) {
        AggregateField candidate = aggregate_field(game.population, sol.theta, sol.p);
        if (it == 1 || options.damping == 1.0) {
            sol.z = std::move(candidate);
        } else {
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t k = 0; k < nodes; ++k) {
                    auto& z = sol.z(a, k);
                    z.z_k = (1.0 - options.damping) * z.z_k + options.damping * candidate(a, k).z_k;
                    z.z_i = (1.0 - options.damping) * z.z_i + options.damping * candidate(a, k).z_i;
                }
            }
        }
        const ControlField theta = control_field(game, sol.u, sol.z, policy);
        DensityFlow p_next = solve_kfp(game, theta, sol.z, policy, options.integrator);
        HjbSolution hjb = solve_hjb(game, sol.z, policy, options.integrator);

        const double residual = std::max(sup_distance(hjb.u, sol.u), sup_distance(p_next, sol.p));
        if (!std::isfinite(residual)) throw DivergedError(fmt::format("fixed point diverged at iteration {}", it));
        sol.residual_history.push_back(residual);
        sol.u = std::move(hjb.u);
        sol.theta = std::move(hjb.theta);
        sol.p = std::move(p_next);
        sol.iterations = it;
        if (residual <= options.tol) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

std::vector<StateVector> EquilibriumSolution::mean_density() const {
    std::vector<StateVector> mean(p.nodes(), StateVector{});
    const double w = 1.0 / static_cast<double>(p.agents());
    for (std::size_t a = 0; a < p.agents(); ++a)
        for (std::size_t k = 0; k < p.nodes(); ++k)
            for (std::size_t e = 0; e < kNumStates; ++e) mean[k][e] += w * p(a, k)[e];
    return mean;
}

ShortTimeCheck check_short_time(std::span<const Rates> rates, double a_bar, double phi_bar, double horizon) {
    double beta_bar = 0.0;
    for (const auto& r : rates) beta_bar = std::max(beta_bar, r.beta_max());
    const double bracket = 0.5 * std::max((a_bar - 1.0) * (a_bar - 1.0), 1.0) + phi_bar * a_bar;
    const double value = horizon * beta_bar * bracket;
    return {value < 1.0, value};
}

double evaluate_agent_cost(const GameInstance& game, std::size_t agent, std::span<const StateVector> control,
                           std::span<const AggregatePair> z, const PolicyProfile& policy, Integrator integrator) {
    const std::size_t nodes = game.grid.nodes();
    if (agent >= game.agents()) throw std::out_of_range("evaluate_agent_cost: agent out of range");
    if (control.size() != nodes || z.size() != nodes)
        throw std::invalid_argument("evaluate_agent_cost: paths must cover the time grid");
    const Rates& r = game.rates[agent];
    const double h = game.grid.dt();
    const MidpointStencils mid(nodes);

    // Augmented state: (p, accumulated cost).
    auto rhs = [&](const StateVector& p, const StateVector& alpha, AggregatePair zt, const Incentives& lam,
                   double& cost_rate) {
        cost_rate = 0.0;
        for (State e : kAllStates)
            cost_rate += p[idx(e)] * running_cost(policy.mode, e, alpha[idx(e)], lam.k.phi, lam.i.phi);
        return left_multiply(p, generator(alpha, zt, lam, r));
    };

    StateVector p = game.initial[agent];
    double cost = 0.0;
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
        const StateVector a_left = clamp_controls(control[k], game.a_bar);
        if (integrator == Integrator::euler) {
            const StateVector k1 = rhs(p, a_left, z[k], policy.at(k), c1);
            p = axpy(p, h, k1);
            cost += h * c1;
            continue;
        }
        const StateVector a_mid = clamp_controls(mid(control, k), game.a_bar);
        const StateVector a_right = clamp_controls(control[k + 1], game.a_bar);
        const AggregatePair zm = nonnegative(mid(z, k));
        const Incentives lm = mid_incentives(policy, mid, k);
        const StateVector k1 = rhs(p, a_left, z[k], policy.at(k), c1);
        const StateVector k2 = rhs(axpy(p, 0.5 * h, k1), a_mid, zm, lm, c2);
        const StateVector k3 = rhs(axpy(p, 0.5 * h, k2), a_mid, zm, lm, c3);
        const StateVector k4 = rhs(axpy(p, h, k3), a_right, z[k + 1], policy.at(k + 1), c4);
        for (std::size_t e = 0; e < kNumStates; ++e) p[e] += h / 6.0 * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]);
        cost += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    }
    return cost;
}

}  // namespace skir
