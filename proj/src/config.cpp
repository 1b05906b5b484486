#include "skir/config.hpp"
#include "skir/error.hpp"

#include <charconv>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace skir {

const char* to_string(RunMode mode) noexcept {
    switch (mode) {
        case RunMode::ggne: return "ggne";
        case RunMode::sgge: return "sgge";
        case RunMode::dsge: return "dsge";
    }
    return "?";
}

std::optional<RunMode> parse_run_mode(const std::string& s) {
    if (s == "ggne" || s == "ggne_only") return RunMode::ggne;
    if (s == "sgge") return RunMode::sgge;
    if (s == "dsge") return RunMode::dsge;
    return std::nullopt;
}

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"experiment", {"mode", "seed", "output_dir"}},
        {"graphon", {"kind", "c", "exponent", "block_lengths", "block_matrix", "w0"}},
        {"population", {"n_agents", "sampling"}},
        {"params", {"beta_S", "beta_K", "beta_I", "mu_K", "mu_I", "eta", "a_bar"}},
        {"time", {"horizon", "n_steps"}},
        {"initial", {"distribution"}},
        {"policy",
         {"phi_bar", "psi_bar", "n_phi", "n_psi", "c_lambda", "c_lambda_I", "phi", "psi", "phi_I", "psi_I"}},
        {"solver", {"tol", "max_iter", "damping", "integrator"}},
        {"simulation", {"enabled", "n_players", "n_paths", "seed", "rate_cap", "control_source"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

class Reader {
public:
    Reader(const pt::ptree& tree, std::vector<std::string>& issues) : tree_(tree), issues_(issues) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key) const {
        const auto sec = tree_.get_child_optional(section);
        if (!sec) return std::nullopt;
        const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        if (!v) return std::nullopt;
        return trim(*v);
    }

    bool has(const std::string& section, const std::string& key) const { return raw(section, key).has_value(); }

    std::optional<double> real(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        const auto d = to_double(*v);
        if (!d) issues_.push_back(fmt::format("{}.{}: expected a number, got '{}'", section, key, *v));
        return d;
    }

    template <class Int>
    std::optional<Int> integer(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        Int x{};
        const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
        if (v->empty() || ec != std::errc{} || end != v->data() + v->size() || x < Int{0}) {
            issues_.push_back(fmt::format("{}.{}: expected a nonnegative integer, got '{}'", section, key, *v));
            return std::nullopt;
        }
        return x;
    }

    std::optional<bool> boolean(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        issues_.push_back(fmt::format("{}.{}: expected true or false, got '{}'", section, key, *v));
        return std::nullopt;
    }

    std::optional<std::vector<double>> list(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        std::vector<double> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto d = to_double(trim(item));
            if (!d) {
                issues_.push_back(fmt::format("{}.{}: '{}' is not a number", section, key, trim(item)));
                return std::nullopt;
            }
            out.push_back(*d);
        }
        if (out.empty()) {
            issues_.push_back(fmt::format("{}.{}: empty list", section, key));
            return std::nullopt;
        }
        return out;
    }

    static std::optional<double> to_double(const std::string& s) {
        if (s.empty()) return std::nullopt;
        errno = 0;
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (*end != '\0' || errno == ERANGE || !std::isfinite(d)) return std::nullopt;
        return d;
    }

private:
    const pt::ptree& tree_;
    std::vector<std::string>& issues_;
};

void check_unknown(const pt::ptree& tree, std::vector<std::string>& issues) {
    for (const auto& [section, body] : tree) {
        const auto it = schema().find(section);
        if (it == schema().end()) {
            if (body.empty())
                issues.push_back(fmt::format("{}: key outside any section", section));
            else
                issues.push_back(fmt::format("{}: unknown section", section));
            continue;
        }
        for (const auto& [key, value] : body) {
            (void)value;
            if (!it->second.count(key)) issues.push_back(fmt::format("{}.{}: unknown key", section, key));
        }
    }
}

std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += fmt::format("{}{:.17g}", k ? ", " : "", v[k]);
    return out;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({fmt::format("line {}: {}", e.line(), e.message())});
    }

    std::vector<std::string> issues;
    check_unknown(tree, issues);
    Reader rd(tree, issues);
    ExperimentConfig cfg;

    if (auto v = rd.raw("experiment", "mode")) {
        if (auto m = parse_run_mode(*v))
            cfg.mode = *m;
        else
            issues.push_back(fmt::format("experiment.mode: expected ggne, sgge or dsge, got '{}'", *v));
    }
    if (auto v = rd.integer<std::uint64_t>("experiment", "seed")) cfg.seed = *v;
    if (auto v = rd.raw("experiment", "output_dir")) cfg.output_dir = *v;

    // Graphon: keys that the chosen kind does not use are rejected.
    const std::string kind = rd.raw("graphon", "kind").value_or("constant");
    std::set<std::string> used{"kind"};
    if (kind == "power_law") {
        PowerLawGraphon g;
        if (auto v = rd.real("graphon", "c")) g.c = *v;
        if (auto v = rd.real("graphon", "exponent")) g.exponent = *v;
        cfg.graphon = g;
        used.insert({"c", "exponent"});
    } else if (kind == "piecewise_constant") {
        PiecewiseGraphon g;
        if (auto v = rd.list("graphon", "block_lengths")) g.block_lengths = *v;
        else issues.push_back("graphon.block_lengths: required for piecewise_constant");
        if (auto v = rd.list("graphon", "block_matrix")) g.block_matrix = *v;
        else issues.push_back("graphon.block_matrix: required for piecewise_constant");
        cfg.graphon = g;
        used.insert({"block_lengths", "block_matrix"});
    } else if (kind == "constant") {
        ConstantGraphon g;
        if (auto v = rd.real("graphon", "w0")) g.w0 = *v;
        cfg.graphon = g;
        used.insert("w0");
    } else {
        issues.push_back(fmt::format("graphon.kind: expected power_law, piecewise_constant or constant, got '{}'", kind));
    }
    for (const auto& key : schema().at("graphon"))
        if (!used.count(key) && rd.has("graphon", key))
            issues.push_back(fmt::format("graphon.{}: not used by kind {}", key, kind));

    if (auto v = rd.integer<std::size_t>("population", "n_agents")) cfg.n_agents = *v;
    if (auto v = rd.raw("population", "sampling")) {
        if (*v == "uniform_iid") cfg.sampling = SamplingMode::uniform_iid;
        else if (*v == "group_proportional") cfg.sampling = SamplingMode::group_proportional;
        else issues.push_back(fmt::format("population.sampling: expected uniform_iid or group_proportional, got '{}'", *v));
    }

    // Rates: every list has one entry (shared) or one per graphon block.
    const std::array<std::pair<const char*, double Rates::*>, 6> rate_fields{{{"beta_S", &Rates::beta_s},
                                                                              {"beta_K", &Rates::beta_k},
                                                                              {"beta_I", &Rates::beta_i},
                                                                              {"mu_K", &Rates::mu_k},
                                                                              {"mu_I", &Rates::mu_i},
                                                                              {"eta", &Rates::eta}}};
    std::map<std::string, std::vector<double>> rate_lists;
    std::size_t groups = 1;
    for (const auto& [name, member] : rate_fields) {
        (void)member;
        if (auto v = rd.list("params", name)) {
            rate_lists[name] = *v;
            groups = std::max(groups, v->size());
        }
    }
    cfg.rates.assign(groups, Rates{});
    for (const auto& [name, member] : rate_fields) {
        const auto it = rate_lists.find(name);
        if (it == rate_lists.end()) continue;
        const auto& values = it->second;
        if (values.size() != 1 && values.size() != groups) {
            issues.push_back(fmt::format("params.{}: has {} entries, expected 1 or {}", name, values.size(), groups));
            continue;
        }
        for (std::size_t g = 0; g < groups; ++g) cfg.rates[g].*member = values[values.size() == 1 ? 0 : g];
    }
    if (auto v = rd.real("params", "a_bar")) cfg.a_bar = *v;

    if (auto v = rd.real("time", "horizon")) cfg.grid.horizon = *v;
    if (auto v = rd.integer<int>("time", "n_steps")) cfg.grid.n_steps = *v;

    if (auto v = rd.list("initial", "distribution")) {
        if (v->size() % kNumStates != 0) {
            issues.push_back(fmt::format("initial.distribution: {} entries is not a multiple of 4", v->size()));
        } else {
            cfg.initial.clear();
            for (std::size_t k = 0; k < v->size(); k += kNumStates)
                cfg.initial.push_back(StateVector{(*v)[k], (*v)[k + 1], (*v)[k + 2], (*v)[k + 3]});
        }
    }

    auto& pol = cfg.policy;
    if (auto v = rd.real("policy", "phi_bar")) pol.phi_bar = *v;
    if (auto v = rd.real("policy", "psi_bar")) pol.psi_bar = *v;
    if (auto v = rd.integer<std::size_t>("policy", "n_phi")) pol.n_phi = *v;
    if (auto v = rd.integer<std::size_t>("policy", "n_psi")) pol.n_psi = *v;
    if (auto v = rd.real("policy", "c_lambda")) pol.c_lambda = *v;
    if (auto v = rd.real("policy", "c_lambda_I")) pol.c_lambda_i = *v;
    if (auto v = rd.real("policy", "phi")) pol.fixed_k.phi = *v;
    if (auto v = rd.real("policy", "psi")) pol.fixed_k.psi = *v;
    if (rd.has("policy", "phi_I") || rd.has("policy", "psi_I")) {
        Policy li;
        if (auto v = rd.real("policy", "phi_I")) li.phi = *v;
        if (auto v = rd.real("policy", "psi_I")) li.psi = *v;
        pol.fixed_i = li;
    }

    if (auto v = rd.real("solver", "tol")) cfg.solver.tol = *v;
    if (auto v = rd.integer<int>("solver", "max_iter")) cfg.solver.max_iter = *v;
    if (auto v = rd.real("solver", "damping")) cfg.solver.damping = *v;
    if (auto v = rd.raw("solver", "integrator")) {
        if (*v == "rk4") cfg.solver.integrator = Integrator::rk4;
        else if (*v == "euler") cfg.solver.integrator = Integrator::euler;
        else issues.push_back(fmt::format("solver.integrator: expected rk4 or euler, got '{}'", *v));
    }

    auto& sim = cfg.simulation;
    if (auto v = rd.boolean("simulation", "enabled")) sim.enabled = *v;
    if (auto v = rd.integer<std::size_t>("simulation", "n_players")) sim.n_players = *v;
    if (auto v = rd.integer<std::size_t>("simulation", "n_paths")) sim.n_paths = *v;
    if (auto v = rd.integer<std::uint64_t>("simulation", "seed")) sim.seed = *v;
    if (auto v = rd.raw("simulation", "rate_cap"); v && *v != "auto") {
        if (auto d = rd.real("simulation", "rate_cap")) sim.rate_cap = *d;
    }
    if (auto v = rd.raw("simulation", "control_source")) {
        if (*v == "equilibrium_field") sim.control_source = ControlSource::equilibrium_field;
        else if (*v == "constant_one") sim.control_source = ControlSource::constant_one;
        else issues.push_back(fmt::format("simulation.control_source: expected equilibrium_field or constant_one, got '{}'", *v));
    }

    // Report field-level problems together with anything the parse missed.
    for (auto& issue : cfg.validation_issues()) issues.push_back(std::move(issue));
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({fmt::format("{}: cannot open config file", path)});
    return parse_config(in);
}

std::vector<std::string> ExperimentConfig::validation_issues() const {
    std::vector<std::string> issues;
    try {
        skir::validate(graphon);
    } catch (const std::invalid_argument& e) {
        issues.push_back(fmt::format("graphon: {}", e.what()));
    }
    const std::size_t groups = group_count(graphon);
    if (n_agents == 0) issues.push_back("population.n_agents: must be at least 1");

    if (rates.size() != 1 && rates.size() != groups)
        issues.push_back(fmt::format("params: {} rate groups, expected 1 or {}", rates.size(), groups));
    for (std::size_t g = 0; g < rates.size(); ++g) {
        const Rates& r = rates[g];
        const auto at = [&](const char* name) { return rates.size() == 1 ? fmt::format("params.{}", name)
                                                                        : fmt::format("params.{}[{}]", name, g); };
        if (!(r.beta_s >= 0.0)) issues.push_back(at("beta_S") + ": must be nonnegative");
        if (!(r.beta_k >= 0.0)) issues.push_back(at("beta_K") + ": must be nonnegative");
        if (!(r.beta_i >= 0.0)) issues.push_back(at("beta_I") + ": must be nonnegative");
        if (!(r.mu_k > 0.0)) issues.push_back(at("mu_K") + ": must be positive");
        if (!(r.mu_i > 0.0)) issues.push_back(at("mu_I") + ": must be positive");
        if (!(r.eta >= 0.0)) issues.push_back(at("eta") + ": must be nonnegative");
    }
    if (!(a_bar > 0.0)) issues.push_back("params.a_bar: must be positive");
    if (!(grid.horizon > 0.0)) issues.push_back("time.horizon: must be positive");
    if (grid.n_steps < 2) issues.push_back("time.n_steps: must be at least 2");

    if (initial.size() != 1 && initial.size() != groups)
        issues.push_back(fmt::format("initial.distribution: {} distributions, expected 1 or {}", initial.size(), groups));
    for (std::size_t g = 0; g < initial.size(); ++g) {
        double s = 0.0;
        for (std::size_t e = 0; e < kNumStates; ++e) {
            if (!(initial[g][e] >= 0.0))
                issues.push_back(fmt::format("initial.distribution[{}]: negative mass", g * kNumStates + e));
            s += initial[g][e];
        }
        if (std::abs(s - 1.0) > 1e-12)
            issues.push_back(fmt::format("initial.distribution: group {} sums to {:.17g}, not 1", g, s));
    }

    if (!(policy.phi_bar >= 0.0)) issues.push_back("policy.phi_bar: must be nonnegative");
    if (!(policy.psi_bar >= 0.0)) issues.push_back("policy.psi_bar: must be nonnegative");
    if (policy.n_phi == 0) issues.push_back("policy.n_phi: must be at least 1");
    if (policy.n_psi == 0) issues.push_back("policy.n_psi: must be at least 1");
    if (!(policy.c_lambda > 0.0)) issues.push_back("policy.c_lambda: must be positive");
    if (policy.c_lambda_i && !(*policy.c_lambda_i > 0.0)) issues.push_back("policy.c_lambda_I: must be positive");
    const auto check_fixed = [&](const Policy& p, const char* phi_key, const char* psi_key) {
        if (!(p.phi >= 0.0 && p.phi <= policy.phi_bar))
            issues.push_back(fmt::format("policy.{}: must lie in [0, phi_bar]", phi_key));
        if (!(p.psi >= 0.0 && p.psi <= policy.psi_bar))
            issues.push_back(fmt::format("policy.{}: must lie in [0, psi_bar]", psi_key));
    };
    check_fixed(policy.fixed_k, "phi", "psi");
    if (policy.fixed_i) check_fixed(*policy.fixed_i, "phi_I", "psi_I");

    if (!(solver.tol > 0.0)) issues.push_back("solver.tol: must be positive");
    if (solver.max_iter < 1) issues.push_back("solver.max_iter: must be at least 1");
    if (!(solver.damping > 0.0 && solver.damping <= 1.0)) issues.push_back("solver.damping: must lie in (0, 1]");

    if (simulation.n_players == 0) issues.push_back("simulation.n_players: must be at least 1");
    if (simulation.n_paths == 0) issues.push_back("simulation.n_paths: must be at least 1");
    if (!(simulation.rate_cap >= 0.0)) issues.push_back("simulation.rate_cap: must be nonnegative or auto");
    return issues;
}

void ExperimentConfig::validate() const {
    auto issues = validation_issues();
    if (!issues.empty()) throw ConfigError(std::move(issues));
}

GameInstance ExperimentConfig::build_game() const {
    validate();
    GameInstance game;
    game.population = sample_population(graphon, n_agents, seed, sampling);
    game.grid = grid;
    game.a_bar = a_bar;
    for (std::size_t a = 0; a < game.agents(); ++a) {
        const std::size_t g = game.population.group_of[a];
        game.rates.push_back(rates[rates.size() == 1 ? 0 : g]);
        game.initial.push_back(initial[initial.size() == 1 ? 0 : g]);
    }
    return game;
}

SimConfig ExperimentConfig::sim_config() const {
    return SimConfig{simulation.n_players, simulation.n_paths, simulation.seed.value_or(seed), simulation.rate_cap,
                     simulation.control_source};
}

PolicyGrid ExperimentConfig::policy_grid() const {
    return PolicyGrid::even(policy.phi_bar, policy.n_phi, policy.psi_bar, policy.n_psi);
}

std::string ExperimentConfig::to_ini() const {
    std::string out;
    const auto line = [&](const std::string& key, const std::string& value) { out += key + " = " + value + "\n"; };
    const auto num = [](double v) { return fmt::format("{:.17g}", v); };

    out += "[experiment]\n";
    line("mode", to_string(mode));
    line("seed", std::to_string(seed));
    line("output_dir", output_dir);

    out += "\n[graphon]\n";
    if (const auto* g = std::get_if<PowerLawGraphon>(&graphon)) {
        line("kind", "power_law");
        line("c", num(g->c));
        line("exponent", num(g->exponent));
    } else if (const auto* g = std::get_if<PiecewiseGraphon>(&graphon)) {
        line("kind", "piecewise_constant");
        line("block_lengths", join_numbers(g->block_lengths));
        line("block_matrix", join_numbers(g->block_matrix));
    } else if (const auto* g = std::get_if<ConstantGraphon>(&graphon)) {
        line("kind", "constant");
        line("w0", num(g->w0));
    }

    out += "\n[population]\n";
    line("n_agents", std::to_string(n_agents));
    line("sampling", sampling == SamplingMode::uniform_iid ? "uniform_iid" : "group_proportional");

    out += "\n[params]\n";
    const auto field = [&](const char* key, double Rates::*member) {
        std::vector<double> v;
        for (const auto& r : rates) v.push_back(r.*member);
        line(key, join_numbers(v));
    };
    field("beta_S", &Rates::beta_s);
    field("beta_K", &Rates::beta_k);
    field("beta_I", &Rates::beta_i);
    field("mu_K", &Rates::mu_k);
    field("mu_I", &Rates::mu_i);
    field("eta", &Rates::eta);
    line("a_bar", num(a_bar));

    out += "\n[time]\n";
    line("horizon", num(grid.horizon));
    line("n_steps", std::to_string(grid.n_steps));

    out += "\n[initial]\n";
    std::vector<double> p0;
    for (const auto& v : initial) p0.insert(p0.end(), v.begin(), v.end());
    line("distribution", join_numbers(p0));

    out += "\n[policy]\n";
    line("phi_bar", num(policy.phi_bar));
    line("psi_bar", num(policy.psi_bar));
    line("n_phi", std::to_string(policy.n_phi));
    line("n_psi", std::to_string(policy.n_psi));
    line("c_lambda", num(policy.c_lambda));
    line("c_lambda_I", num(policy.c_lambda_for_i()));
    line("phi", num(policy.fixed_k.phi));
    line("psi", num(policy.fixed_k.psi));
    if (policy.fixed_i) {
        line("phi_I", num(policy.fixed_i->phi));
        line("psi_I", num(policy.fixed_i->psi));
    }

    out += "\n[solver]\n";
    line("tol", num(solver.tol));
    line("max_iter", std::to_string(solver.max_iter));
    line("damping", num(solver.damping));
    line("integrator", solver.integrator == Integrator::rk4 ? "rk4" : "euler");

    out += "\n[simulation]\n";
    line("enabled", simulation.enabled ? "true" : "false");
    line("n_players", std::to_string(simulation.n_players));
    line("n_paths", std::to_string(simulation.n_paths));
    line("seed", std::to_string(simulation.seed.value_or(seed)));
    line("rate_cap", simulation.rate_cap > 0.0 ? num(simulation.rate_cap) : std::string("auto"));
    line("control_source",
         simulation.control_source == ControlSource::equilibrium_field ? "equilibrium_field" : "constant_one");
    return out;
}

}  // namespace skir
