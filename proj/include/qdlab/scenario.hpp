// scenario.hpp - declarative experiment configuration (strict JSON tree)
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qdlab/common.hpp"
#include "qdlab/lattice_operator.hpp"

namespace qdlab {

struct scenario_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

// Wraps one JSON object; unknown keys are fatal, so every field must be
// consumed before done() is called.
class StrictObject {
  public:
    StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw scenario_error(path_ + ": expected an object");
    }

    const nlohmann::json* find(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const nlohmann::json& at(const std::string& key) {
        const nlohmann::json* p = find(key);
        if (!p) throw scenario_error(path_ + ": missing required key \"" + key + "\"");
        return *p;
    }

    template <typename T>
    T get(const std::string& key) {
        try {
            return at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw scenario_error(path_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        const nlohmann::json* p = find(key);
        if (!p) return fallback;
        try {
            return p->get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw scenario_error(path_ + "." + key + ": " + e.what());
        }
    }

    void done() {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key()))
                throw scenario_error(path_ + ": unknown key \"" + it.key() + "\"");
        }
    }

    const std::string& path() const { return path_; }

  private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw scenario_error(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// operator block
// ---------------------------------------------------------------------------

inline OperatorSpec parse_operator(const nlohmann::json& j, const std::string& path) {
    detail::StrictObject op(j, path);
    OperatorSpec spec;
    {
        detail::StrictObject k(op.at("kernel"), path + ".kernel");
        std::string type = k.get<std::string>("type");
        if (type == "exp") {
            double amp = k.get<double>("A1");
            double rate = k.get<double>("a");
            detail::check(amp > 0 && rate > 0, path + ".kernel: A1 and a must be positive");
            if (const auto* r = k.find("radius")) {
                int radius = r->get<int>();
                detail::check(radius >= 1, path + ".kernel.radius must be >= 1");
                std::map<int, Complex> upper;
                for (int n = 1; n <= radius; ++n) upper[n] = amp * std::exp(-rate * n);
                spec.kernel = HoppingKernel::from_table(upper, amp, rate);
            } else {
                spec.kernel = HoppingKernel::exponential(amp, rate);
            }
        } else if (type == "nn") {
            spec.kernel = HoppingKernel::nearest_neighbor(k.get_or<double>("amplitude", 1.0));
        } else if (type == "table") {
            double amp = k.get<double>("A1");
            double rate = k.get<double>("a");
            std::map<int, Complex> upper;
            for (auto& e : k.at("entries")) {
                detail::check(e.is_array() && (e.size() == 2 || e.size() == 3),
                              path + ".kernel.entries: expected [n, re] or [n, re, im]");
                int n = e[0].get<int>();
                double re = e[1].get<double>();
                double im = e.size() == 3 ? e[2].get<double>() : 0.0;
                upper[n] = Complex{re, im};
            }
            spec.kernel = HoppingKernel::from_table(upper, amp, rate);
        } else {
            throw scenario_error(path + ".kernel.type: expected \"exp\", \"nn\" or \"table\"");
        }
        k.done();
    }
    {
        detail::StrictObject p(op.at("potential"), path + ".potential");
        std::string type = p.get<std::string>("type");
        if (type == "quasiperiodic") {
            TrigPoly v;
            auto coeffs = p.get<std::vector<double>>("fourier_coeffs");
            detail::check(!coeffs.empty(), path + ".potential.fourier_coeffs must be nonempty");
            v.a0 = coeffs[0];
            v.cos_coeffs.assign(coeffs.begin() + 1, coeffs.end());
            v.sin_coeffs = p.get_or<std::vector<double>>("fourier_sin", {});
            double theta = p.get<double>("theta");
            double alpha = p.get<double>("alpha");
            detail::check(alpha > 0 && alpha < 1, path + ".potential.alpha must satisfy 0 < alpha < 1");
            spec.potential = PotentialLaw::quasiperiodic(v, theta, alpha);
        } else if (type == "constant") {
            spec.potential = PotentialLaw::constant(p.get<double>("value"));
        } else if (type == "table") {
            int lo = p.get<int>("lo");
            auto values = p.get<std::vector<double>>("values");
            detail::check(!values.empty(), path + ".potential.values must be nonempty");
            spec.potential = PotentialLaw::explicit_table(lo, std::move(values));
        } else {
            throw scenario_error(path + ".potential.type: expected \"quasiperiodic\", \"constant\" or \"table\"");
        }
        p.done();
    }
    spec.coupling = op.get<double>("coupling");
    op.done();
    return spec;
}

// ---------------------------------------------------------------------------
// experiment blocks
// ---------------------------------------------------------------------------

struct GoodBoxScanCfg {
    int big_n = 400;
    double delta = 0.3;
    std::vector<int> ells = {10};  // box sizes to try; any passing size counts
    double eta = 0.01;
    int energy_points = 21;
    std::optional<double> e_min, e_max;  // default: [-K, K]
    double min_pass_fraction = 0.8;
    bool dump_matrices = false;
};

struct BadBoxCountCfg {
    int big_n = 200;
    int ell = 10;
    double delta = 0.3;
    double delta0 = 0.3;
    double eta = 0.01;
    double energy = 0.0;
    double max_fail_ratio = 1.0;
};

struct BarrierChainCfg {
    std::vector<int> ells = {20, 40, 80};
    double eta = 0.01;
    double delta = 0.3;
    int support_radius = 1;
    std::vector<double> e_candidates = {0.0};  // first with boxes at every ell wins
    double prefactor = 1.0, rate = 0.05, power = 0.3;
    bool monotone_stage3 = true;
};

struct ResolventIdentityCfg {
    int trials = 100;
    int max_size = 256;
    double tol = 1e-8;
    double eta_min = 0.05, eta_max = 0.5;
};

struct CombesThomasCfg {
    std::optional<double> energy;  // absolute; default K + offset
    double e_offset = 0.0;
    double eta = 0.01;
    int j = 0;
    int n_lo = 8, n_hi = 120;
    double rate_min = 0.1;
    std::optional<double> expect_rate;
    double expect_rel_tol = 0.05;
};

struct TransportExponentCfg {
    int half_width = 1024;
    std::vector<double> p_list = {2.0};
    double t_min = 100.0, t_max = 1000.0;
    int t_points = 9;
    std::optional<double> beta_max, beta_min;
    std::string method = "auto";
};

struct MonotonicityCfg {
    int half_width = 512;
    std::vector<double> p_list = {1.0, 2.0, 4.0};
    double t_min = 10.0, t_max = 100.0;
    int t_points = 7;
};

struct ParsevalCfg {
    int half_width = 512;
    int triples = 50;
    double t_min = 5.0, t_max = 100.0;
    int j_max = 8, n_max = 64;
    double rel_tol = 1e-4;
};

struct CorrelatorDecayCfg {
    int half_width = 1024;
    double sample_time = 100.0;  // T
    int j = 0;
    int n_lo = 50, n_hi = 400, n_stride = 25;
    double c_min = 0.5, c_max = 1.0;
    int c_points = 6;
    double fit_tol = 0.5;
    double min_drop = 2.0;
};

struct CommutatorAuditCfg {
    int trials = 50;
    int p_max = 4;
    int half_width = 80;
    double tol = 1e-12;
};

struct HeisenbergCfg {
    std::vector<int> orders = {1, 2};
    int half_width = 192;
    double t_min = 2.0, t_max = 40.0;
    int t_points = 10;
    double growth_tol = 0.1;
    std::string gamma_type = "delta";  // delta | exp
    double gamma_amp = 1.0, gamma_rate = 1.0;
};

using ExperimentCfg =
    std::variant<GoodBoxScanCfg, BadBoxCountCfg, BarrierChainCfg, ResolventIdentityCfg,
                 CombesThomasCfg, TransportExponentCfg, MonotonicityCfg, ParsevalCfg,
                 CorrelatorDecayCfg, CommutatorAuditCfg, HeisenbergCfg>;

struct Experiment {
    std::string name;
    std::string type;
    ExperimentCfg cfg;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    std::string output_dir;
    OperatorSpec op;
    std::vector<Experiment> experiments;
    std::uint64_t hash = 0;
};

namespace detail {

inline void parse_t_grid_common(StrictObject& e, double& t_min, double& t_max, int& t_points,
                                int min_points) {
    t_min = e.get_or<double>("T_min", t_min);
    t_max = e.get_or<double>("T_max", t_max);
    t_points = e.get_or<int>("T_points", t_points);
    check(t_min > 0 && t_max >= t_min, e.path() + ": need 0 < T_min <= T_max");
    check(t_points >= min_points, e.path() + ": T grid needs at least " +
                                      std::to_string(min_points) + " points, got " +
                                      std::to_string(t_points));
}

inline void check_delta(StrictObject& e, double delta) {
    check(delta > 0 && delta < 1, e.path() + ".delta must satisfy 0 < delta < 1");
}

inline ExperimentCfg parse_experiment_cfg(const std::string& type, StrictObject& e) {
    if (type == "good_box_scan") {
        GoodBoxScanCfg c;
        c.big_n = e.get_or<int>("N", c.big_n);
        c.delta = e.get_or<double>("delta", c.delta);
        check_delta(e, c.delta);
        if (const auto* p = e.find("ells")) {
            c.ells = p->get<std::vector<int>>();
        } else if (const auto* p2 = e.find("ell")) {
            c.ells = {p2->get<int>()};
        }
        check(!c.ells.empty(), e.path() + ".ells must be nonempty");
        c.eta = e.get_or<double>("eta", c.eta);
        check(c.eta > 0, e.path() + ".eta must be positive");
        c.energy_points = e.get_or<int>("energy_points", c.energy_points);
        check(c.energy_points >= 1, e.path() + ".energy_points must be >= 1");
        if (const auto* p = e.find("E_min")) c.e_min = p->get<double>();
        if (const auto* p = e.find("E_max")) c.e_max = p->get<double>();
        c.min_pass_fraction = e.get_or<double>("min_pass_fraction", c.min_pass_fraction);
        c.dump_matrices = e.get_or<bool>("dump_matrices", false);
        for (int ell : c.ells)
            check(c.big_n >= 8 * ell, e.path() + ": need N >= 8*ell for every ell");
        return c;
    }
    if (type == "bad_box_count") {
        BadBoxCountCfg c;
        c.big_n = e.get_or<int>("N", c.big_n);
        c.ell = e.get_or<int>("ell", c.ell);
        c.delta = e.get_or<double>("delta", c.delta);
        check_delta(e, c.delta);
        c.delta0 = e.get_or<double>("delta0", c.delta0);
        c.eta = e.get_or<double>("eta", c.eta);
        c.energy = e.get_or<double>("E", c.energy);
        c.max_fail_ratio = e.get_or<double>("max_fail_ratio", c.max_fail_ratio);
        return c;
    }
    if (type == "barrier_chain") {
        BarrierChainCfg c;
        c.ells = e.get_or<std::vector<int>>("ells", c.ells);
        check(!c.ells.empty(), e.path() + ".ells must be nonempty");
        c.eta = e.get_or<double>("eta", c.eta);
        c.delta = e.get_or<double>("delta", c.delta);
        check_delta(e, c.delta);
        c.support_radius = e.get_or<int>("support_radius", c.support_radius);
        if (const auto* p = e.find("E_candidates")) {
            c.e_candidates = p->get<std::vector<double>>();
        } else {
            c.e_candidates = {e.get_or<double>("E", 0.0)};
        }
        check(!c.e_candidates.empty(), e.path() + ".E_candidates must be nonempty");
        c.prefactor = e.get_or<double>("C", c.prefactor);
        c.rate = e.get_or<double>("c_rate", c.rate);
        c.power = e.get_or<double>("c_pow", c.power);
        check(c.prefactor > 0 && c.rate > 0 && c.power > 0,
              e.path() + ": constants C, c_rate, c_pow must be positive");
        c.monotone_stage3 = e.get_or<bool>("monotone_stage3", c.monotone_stage3);
        return c;
    }
    if (type == "resolvent_identity") {
        ResolventIdentityCfg c;
        c.trials = e.get_or<int>("trials", c.trials);
        check(c.trials >= 1, e.path() + ".trials must be >= 1");
        c.max_size = e.get_or<int>("max_size", c.max_size);
        c.tol = e.get_or<double>("tol", c.tol);
        check(c.tol > 0, e.path() + ".tol must be positive");
        c.eta_min = e.get_or<double>("eta_min", c.eta_min);
        c.eta_max = e.get_or<double>("eta_max", c.eta_max);
        return c;
    }
    if (type == "combes_thomas") {
        CombesThomasCfg c;
        if (const auto* p = e.find("E")) c.energy = p->get<double>();
        c.e_offset = e.get_or<double>("E_offset", c.e_offset);
        c.eta = e.get_or<double>("eta", c.eta);
        c.j = e.get_or<int>("j", c.j);
        c.n_lo = e.get_or<int>("n_lo", c.n_lo);
        c.n_hi = e.get_or<int>("n_hi", c.n_hi);
        c.rate_min = e.get_or<double>("rate_min", c.rate_min);
        if (const auto* p = e.find("expect_rate")) c.expect_rate = p->get<double>();
        c.expect_rel_tol = e.get_or<double>("expect_rel_tol", c.expect_rel_tol);
        return c;
    }
    if (type == "transport_exponent" || type == "ballistic_check") {
        TransportExponentCfg c;
        c.half_width = e.get_or<int>("half_width", c.half_width);
        c.p_list = e.get_or<std::vector<double>>("p", c.p_list);
        check(!c.p_list.empty(), e.path() + ".p must be nonempty");
        parse_t_grid_common(e, c.t_min, c.t_max, c.t_points, 5);
        if (const auto* p = e.find("beta_max")) c.beta_max = p->get<double>();
        if (const auto* p = e.find("beta_min")) c.beta_min = p->get<double>();
        if (type == "ballistic_check" && !c.beta_max) c.beta_max = 1.05;
        c.method = e.get_or<std::string>("method", c.method);
        return c;
    }
    if (type == "beta_monotonicity") {
        MonotonicityCfg c;
        c.half_width = e.get_or<int>("half_width", c.half_width);
        c.p_list = e.get_or<std::vector<double>>("p", c.p_list);
        check(c.p_list.size() >= 3, e.path() + ".p needs at least 3 moment orders");
        parse_t_grid_common(e, c.t_min, c.t_max, c.t_points, 5);
        return c;
    }
    if (type == "parseval_audit") {
        ParsevalCfg c;
        c.half_width = e.get_or<int>("half_width", c.half_width);
        c.triples = e.get_or<int>("triples", c.triples);
        check(c.triples >= 1, e.path() + ".triples must be >= 1");
        c.t_min = e.get_or<double>("T_min", c.t_min);
        c.t_max = e.get_or<double>("T_max", c.t_max);
        check(c.t_min > 0 && c.t_max >= c.t_min, e.path() + ": need 0 < T_min <= T_max");
        c.j_max = e.get_or<int>("j_max", c.j_max);
        c.n_max = e.get_or<int>("n_max", c.n_max);
        c.rel_tol = e.get_or<double>("rel_tol", c.rel_tol);
        check(c.rel_tol > 0, e.path() + ".rel_tol must be positive");
        return c;
    }
    if (type == "correlator_decay") {
        CorrelatorDecayCfg c;
        c.half_width = e.get_or<int>("half_width", c.half_width);
        c.sample_time = e.get_or<double>("T", c.sample_time);
        check(c.sample_time > 0, e.path() + ".T must be positive");
        c.j = e.get_or<int>("j", c.j);
        c.n_lo = e.get_or<int>("n_lo", c.n_lo);
        c.n_hi = e.get_or<int>("n_hi", c.n_hi);
        c.n_stride = e.get_or<int>("n_stride", c.n_stride);
        check(c.n_stride >= 1 && c.n_hi >= c.n_lo, e.path() + ": bad n range");
        c.c_min = e.get_or<double>("c_min", c.c_min);
        c.c_max = e.get_or<double>("c_max", c.c_max);
        c.c_points = e.get_or<int>("c_points", c.c_points);
        check(c.c_points >= 1 && c.c_max >= c.c_min && c.c_min > 0,
              e.path() + ": bad stretched-exponential power grid");
        c.fit_tol = e.get_or<double>("fit_tol", c.fit_tol);
        c.min_drop = e.get_or<double>("min_drop", c.min_drop);
        return c;
    }
    if (type == "commutator_audit") {
        CommutatorAuditCfg c;
        c.trials = e.get_or<int>("trials", c.trials);
        check(c.trials >= 1, e.path() + ".trials must be >= 1");
        c.p_max = e.get_or<int>("p_max", c.p_max);
        check(c.p_max >= 1, e.path() + ".p_max must be >= 1");
        c.half_width = e.get_or<int>("half_width", c.half_width);
        c.tol = e.get_or<double>("tol", c.tol);
        check(c.tol > 0, e.path() + ".tol must be positive");
        return c;
    }
    if (type == "heisenberg_growth") {
        HeisenbergCfg c;
        c.orders = e.get_or<std::vector<int>>("orders", c.orders);
        check(!c.orders.empty(), e.path() + ".orders must be nonempty");
        c.half_width = e.get_or<int>("half_width", c.half_width);
        parse_t_grid_common(e, c.t_min, c.t_max, c.t_points, 3);
        c.growth_tol = e.get_or<double>("growth_tol", c.growth_tol);
        c.gamma_type = e.get_or<std::string>("gamma", c.gamma_type);
        check(c.gamma_type == "delta" || c.gamma_type == "exp",
              e.path() + ".gamma must be \"delta\" or \"exp\"");
        c.gamma_amp = e.get_or<double>("gamma_amp", c.gamma_amp);
        c.gamma_rate = e.get_or<double>("gamma_rate", c.gamma_rate);
        return c;
    }
    throw scenario_error(e.path() + ".type: unknown experiment type \"" + type + "\"");
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& doc, const std::string& source_text) {
    detail::StrictObject root(doc, "scenario");
    Scenario s;
    s.name = root.get<std::string>("name");
    detail::check(!s.name.empty(), "scenario.name must be nonempty");
    s.seed = root.get_or<std::uint64_t>("seed", 1);
    s.output_dir = root.get_or<std::string>("output", "out/" + s.name);
    s.op = parse_operator(root.at("operator"), "scenario.operator");
    const auto& exps = root.at("experiments");
    detail::check(exps.is_array() && !exps.empty(),
                  "scenario.experiments must be a nonempty array");
    int index = 0;
    for (const auto& ej : exps) {
        std::string path = "scenario.experiments[" + std::to_string(index) + "]";
        detail::StrictObject e(ej, path);
        Experiment exp;
        exp.type = e.get<std::string>("type");
        exp.name = e.get_or<std::string>("name", exp.type + "_" + std::to_string(index));
        exp.cfg = detail::parse_experiment_cfg(exp.type, e);
        e.done();
        s.experiments.push_back(std::move(exp));
        ++index;
    }
    root.done();
    Fingerprint fp;
    fp.feed(source_text);
    s.hash = fp.state;
    return s;
}

// key.path=value overrides; numeric path segments index arrays, values parse
// as JSON with a string fallback.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw scenario_error("override \"" + assignment + "\": expected key=value");
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;  // bare string
    }
    nlohmann::json* node = &doc;
    std::stringstream ss(key);
    std::string segment;
    std::vector<std::string> segments;
    while (std::getline(ss, segment, '.')) segments.push_back(segment);
    if (segments.empty()) throw scenario_error("override \"" + assignment + "\": empty key");
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        const std::string& seg = segments[i];
        if (node->is_array()) {
            std::size_t idx = std::stoul(seg);
            if (idx >= node->size())
                throw scenario_error("override: index " + seg + " out of range");
            node = &(*node)[idx];
        } else if (node->is_object()) {
            if (!node->contains(seg))
                throw scenario_error("override: unknown key \"" + seg + "\"");
            node = &(*node)[seg];
        } else {
            throw scenario_error("override: cannot descend into \"" + seg + "\"");
        }
    }
    const std::string& last = segments.back();
    if (node->is_array()) {
        std::size_t idx = std::stoul(last);
        if (idx >= node->size()) throw scenario_error("override: index " + last + " out of range");
        (*node)[idx] = parsed;
    } else if (node->is_object()) {
        if (!node->contains(last))
            throw scenario_error("override: unknown key \"" + last + "\"");
        (*node)[last] = parsed;
    } else {
        throw scenario_error("override: cannot assign at \"" + last + "\"");
    }
}

inline Scenario load_scenario(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw scenario_error("cannot open scenario file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw scenario_error(path.string() + ": " + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_scenario(doc, doc.dump());
}

}  // namespace qdlab
