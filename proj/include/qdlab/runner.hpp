// runner.hpp - executes scenario experiments and writes reports + manifest
#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <random>
#include <thread>

#include <json.hpp>

#include "qdlab/commutator.hpp"
#include "qdlab/dynamics.hpp"
#include "qdlab/greens.hpp"
#include "qdlab/report_io.hpp"
#include "qdlab/scenario.hpp"
#include "qdlab/version.hpp"

namespace qdlab {

// Bounded worker pool over an index range; results land in caller-indexed
// slots so the output order never depends on scheduling.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct ExperimentResult {
    std::string name;
    std::string type;
    std::string status;  // pass | fail | inconclusive
    std::vector<std::string> files;
    nlohmann::json summary;
    double seconds = 0.0;
};

struct RunManifest {
    std::string scenario_name;
    std::uint64_t scenario_hash = 0;
    std::string artifact_version;
    std::string timestamp;
    std::vector<ExperimentResult> experiments;
    bool all_ok = true;  // no experiment failed (inconclusive allowed)

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["scenario"] = scenario_name;
        j["scenario_hash"] = scenario_hash;
        j["artifact_version"] = artifact_version;
        j["timestamp"] = timestamp;
        j["all_ok"] = all_ok;
        j["experiments"] = nlohmann::json::array();
        nlohmann::json files = nlohmann::json::array();
        for (auto& e : experiments) {
            nlohmann::json ej;
            ej["name"] = e.name;
            ej["type"] = e.type;
            ej["status"] = e.status;
            ej["files"] = e.files;
            ej["seconds"] = e.seconds;
            ej["summary"] = e.summary;
            j["experiments"].push_back(ej);
            for (auto& f : e.files) files.push_back(f);
        }
        j["files"] = files;
        return j;
    }
};

struct RunOptions {
    std::filesystem::path out_dir;  // empty -> scenario.output_dir
    int threads = 1;
};

namespace detail {

struct RunContext {
    const Scenario& scenario;
    std::filesystem::path out;
    int threads = 1;
    EigenCache cache;
    ExperimentResult* current = nullptr;

    std::filesystem::path file(const std::string& suffix) {
        std::filesystem::path p = out / (current->name + "_" + suffix);
        current->files.push_back(p.filename().string());
        return p;
    }
};

inline nlohmann::json good_box_json(const GoodBoxReport& r) {
    return {{"lo", r.interval.lo},
            {"hi", r.interval.hi},
            {"E", r.z.E},
            {"eta", r.z.eta},
            {"delta", r.delta},
            {"threshold", r.threshold},
            {"separation", r.separation},
            {"max_offdiag", r.max_offdiag},
            {"pass", r.pass},
            {"witness", {r.witness_m, r.witness_n}},
            {"pairs_tested", r.pairs_tested}};
}

// --- good_box_scan ---------------------------------------------------------

inline void run_good_box_scan(RunContext& ctx, const GoodBoxScanCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    double k_bound = spectrum_bound(spec);
    double e_lo = cfg.e_min.value_or(-k_bound);
    double e_hi = cfg.e_max.value_or(k_bound);
    std::vector<double> energies = linear_grid(e_lo, e_hi, cfg.energy_points);
    std::vector<std::vector<GoodBoxScan>> scans(energies.size());
    parallel_for(static_cast<int>(energies.size()), ctx.threads, [&](int i) {
        for (int ell : cfg.ells)
            scans[i].push_back(
                scan_good_boxes(spec, cfg.big_n, Energy{energies[i], cfg.eta}, cfg.delta, ell));
    });
    JsonlWriter boxes;
    CsvWriter csv({"E", "eta", "candidates", "passing", "any_pass"});
    int with_pass = 0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        long candidates = 0, passing = 0;
        bool any = false;
        for (auto& scan : scans[i]) {
            for (auto& rep : scan.reports) boxes.record(good_box_json(rep));
            candidates += static_cast<long>(scan.reports.size());
            passing += scan.passing;
            any = any || scan.any_pass;
        }
        csv.row({energies[i], cfg.eta, candidates, passing, any});
        if (any) ++with_pass;
        if (cfg.dump_matrices) {
            for (auto& scan : scans[i]) {
                const GoodBoxReport* first = nullptr;
                for (auto& rep : scan.reports)
                    if (rep.pass) {
                        first = &rep;
                        break;
                    }
                if (!first) continue;
                GreensMatrix g = greens(spec, first->interval, first->z);
                write_matrix_dump(ctx.file("box_E" + std::to_string(i) + ".gmtx"), g.entries);
                break;
            }
        }
    }
    boxes.write(ctx.file("boxes.jsonl"));
    csv.write(ctx.file("energies.csv"));
    double fraction = energies.empty() ? 0.0 : static_cast<double>(with_pass) / energies.size();
    ctx.current->summary = {{"energies", energies.size()},
                            {"energies_with_pass", with_pass},
                            {"fraction_with_pass", fraction},
                            {"min_pass_fraction", cfg.min_pass_fraction}};
    ctx.current->status = fraction >= cfg.min_pass_fraction ? "pass" : "fail";
}

// --- bad_box_count ---------------------------------------------------------

inline void run_bad_box_count(RunContext& ctx, const BadBoxCountCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    BadBoxCount out = bad_box_count(spec, cfg.big_n, Energy{cfg.energy, cfg.eta}, cfg.ell,
                                    cfg.delta, cfg.delta0);
    double ratio = static_cast<double>(out.count) / std::max<long>(1, out.candidates);
    ctx.current->summary = {{"count", out.count},
                            {"candidates", out.candidates},
                            {"sublinear_pass", out.sublinear_pass},
                            {"delta0_fit", std::isfinite(out.delta0_fit) ? out.delta0_fit : -1.0},
                            {"fail_ratio", ratio}};
    JsonlWriter w;
    w.record(ctx.current->summary);
    w.write(ctx.file("badbox.jsonl"));
    ctx.current->status =
        out.sublinear_pass && ratio <= cfg.max_fail_ratio ? "pass" : "fail";
}

// --- barrier_chain ---------------------------------------------------------

inline void run_barrier_chain(RunContext& ctx, const BarrierChainCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    CsvWriter csv({"ell", "target", "center", "stage1_max", "stage2_max", "stage3_max",
                   "stage1_bound", "stage2_bound", "stage3_bound", "inconclusive"});
    JsonlWriter certs;

    // first candidate energy whose scan finds a box at every ell
    double energy = cfg.e_candidates.front();
    std::vector<int> centers;
    bool all_found = false;
    for (double e_try : cfg.e_candidates) {
        std::vector<int> found;
        for (int ell : cfg.ells) {
            int target = 8 * ell + 4;
            GoodBoxScan scan =
                scan_good_boxes(spec, target, Energy{e_try, cfg.eta}, cfg.delta, ell);
            for (auto& rep : scan.reports)
                if (rep.pass && rep.interval.lo > 0) {
                    found.push_back((rep.interval.lo + rep.interval.hi) / 2);
                    break;
                }
        }
        if (found.size() == cfg.ells.size()) {
            energy = e_try;
            centers = std::move(found);
            all_found = true;
            break;
        }
    }

    std::vector<double> stage3;
    bool any_inconclusive = false;
    for (std::size_t k = 0; all_found && k < cfg.ells.size(); ++k) {
        int ell = cfg.ells[k];
        int target = 8 * ell + 4;
        Energy z{energy, cfg.eta};
        int center = centers[k];
        BarrierOptions opts;
        opts.delta = cfg.delta;
        auto cert = barrier_chain(spec, center, ell, z, cfg.support_radius, target,
                                  BarrierConstants{cfg.prefactor, cfg.rate, cfg.power}, opts);
        any_inconclusive = any_inconclusive || cert.inconclusive;
        stage3.push_back(cert.stages[2].max_abs);
        csv.row({ell, target, center, cert.stages[0].max_abs, cert.stages[1].max_abs,
                 cert.stages[2].max_abs, cert.stages[0].bound, cert.stages[1].bound,
                 cert.stages[2].bound, cert.inconclusive});
        nlohmann::json cj = {{"ell", ell},
                             {"target", target},
                             {"center", center},
                             {"E", z.E},
                             {"eta", z.eta},
                             {"inconclusive", cert.inconclusive},
                             {"truncation_estimate", cert.truncation_estimate},
                             {"box", good_box_json(cert.box_report)}};
        for (int s = 0; s < 3; ++s) {
            cj["stages"].push_back({{"name", cert.stages[s].name},
                                    {"max_abs", cert.stages[s].max_abs},
                                    {"bound", cert.stages[s].bound},
                                    {"pass", cert.stages[s].pass},
                                    {"implied_rate", std::isfinite(cert.stages[s].implied_rate)
                                                         ? cert.stages[s].implied_rate
                                                         : -1.0},
                                    {"witness", {cert.stages[s].witness_m,
                                                 cert.stages[s].witness_n}}});
        }
        certs.record(cj);
    }
    if (!all_found)
        certs.record({{"status", "no_good_box_at_any_candidate_energy"},
                      {"candidates", cfg.e_candidates}});
    csv.write(ctx.file("stages.csv"));
    certs.write(ctx.file("certificates.jsonl"));

    bool monotone = true;
    const double floor = 1e-290;
    for (std::size_t i = 0; i + 1 < stage3.size(); ++i) {
        double a = std::max(stage3[i], floor), b = std::max(stage3[i + 1], floor);
        if (b > a * 1.05) monotone = false;
    }
    ctx.current->summary = {{"ells", cfg.ells},
                            {"E", energy},
                            {"stage3_maxima", stage3},
                            {"monotone_stage3", monotone},
                            {"boxes_found", all_found},
                            {"inconclusive", any_inconclusive}};
    if (!all_found || stage3.size() < cfg.ells.size()) {
        ctx.current->status = "inconclusive";
    } else if (cfg.monotone_stage3 && !monotone) {
        ctx.current->status = "fail";
    } else {
        ctx.current->status = any_inconclusive ? "inconclusive" : "pass";
    }
}

// --- resolvent_identity ----------------------------------------------------

inline void run_resolvent_identity(RunContext& ctx, const ResolventIdentityCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    double k_bound = spectrum_bound(spec);
    std::mt19937_64 rng(ctx.scenario.seed * 0x9e3779b97f4a7c15ull + 17);
    struct Trial {
        int lo, hi, split;
        double energy, eta, residual;
    };
    std::vector<Trial> trials(cfg.trials);
    for (auto& t : trials) {
        std::uniform_int_distribution<int> size_d(32, std::max(32, cfg.max_size));
        std::uniform_int_distribution<int> center_d(-64, 64);
        int size = size_d(rng), center = center_d(rng);
        t.lo = center - size / 2;
        t.hi = t.lo + size - 1;
        std::uniform_int_distribution<int> split_d(t.lo, t.hi - 1);
        t.split = split_d(rng);
        std::uniform_real_distribution<double> e_d(-k_bound, k_bound),
            eta_d(cfg.eta_min, cfg.eta_max);
        t.energy = e_d(rng);
        t.eta = eta_d(rng);
    }
    parallel_for(cfg.trials, ctx.threads, [&](int i) {
        Trial& t = trials[i];
        t.residual = resolvent_identity_residual(spec, Window{t.lo, t.hi}, t.split,
                                                 Energy{t.energy, t.eta});
    });
    CsvWriter csv({"trial", "lo", "hi", "split", "E", "eta", "residual"});
    double worst = 0.0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        auto& t = trials[i];
        csv.row({static_cast<long>(i), t.lo, t.hi, t.split, t.energy, t.eta, t.residual});
        worst = std::max(worst, t.residual);
    }
    csv.write(ctx.file("residuals.csv"));
    ctx.current->summary = {{"trials", cfg.trials}, {"max_residual", worst}, {"tol", cfg.tol}};
    ctx.current->status = worst <= cfg.tol ? "pass" : "fail";
}

// --- combes_thomas ---------------------------------------------------------

inline void run_combes_thomas(RunContext& ctx, const CombesThomasCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    double energy = cfg.energy.value_or(spectrum_bound(spec) + cfg.e_offset);
    auto rep = combes_thomas_check(spec, Energy{energy, cfg.eta}, cfg.j, cfg.n_lo, cfg.n_hi,
                                   cfg.rate_min);
    bool ok = rep.pass;
    double rel_err = -1.0;
    if (cfg.expect_rate && !rep.degenerate) {
        rel_err = std::abs(rep.decay_rate_fit - *cfg.expect_rate) / *cfg.expect_rate;
        ok = ok && rel_err <= cfg.expect_rel_tol;
    }
    ctx.current->summary = {{"E", energy},
                            {"eta", cfg.eta},
                            {"rate_fit", std::isfinite(rep.decay_rate_fit) ? rep.decay_rate_fit
                                                                           : -1.0},
                            {"degenerate", rep.degenerate},
                            {"points_used", rep.points_used},
                            {"expect_rel_err", rel_err}};
    JsonlWriter w;
    w.record(ctx.current->summary);
    w.write(ctx.file("ct.jsonl"));
    ctx.current->status = ok ? "pass" : "fail";
}

// --- transport exponents ---------------------------------------------------

inline void run_transport_exponent(RunContext& ctx, const TransportExponentCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    Window window = Window::centered(cfg.half_width);
    StateVector phi = make_delta(0, window);
    DynamicsOptions opts;
    opts.method = cfg.method;
    opts.dense_size_cap = std::max(6000, window.size());
    std::vector<double> grid = geometric_grid(cfg.t_min, cfg.t_max, cfg.t_points);
    CsvWriter csv({"p", "T", "value", "error_bar"});
    nlohmann::json summaries = nlohmann::json::array();
    bool ok = true;
    for (double p : cfg.p_list) {
        auto est = transport_exponent(spec, window, phi, p, grid, &ctx.cache, opts);
        for (auto& pt : est.series.points) csv.row({p, pt.T, pt.value, pt.error_bar});
        nlohmann::json s = {{"p", p},
                            {"beta_hat", est.beta_hat},
                            {"beta_plain", est.beta_plain},
                            {"fit_window", {est.fit_t_lo, est.fit_t_hi}},
                            {"residual", est.residual},
                            {"slope_stderr", est.slope_stderr},
                            {"exact_zero", est.exact_zero},
                            {"points_used", est.points_used}};
        summaries.push_back(s);
        if (cfg.beta_max && est.beta_hat > *cfg.beta_max) ok = false;
        if (cfg.beta_min && est.beta_hat < *cfg.beta_min) ok = false;
    }
    csv.write(ctx.file("moments.csv"));
    std::ofstream js(ctx.file("summary.json"));
    js << summaries.dump(2) << '\n';
    ctx.current->summary = {{"estimates", summaries}};
    ctx.current->status = ok ? "pass" : "fail";
}

inline void run_beta_monotonicity(RunContext& ctx, const MonotonicityCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    Window window = Window::centered(cfg.half_width);
    StateVector phi = make_delta(0, window);
    DynamicsOptions opts;
    opts.dense_size_cap = std::max(6000, window.size());
    std::vector<double> grid = geometric_grid(cfg.t_min, cfg.t_max, cfg.t_points);
    auto rep = beta_monotonicity_check(spec, window, phi, cfg.p_list, grid, &ctx.cache, opts);
    CsvWriter csv({"p", "T", "value", "error_bar"});
    nlohmann::json betas = nlohmann::json::array();
    for (auto& est : rep.estimates) {
        for (auto& pt : est.series.points) csv.row({est.p, pt.T, pt.value, pt.error_bar});
        betas.push_back({{"p", est.p}, {"beta_hat", est.beta_hat},
                         {"slope_stderr", est.slope_stderr}});
    }
    csv.write(ctx.file("moments.csv"));
    ctx.current->summary = {{"betas", betas}, {"pass", rep.pass}};
    ctx.current->status = rep.pass ? "pass" : "fail";
}

// --- parseval_audit --------------------------------------------------------

inline void run_parseval_audit(RunContext& ctx, const ParsevalCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    Window window = Window::centered(cfg.half_width);
    DynamicsOptions opts;
    opts.dense_size_cap = std::max(6000, window.size());
    std::mt19937_64 rng(ctx.scenario.seed * 0x9e3779b97f4a7c15ull + 29);
    std::uniform_int_distribution<int> j_d(-cfg.j_max, cfg.j_max), n_d(-cfg.n_max, cfg.n_max);
    std::uniform_real_distribution<double> logt(std::log(cfg.t_min), std::log(cfg.t_max));
    struct Triple {
        int j, n;
        double T;
        Correlator c;
    };
    std::vector<Triple> triples(cfg.triples);
    for (auto& t : triples) {
        t.j = j_d(rng);
        t.n = n_d(rng);
        t.T = std::exp(logt(rng));
    }
    spectral_data(spec, window, &ctx.cache, opts);  // build once before forking
    parallel_for(cfg.triples, ctx.threads, [&](int i) {
        triples[i].c = correlator(spec, window, triples[i].j, triples[i].n, triples[i].T,
                                  &ctx.cache, opts);
    });
    CsvWriter csv({"j", "n", "T", "a_time", "a_energy", "residual", "relative_residual"});
    double worst = 0.0;
    for (auto& t : triples) {
        csv.row({t.j, t.n, t.T, t.c.a_time, t.c.a_energy, t.c.residual, t.c.relative_residual});
        worst = std::max(worst, t.c.relative_residual);
    }
    csv.write(ctx.file("correlators.csv"));
    ctx.current->summary = {{"triples", cfg.triples},
                            {"max_relative_residual", worst},
                            {"rel_tol", cfg.rel_tol}};
    ctx.current->status = worst <= cfg.rel_tol ? "pass" : "fail";
}

// --- correlator_decay ------------------------------------------------------

inline void run_correlator_decay(RunContext& ctx, const CorrelatorDecayCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    Window window = Window::centered(cfg.half_width);
    DynamicsOptions opts;
    opts.dense_size_cap = std::max(6000, window.size());
    std::vector<int> sites;
    for (int n = cfg.n_lo; n <= cfg.n_hi; n += cfg.n_stride) sites.push_back(n);
    std::vector<double> powers = linear_grid(cfg.c_min, cfg.c_max, cfg.c_points);
    auto rep = correlator_decay_check(spec, window, cfg.j, cfg.sample_time, sites, powers,
                                      cfg.fit_tol, &ctx.cache, opts, cfg.min_drop);
    CsvWriter csv({"j", "n", "T", "a_time"});
    for (auto& s : rep.samples) csv.row({cfg.j, s.n, cfg.sample_time, s.value});
    csv.write(ctx.file("decay.csv"));
    ctx.current->summary = {{"best_power", rep.best_power},
                            {"slope", rep.slope},
                            {"residual", rep.residual},
                            {"fitted_drop", rep.fitted_drop},
                            {"degenerate", rep.degenerate},
                            {"points_used", rep.points_used},
                            {"pass", rep.pass}};
    ctx.current->status = rep.pass ? "pass" : "fail";
}

// --- commutator_audit ------------------------------------------------------

inline void run_commutator_audit(RunContext& ctx, const CommutatorAuditCfg& cfg) {
    std::mt19937_64 rng(ctx.scenario.seed * 0x9e3779b97f4a7c15ull + 41);
    std::uniform_real_distribution<double> amp(0.5, 2.0), rate(0.7, 1.6), arg(-M_PI, M_PI);
    JsonlWriter dumps;
    double worst = 0.0;
    double worst_rate = std::numeric_limits<double>::infinity();
    Window window = Window::centered(cfg.half_width);
    for (int trial = 0; trial < cfg.trials; ++trial) {
        HoppingKernel kernel;
        double ka = amp(rng), kr = rate(rng);
        if (trial % 2 == 0) {
            kernel = HoppingKernel::exponential(ka, kr, 1e-10);
        } else {
            std::map<int, Complex> upper;
            for (int k = 1; k <= 6; ++k) {
                double a = arg(rng);
                upper[k] = ka * std::exp(-kr * k) * Complex{std::cos(a), std::sin(a)};
            }
            kernel = HoppingKernel::from_table(upper, ka, kr);
        }
        WeightSequence gamma = WeightSequence::exponential(amp(rng), rate(rng), 1e-10);
        int p = 1 + trial % cfg.p_max;
        double residual = commutator_residual(kernel, gamma, p, window);
        worst = std::max(worst, residual);
        auto parts = commutator_decompose(kernel, gamma, p);
        nlohmann::json seqs = nlohmann::json::array();
        for (int j = 0; j < p; ++j) {
            auto fit = sequence_decay_fit(parts[j]);
            if (!fit.degenerate && !parts[j].entries.empty())
                worst_rate = std::min(worst_rate, fit.rate_fit);
            nlohmann::json offsets = nlohmann::json::array(), values = nlohmann::json::array();
            for (auto& [m, g] : parts[j].entries) {
                offsets.push_back(m);
                values.push_back({g.real(), g.imag()});
            }
            seqs.push_back({{"j", j},
                            {"offsets", offsets},
                            {"values", values},
                            {"fitted_rate", fit.rate_fit},
                            {"fitted_amp", fit.amp_fit}});
        }
        dumps.record({{"trial", trial}, {"p", p}, {"residual", residual}, {"sequences", seqs}});
    }
    dumps.write(ctx.file("decompositions.jsonl"));
    ctx.current->summary = {{"trials", cfg.trials},
                            {"max_residual", worst},
                            {"min_fitted_rate", worst_rate},
                            {"tol", cfg.tol}};
    ctx.current->status = (worst <= cfg.tol && worst_rate > 0) ? "pass" : "fail";
}

// --- heisenberg_growth -----------------------------------------------------

inline void run_heisenberg_growth(RunContext& ctx, const HeisenbergCfg& cfg) {
    const OperatorSpec& spec = ctx.scenario.op;
    Window window = Window::centered(cfg.half_width);
    StateVector phi = make_delta(0, window);
    WeightSequence gamma = cfg.gamma_type == "delta"
                               ? WeightSequence::delta0()
                               : WeightSequence::exponential(cfg.gamma_amp, cfg.gamma_rate, 1e-10);
    DynamicsOptions opts;
    opts.dense_size_cap = std::max(6000, window.size());
    std::vector<double> grid = geometric_grid(cfg.t_min, cfg.t_max, cfg.t_points);
    CsvWriter csv({"N", "t", "norm", "fitted_slope"});
    JsonlWriter details;
    bool ok = true;
    for (int order : cfg.orders) {
        auto rep = heisenberg_moment_growth(spec, gamma, order, phi, grid, window, &ctx.cache,
                                            opts, cfg.growth_tol);
        for (auto& pt : rep.points) csv.row({order, pt.t, pt.norm_x, rep.slope});
        nlohmann::json pts = nlohmann::json::array();
        for (auto& pt : rep.points)
            pts.push_back({{"t", pt.t},
                           {"norm_x", pt.norm_x},
                           {"norm_hat_free", pt.norm_hat_free},
                           {"norm_hat_full", pt.norm_hat_full},
                           {"integral_bound", pt.integral_bound}});
        details.record({{"order", order},
                        {"slope", rep.slope},
                        {"slope_limit", rep.slope_limit},
                        {"pass_growth", rep.pass_growth},
                        {"pass_integral", rep.pass_integral},
                        {"points", pts}});
        ok = ok && rep.pass_growth && rep.pass_integral;
    }
    csv.write(ctx.file("growth.csv"));
    details.write(ctx.file("growth.jsonl"));
    ctx.current->summary = {{"orders", cfg.orders}};
    ctx.current->status = ok ? "pass" : "fail";
}

}  // namespace detail

inline RunManifest run_scenario(const Scenario& scenario, const RunOptions& options = {}) {
    RunManifest manifest;
    manifest.scenario_name = scenario.name;
    manifest.scenario_hash = scenario.hash;
    manifest.artifact_version = version_string();
    {
        std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        manifest.timestamp = buf;
    }
    detail::RunContext ctx{scenario,
                           options.out_dir.empty() ? std::filesystem::path(scenario.output_dir)
                                                   : options.out_dir,
                           std::max(1, options.threads)};
    std::filesystem::create_directories(ctx.out);
    for (const auto& exp : scenario.experiments) {
        ExperimentResult result;
        result.name = exp.name;
        result.type = exp.type;
        result.status = "fail";
        ctx.current = &result;
        auto start = std::chrono::steady_clock::now();
        try {
            std::visit(
                [&](const auto& cfg) {
                    using T = std::decay_t<decltype(cfg)>;
                    if constexpr (std::is_same_v<T, GoodBoxScanCfg>)
                        detail::run_good_box_scan(ctx, cfg);
                    else if constexpr (std::is_same_v<T, BadBoxCountCfg>)
                        detail::run_bad_box_count(ctx, cfg);
                    else if constexpr (std::is_same_v<T, BarrierChainCfg>)
                        detail::run_barrier_chain(ctx, cfg);
                    else if constexpr (std::is_same_v<T, ResolventIdentityCfg>)
                        detail::run_resolvent_identity(ctx, cfg);
                    else if constexpr (std::is_same_v<T, CombesThomasCfg>)
                        detail::run_combes_thomas(ctx, cfg);
                    else if constexpr (std::is_same_v<T, TransportExponentCfg>)
                        detail::run_transport_exponent(ctx, cfg);
                    else if constexpr (std::is_same_v<T, MonotonicityCfg>)
                        detail::run_beta_monotonicity(ctx, cfg);
                    else if constexpr (std::is_same_v<T, ParsevalCfg>)
                        detail::run_parseval_audit(ctx, cfg);
                    else if constexpr (std::is_same_v<T, CorrelatorDecayCfg>)
                        detail::run_correlator_decay(ctx, cfg);
                    else if constexpr (std::is_same_v<T, CommutatorAuditCfg>)
                        detail::run_commutator_audit(ctx, cfg);
                    else
                        detail::run_heisenberg_growth(ctx, cfg);
                },
                exp.cfg);
        } catch (const std::exception& e) {
            result.status = "fail";
            result.summary = {{"error", std::string(e.what()) + " (experiment " + exp.name + ")"}};
        }
        result.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        manifest.all_ok = manifest.all_ok && result.status != "fail";
        manifest.experiments.push_back(std::move(result));
    }
    std::ofstream mf(ctx.out / "manifest.json");
    mf << manifest.to_json().dump(2) << '\n';
    return manifest;
}

}  // namespace qdlab
