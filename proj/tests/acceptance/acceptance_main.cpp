// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one pass/fail line per criterion.  Exit status = number of failures.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "qdlab/qdlab.hpp"

using namespace qdlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;  // 0 = no stated budget
};

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

OperatorSpec long_range_free() {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::exponential(1.0, 1.0);
    spec.potential = PotentialLaw::constant(0.0);
    spec.coupling = 1.0;
    return spec;
}

OperatorSpec nn_free() {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::nearest_neighbor(1.0);
    spec.potential = PotentialLaw::constant(0.0);
    spec.coupling = 1.0;
    return spec;
}

OperatorSpec supercritical() {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::exponential(1.0, 1.0);
    spec.potential = PotentialLaw::quasiperiodic(TrigPoly{0.0, {2.0}, {}}, 0.0, kGolden);
    spec.coupling = 0.1;
    return spec;
}

std::string fmt(double x) { return format_double(x); }

class Timer {
  public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// --- criterion 1: resolvent-identity exactness ------------------------------

Outcome criterion_1() {
    Outcome out{1, "resolvent identity exact on 100 random splits"};
    out.budget_seconds = 60.0;
    Timer timer;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> amp(0.5, 2.0), rate(0.5, 1.5), coup(0.2, 1.0),
        vamp(0.5, 2.5), theta(0.0, 1.0), eta(0.05, 0.4);
    double worst = 0.0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        OperatorSpec spec;
        spec.kernel = HoppingKernel::exponential(amp(rng), rate(rng));
        spec.potential = PotentialLaw::quasiperiodic(TrigPoly{0.0, {vamp(rng)}, {}}, theta(rng),
                                                     kGolden);
        spec.coupling = coup(rng);
        std::uniform_int_distribution<int> size_d(48, 256), center_d(-64, 64);
        int size = size_d(rng);
        Window w{center_d(rng) - size / 2, 0};
        w.hi = w.lo + size - 1;
        std::uniform_int_distribution<int> split_d(w.lo, w.hi - 1);
        double k_bound = spectrum_bound(spec);
        std::uniform_real_distribution<double> e_d(-k_bound, k_bound);
        worst = std::max(worst, resolvent_identity_residual(spec, w, split_d(rng),
                                                            Energy{e_d(rng), eta(rng)}));
    }
    out.seconds = timer.seconds();
    out.pass = worst <= 1e-8;
    out.detail = "max residual " + fmt(worst) + " (tol 1e-8, " + std::to_string(trials) +
                 " splits, windows <= 256)";
    return out;
}

// --- criterion 3: Parseval audit --------------------------------------------

Outcome criterion_3(EigenCache& cache, int threads) {
    Outcome out{3, "Parseval audit: 50 random (j,n,T) triples per scenario"};
    out.budget_seconds = 600.0;
    Timer timer;
    double worst = 0.0;
    int count = 0;
    DynamicsOptions opts;
    for (const OperatorSpec& spec : {long_range_free(), supercritical()}) {
        Window w = Window::centered(512);  // 1025 sites
        spectral_data(spec, w, &cache, opts);
        std::mt19937_64 rng(303);
        std::uniform_int_distribution<int> j_d(-8, 8), n_d(-64, 64);
        std::uniform_real_distribution<double> logt(std::log(5.0), std::log(100.0));
        struct Triple {
            int j, n;
            double T, rel;
        };
        std::vector<Triple> triples(50);
        for (auto& t : triples) {
            t.j = j_d(rng);
            t.n = n_d(rng);
            t.T = std::exp(logt(rng));
        }
        parallel_for(static_cast<int>(triples.size()), threads, [&](int i) {
            Correlator c = correlator(spec, w, triples[i].j, triples[i].n, triples[i].T, &cache,
                                      opts);
            triples[i].rel = c.relative_residual;
        });
        for (auto& t : triples) {
            worst = std::max(worst, t.rel);
            ++count;
        }
    }
    out.seconds = timer.seconds();
    out.pass = worst <= 1e-4;
    out.detail = "max |a_time - a_energy| / max(a_time, 1e-12) = " + fmt(worst) + " over " +
                 std::to_string(count) + " triples at 1025 sites (tol 1e-4)";
    return out;
}

// --- criterion 4: commutator decomposition ----------------------------------

Outcome criterion_4() {
    Outcome out{4, "commutator decomposition exact, envelopes positive"};
    Timer timer;
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> amp(0.5, 2.0), rate(0.7, 1.6), arg(-M_PI, M_PI);
    double worst = 0.0;
    double min_rate = std::numeric_limits<double>::infinity();
    const int trials = 50;
    Window w = Window::centered(80);
    for (int t = 0; t < trials; ++t) {
        HoppingKernel kernel;
        double ka = amp(rng), kr = rate(rng);
        if (t % 2 == 0) {
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
        int p = 1 + t % 4;
        worst = std::max(worst, commutator_residual(kernel, gamma, p, w));
        for (auto& seq : commutator_decompose(kernel, gamma, p)) {
            auto fit = sequence_decay_fit(seq);
            if (!fit.degenerate && !seq.entries.empty()) min_rate = std::min(min_rate, fit.rate_fit);
        }
    }
    out.seconds = timer.seconds();
    out.pass = worst <= 1e-12 && min_rate > 0;
    out.detail = "max interior residual " + fmt(worst) + " (tol 1e-12, p <= 4, " +
                 std::to_string(trials) + " trials); min fitted envelope rate " + fmt(min_rate);
    return out;
}

// --- criteria 5 and 6: ballistic bounds -------------------------------------

Outcome criterion_5(EigenCache& cache) {
    Outcome out{5, "ballistic bound for the long-range kernel"};
    out.budget_seconds = 900.0;
    Timer timer;
    OperatorSpec spec = long_range_free();
    Window w = Window::centered(2047);  // 4095 sites
    StateVector phi = make_delta(0, w);
    auto grid = geometric_grid(100.0, 1000.0, 9);
    auto rep = ballistic_check(spec, w, phi, {2.0, 4.0}, grid, &cache, {}, 0.05);
    out.seconds = timer.seconds();
    out.pass = rep.all_pass;
    out.detail = "beta(2) = " + fmt(rep.estimates[0].beta_hat) + ", beta(4) = " +
                 fmt(rep.estimates[1].beta_hat) + " <= 1.05 over T in [1e2,1e3], 4095 sites";
    return out;
}

Outcome criterion_6() {
    Outcome out{6, "free-Laplacian ballistic lower sanity"};
    Timer timer;
    OperatorSpec spec = nn_free();
    Window w = Window::centered(6144);  // 12289 sites, analytic sine basis
    StateVector phi = make_delta(0, w);
    auto grid = geometric_grid(100.0, 1000.0, 9);
    EigenCache local;  // scoped: the 12289^2 basis is ~1.2 GB
    DynamicsOptions opts;
    bool ok = true;
    std::string betas;
    for (double p : {2.0, 4.0}) {
        auto est = transport_exponent(spec, w, phi, p, grid, &local, opts);
        ok = ok && est.beta_hat >= 0.9 && est.beta_hat <= 1.05;
        betas += (betas.empty() ? "" : ", ") + std::string("beta(") + fmt(p) + ") = " +
                 fmt(est.beta_hat);
    }
    out.seconds = timer.seconds();
    out.pass = ok;
    out.detail = betas + " in [0.9, 1.05] over T in [1e2,1e3], 12289 sites";
    return out;
}

// --- criterion 7: localization surrogate ------------------------------------

Outcome criterion_7(EigenCache& cache, int threads) {
    Outcome out{7, "localization surrogate (good boxes, barrier, beta)"};
    out.budget_seconds = 1800.0;
    Timer timer;
    OperatorSpec spec = supercritical();
    double k_bound = spectrum_bound(spec);

    // (a) good-box scan across a 21-point energy grid; an energy counts when
    // any admissible box size |I| >= N^delta = 6.03 yields a passing interval
    std::vector<double> energies = linear_grid(-k_bound, k_bound, 21);
    const std::vector<int> scan_ells = {30, 40, 50};
    std::vector<char> found(energies.size(), 0);
    parallel_for(static_cast<int>(energies.size()), threads, [&](int i) {
        for (int ell : scan_ells) {
            GoodBoxScan scan = scan_good_boxes(spec, 400, Energy{energies[i], 0.01}, 0.3, ell);
            if (scan.any_pass) {
                found[i] = 1;
                return;
            }
        }
    });
    int with_pass = 0;
    for (char f : found) with_pass += f;
    double fraction = static_cast<double>(with_pass) / energies.size();
    bool pass_a = fraction >= 0.8;

    // (b) stage-3 maxima decrease with ell (target scales as 8*ell + 4); use
    // the smallest-|E| grid energy whose scans find a box at every ell
    std::vector<int> ells = {20, 40, 80};
    std::vector<double> candidates = energies;
    std::sort(candidates.begin(), candidates.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });
    std::vector<double> stage3;
    double used_energy = 0.0;
    bool pass_b = false;
    for (double e_try : candidates) {
        stage3.clear();
        bool all_found = true;
        for (int ell : ells) {
            int target = 8 * ell + 4;
            Energy z{e_try, 0.01};
            GoodBoxScan scan = scan_good_boxes(spec, target, z, 0.3, ell);
            const GoodBoxReport* chosen = nullptr;
            for (auto& rep : scan.reports)
                if (rep.pass && rep.interval.lo > 0) {
                    chosen = &rep;
                    break;
                }
            if (!chosen) {
                all_found = false;
                break;
            }
            int center = (chosen->interval.lo + chosen->interval.hi) / 2;
            BarrierOptions bopts;
            bopts.delta = 0.3;
            auto cert = barrier_chain(spec, center, ell, z, 1, target, BarrierConstants{}, bopts);
            stage3.push_back(cert.stages[2].max_abs);
        }
        if (!all_found) continue;
        used_energy = e_try;
        pass_b = true;
        const double floor = 1e-290;
        for (std::size_t i = 0; i + 1 < stage3.size(); ++i) {
            double a = std::max(stage3[i], floor), b = std::max(stage3[i + 1], floor);
            if (b > a * 1.05) pass_b = false;
        }
        break;
    }

    // (c) transport exponent at p = 2 stays below 0.15
    Window w = Window::centered(1024);  // 2049 sites
    StateVector phi = make_delta(0, w);
    auto est = transport_exponent(spec, w, phi, 2.0, geometric_grid(100.0, 1000.0, 9), &cache);
    bool pass_c = est.beta_hat <= 0.15;

    out.seconds = timer.seconds();
    out.pass = pass_a && pass_b && pass_c;
    std::string s3 = "[";
    for (std::size_t i = 0; i < stage3.size(); ++i)
        s3 += (i ? ", " : "") + fmt(stage3[i]);
    s3 += "]";
    out.detail = "(a) boxes at " + fmt(fraction * 100.0) + "% of 21 energies (need 80%); (b) stage-3 maxima " +
                 s3 + " at E = " + fmt(used_energy) + (pass_b ? " decreasing" : " NOT decreasing") +
                 "; (c) beta(2) = " + fmt(est.beta_hat) + " <= 0.15 at 2049 sites";
    return out;
}

// --- criterion 8: Combes-Thomas ---------------------------------------------

Outcome criterion_8() {
    Outcome out{8, "Combes-Thomas decay rates outside the spectrum"};
    Timer timer;
    auto nn_rep = combes_thomas_check(nn_free(), Energy{3.0, 0.01}, 0, 8, 140);
    const double oracle = 0.9624236501192069;  // arccosh(3/2)
    double rel = std::abs(nn_rep.decay_rate_fit - oracle) / oracle;
    OperatorSpec lr = long_range_free();
    auto lr_rep = combes_thomas_check(lr, Energy{spectrum_bound(lr) + 1.0, 0.01}, 0, 8, 100);
    out.seconds = timer.seconds();
    out.pass = rel <= 0.05 && lr_rep.decay_rate_fit > 0.0 && lr_rep.pass;
    out.detail = "nn rate " + fmt(nn_rep.decay_rate_fit) + " vs arccosh(3/2) = " + fmt(oracle) +
                 " (rel err " + fmt(rel) + ", tol 5%); long-range rate " +
                 fmt(lr_rep.decay_rate_fit) + " > 0";
    return out;
}

// --- criterion 9: correlator bound shape -------------------------------------

Outcome criterion_9(EigenCache& cache) {
    Outcome out{9, "correlator decay shape in the localized scenario"};
    Timer timer;
    OperatorSpec spec = supercritical();
    Window w = Window::centered(1024);
    std::vector<double> powers = linear_grid(0.5, 1.0, 6);
    std::vector<int> spec_range;
    for (int n = 50; n <= 400; n += 25) spec_range.push_back(n);
    auto far = correlator_decay_check(spec, w, 0, 100.0, spec_range, powers, 0.5, &cache);
    std::vector<int> near_range;
    for (int n = 2; n <= 24; n += 2) near_range.push_back(n);
    auto near = correlator_decay_check(spec, w, 0, 100.0, near_range, powers, 3.0, &cache, {},
                                       4.0);
    out.seconds = timer.seconds();
    out.pass = far.pass && near.pass && near.slope < 0;
    out.detail = std::string("n in [50,400]: ") +
                 (far.degenerate ? "all below 1e-14 floor (decay faster than measurable)"
                                 : ("fit residual " + fmt(far.residual))) +
                 "; measurable range n in [2,24]: slope " + fmt(near.slope) + " at power " +
                 fmt(near.best_power) + ", drop " + fmt(near.fitted_drop) + " decades";
    return out;
}

// --- criterion 10: beta monotonicity -----------------------------------------

Outcome criterion_10(EigenCache& cache) {
    Outcome out{10, "beta(p) nondecreasing in p (free and localized)"};
    Timer timer;
    bool ok = true;
    std::string detail;
    {
        OperatorSpec spec = long_range_free();
        Window w = Window::centered(2047);
        auto rep = beta_monotonicity_check(spec, w, make_delta(0, w), {1.0, 2.0, 4.0},
                                           geometric_grid(10.0, 100.0, 7), &cache);
        ok = ok && rep.pass;
        detail += "free: ";
        for (auto& e : rep.estimates) detail += fmt(e.beta_hat) + " ";
    }
    {
        OperatorSpec spec = supercritical();
        Window w = Window::centered(1024);
        auto rep = beta_monotonicity_check(spec, w, make_delta(0, w), {1.0, 2.0, 4.0},
                                           geometric_grid(100.0, 1000.0, 7), &cache);
        ok = ok && rep.pass;
        detail += "; localized: ";
        for (auto& e : rep.estimates) detail += fmt(e.beta_hat) + " ";
    }
    out.seconds = timer.seconds();
    out.pass = ok;
    out.detail = detail + "(p = 1, 2, 4; nondecreasing within combined fit residuals)";
    return out;
}

// --- criterion 11: determinism ------------------------------------------------

Outcome criterion_11(const fs::path& scenario_dir) {
    Outcome out{11, "repeated scenario runs give byte-identical CSVs"};
    Timer timer;
    out.pass = true;
    int compared = 0;
    for (const char* name : {"barrier_demo.json", "parseval_audit.json"}) {
        fs::path file = scenario_dir / name;
        std::vector<std::string> overrides;
        if (std::string(name) == "parseval_audit.json")
            overrides.push_back("experiments.0.triples=12");
        Scenario s = load_scenario(file, overrides);
        fs::path out1 = fs::temp_directory_path() / ("qdlab_acc1_" + s.name);
        fs::path out2 = fs::temp_directory_path() / ("qdlab_acc2_" + s.name);
        fs::remove_all(out1);
        fs::remove_all(out2);
        RunOptions o1;
        o1.out_dir = out1;
        o1.threads = 1;
        RunOptions o2;
        o2.out_dir = out2;
        o2.threads = 2;
        run_scenario(s, o1);
        run_scenario(s, o2);
        for (auto& p : fs::directory_iterator(out1)) {
            if (p.path().extension() != ".csv" && p.path().extension() != ".jsonl") continue;
            ++compared;
            if (slurp(p.path()) != slurp(out2 / p.path().filename())) {
                out.pass = false;
                out.detail += p.path().filename().string() + " differs; ";
            }
        }
        fs::remove_all(out1);
        fs::remove_all(out2);
    }
    out.seconds = timer.seconds();
    if (out.pass)
        out.detail = std::to_string(compared) +
                     " report files byte-identical across reruns (threads 1 vs 2)";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path scenario_dir = "scenarios";
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--scenario-dir" && i + 1 < argc) scenario_dir = argv[i + 1];
    }

    EigenCache cache;
    const int threads = 2;
    std::vector<Outcome> results;
    auto note = [&](Outcome o) {
        std::fprintf(stderr, "  [done] criterion %d (%.1fs)\n", o.id, o.seconds);
        results.push_back(std::move(o));
    };

    note(criterion_1());
    note(criterion_3(cache, threads));
    note(criterion_4());
    note(criterion_5(cache));
    note(criterion_6());
    note(criterion_7(cache, threads));
    note(criterion_8());
    note(criterion_9(cache));
    note(criterion_10(cache));
    note(criterion_11(scenario_dir));

    // criterion 2 audits the global resolvent-bound counter across everything
    // the suite just computed, so it is evaluated last
    {
        Outcome out{2, "resolvent bound |G| <= 1/eta with zero violations"};
        long violations = resolvent_bound_violations().load();
        out.pass = violations == 0;
        out.detail = std::to_string(violations) +
                     " violations recorded across all Green's-function sweeps in this suite";
        results.push_back(std::move(out));
    }

    std::sort(results.begin(), results.end(),
              [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
    int failures = 0;
    for (auto& r : results) {
        bool budget_ok = r.budget_seconds <= 0.0 || r.seconds < r.budget_seconds;
        bool pass = r.pass && budget_ok;
        if (!pass) ++failures;
        std::printf("criterion %2d %s  %s -- %s%s (%.1fs)\n", r.id, pass ? "PASS" : "FAIL",
                    r.title.c_str(), r.detail.c_str(),
                    budget_ok ? "" : " [RUNTIME BUDGET EXCEEDED]", r.seconds);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures;
}
