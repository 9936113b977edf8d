// lattice_operator.hpp - long-range quasiperiodic operators and finite restrictions
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "qdlab/common.hpp"
#include "qdlab/fitting.hpp"

namespace qdlab {

// ---------------------------------------------------------------------------
// hopping kernel {a_n}
// ---------------------------------------------------------------------------

// Finitely supported Hermitian hopping amplitudes with a certified
// exponential envelope |a_n| <= decay_amp * exp(-decay_rate*|n|).
struct HoppingKernel {
    std::map<int, Complex> entries;  // offset -> a_n, zero entries not stored
    double decay_amp = 1.0;          // A1
    double decay_rate = 1.0;         // per-site rate a
    int truncation_radius = 0;

    Complex at(int n) const {
        auto it = entries.find(n);
        return it == entries.end() ? Complex{0.0, 0.0} : it->second;
    }

    double abs_sum() const {
        double s = 0;
        for (auto& [n, a] : entries) s += std::abs(a);
        return s;
    }

    // sum |n * a_n|; group-velocity bound for light-cone estimates
    double weighted_abs_sum() const {
        double s = 0;
        for (auto& [n, a] : entries) s += std::abs(n) * std::abs(a);
        return s;
    }

    // sum of |a_k| over |k| > d
    double tail_abs_sum(int d) const {
        double s = 0;
        for (auto& [n, a] : entries)
            if (std::abs(n) > d) s += std::abs(a);
        return s;
    }

    bool is_real() const {
        for (auto& [n, a] : entries)
            if (a.imag() != 0.0) return false;
        return true;
    }

    void validate() const {
        for (auto& [n, a] : entries) {
            Complex mirror = at(-n);
            require(mirror == std::conj(a), "kernel violates a_{-n} = conj(a_n)");
            require(std::abs(a) <= decay_amp * std::exp(-decay_rate * std::abs(n)) * (1 + 1e-12),
                    "kernel entry exceeds its decay envelope");
            require(std::abs(n) <= truncation_radius, "kernel entry beyond truncation radius");
        }
    }

    // a_n = amp * exp(-rate*|n|) for 0 < |n| <= R, R chosen so the discarded
    // tail is below tail_tol.
    static HoppingKernel exponential(double amp, double rate, double tail_tol = 1e-14,
                                     bool include_zero = false) {
        require(amp > 0 && rate > 0, "exponential kernel needs amp, rate > 0");
        HoppingKernel k;
        k.decay_amp = amp;
        k.decay_rate = rate;
        k.truncation_radius = static_cast<int>(std::ceil(std::log(amp / tail_tol) / rate));
        k.truncation_radius = std::max(k.truncation_radius, 1);
        for (int n = include_zero ? 0 : 1; n <= k.truncation_radius; ++n) {
            double a = amp * std::exp(-rate * n);
            if (a == 0.0) break;
            k.entries[n] = a;
            if (n > 0) k.entries[-n] = a;
        }
        k.validate();
        return k;
    }

    static HoppingKernel nearest_neighbor(double amplitude = 1.0) {
        HoppingKernel k;
        k.decay_amp = std::abs(amplitude) * std::exp(1.0);
        k.decay_rate = 1.0;
        k.truncation_radius = 1;
        if (amplitude != 0.0) {
            k.entries[1] = amplitude;
            k.entries[-1] = amplitude;
        }
        k.validate();
        return k;
    }

    // Explicit table for one side; the mirror side is filled by conjugation.
    static HoppingKernel from_table(const std::map<int, Complex>& upper, double amp, double rate) {
        HoppingKernel k;
        k.decay_amp = amp;
        k.decay_rate = rate;
        for (auto& [n, a] : upper) {
            require(n >= 0, "from_table expects offsets n >= 0");
            if (a == Complex{0.0, 0.0}) continue;
            if (n == 0) require(a.imag() == 0.0, "a_0 must be real");
            k.entries[n] = a;
            if (n > 0) k.entries[-n] = std::conj(a);
            k.truncation_radius = std::max(k.truncation_radius, n);
        }
        k.truncation_radius = std::max(k.truncation_radius, 1);
        k.validate();
        return k;
    }
};

struct KernelDecayFit {
    double amp_fit = 0.0;
    double rate_fit = 0.0;
    bool envelope_ok = false;
    bool degenerate = false;  // not enough distinct |n| to fit a slope
    LineFit fit;
};

// Least-squares fit of log|a_n| against |n| over the stored nonzero offsets.
inline KernelDecayFit kernel_decay_fit(const HoppingKernel& kernel) {
    std::vector<double> xs, ys;
    for (auto& [n, a] : kernel.entries) {
        if (n == 0) continue;
        double m = std::abs(a);
        if (m <= 0) continue;
        xs.push_back(std::abs(n));
        ys.push_back(std::log(m));
    }
    if (xs.empty()) throw numerical_error("kernel_decay_fit: all off-diagonal entries are zero");
    KernelDecayFit out;
    out.envelope_ok = true;
    for (auto& [n, a] : kernel.entries) {
        if (std::abs(a) >
            kernel.decay_amp * std::exp(-kernel.decay_rate * std::abs(n)) * (1 + 1e-12))
            out.envelope_ok = false;
    }
    out.fit = fit_line(xs, ys);
    if (out.fit.degenerate) {
        out.degenerate = true;
        out.rate_fit = 0.0;
        double peak = 0;
        for (double y : ys) peak = std::max(peak, std::exp(y));
        out.amp_fit = peak;
        return out;
    }
    out.rate_fit = -out.fit.slope;
    out.amp_fit = std::exp(out.fit.intercept);
    return out;
}

// ---------------------------------------------------------------------------
// potential laws
// ---------------------------------------------------------------------------

// Real trigonometric polynomial on the torus,
// v(x) = a0 + sum_k cos_coeffs[k] cos(2 pi (k+1) x) + sin_coeffs[k] sin(2 pi (k+1) x).
struct TrigPoly {
    double a0 = 0.0;
    std::vector<double> cos_coeffs;
    std::vector<double> sin_coeffs;

    double eval(double x) const {
        double v = a0;
        for (std::size_t k = 0; k < cos_coeffs.size(); ++k)
            v += cos_coeffs[k] * std::cos(2.0 * M_PI * (k + 1) * x);
        for (std::size_t k = 0; k < sin_coeffs.size(); ++k)
            v += sin_coeffs[k] * std::sin(2.0 * M_PI * (k + 1) * x);
        return v;
    }

    double sup_bound() const {
        double b = std::abs(a0);
        for (double c : cos_coeffs) b += std::abs(c);
        for (double s : sin_coeffs) b += std::abs(s);
        return b;
    }
};

class PotentialLaw {
  public:
    struct Quasiperiodic {
        TrigPoly v;
        double phase = 0.0;      // theta in [0,1)
        double frequency = 0.0;  // alpha in (0,1)
    };
    struct ExplicitTable {
        int lo = 0;
        std::vector<double> values;
    };
    struct Constant {
        double value = 0.0;
    };

    static PotentialLaw quasiperiodic(TrigPoly v, double phase, double frequency) {
        PotentialLaw p;
        p.law_ = Quasiperiodic{std::move(v), phase, frequency};
        return p;
    }
    static PotentialLaw explicit_table(int lo, std::vector<double> values) {
        require(!values.empty(), "explicit potential needs at least one value");
        PotentialLaw p;
        p.law_ = ExplicitTable{lo, std::move(values)};
        return p;
    }
    static PotentialLaw constant(double c) {
        PotentialLaw p;
        p.law_ = Constant{c};
        return p;
    }

    double value(int site) const {
        if (auto* q = std::get_if<Quasiperiodic>(&law_)) {
            double x = std::fmod(q->phase + site * q->frequency, 1.0);
            if (x < 0) x += 1.0;
            return q->v.eval(x);
        }
        if (auto* t = std::get_if<ExplicitTable>(&law_)) {
            int i = site - t->lo;
            require(i >= 0 && i < static_cast<int>(t->values.size()),
                    "explicit potential evaluated outside its table");
            return t->values[i];
        }
        return std::get<Constant>(law_).value;
    }

    double sup_bound() const {
        if (auto* q = std::get_if<Quasiperiodic>(&law_)) return q->v.sup_bound();
        if (auto* t = std::get_if<ExplicitTable>(&law_)) {
            double b = 0;
            for (double v : t->values) b = std::max(b, std::abs(v));
            return b;
        }
        return std::abs(std::get<Constant>(law_).value);
    }

    bool is_constant() const { return std::holds_alternative<Constant>(law_); }
    const Quasiperiodic* as_quasiperiodic() const { return std::get_if<Quasiperiodic>(&law_); }

    void feed(Fingerprint& fp) const {
        if (auto* q = std::get_if<Quasiperiodic>(&law_)) {
            fp.feed(std::string("qp"));
            fp.feed(q->v.a0);
            for (double c : q->v.cos_coeffs) fp.feed(c);
            for (double s : q->v.sin_coeffs) fp.feed(s);
            fp.feed(q->phase);
            fp.feed(q->frequency);
        } else if (auto* t = std::get_if<ExplicitTable>(&law_)) {
            fp.feed(std::string("table"));
            fp.feed(t->lo);
            for (double v : t->values) fp.feed(v);
        } else {
            fp.feed(std::string("const"));
            fp.feed(std::get<Constant>(law_).value);
        }
    }

  private:
    std::variant<Quasiperiodic, ExplicitTable, Constant> law_ = Constant{0.0};
};

// ---------------------------------------------------------------------------
// operator spec and assembly
// ---------------------------------------------------------------------------

// (H u)_n = coupling * sum_k a_{n-k} u_k + V_n u_n
struct OperatorSpec {
    HoppingKernel kernel;
    PotentialLaw potential;
    double coupling = 1.0;

    std::uint64_t fingerprint() const {
        Fingerprint fp;
        for (auto& [n, a] : kernel.entries) {
            fp.feed(n);
            fp.feed(a);
        }
        fp.feed(kernel.decay_amp);
        fp.feed(kernel.decay_rate);
        fp.feed(kernel.truncation_radius);
        potential.feed(fp);
        fp.feed(coupling);
        return fp.state;
    }
};

// Dense Hermitian restriction to a window; built from the upper triangle and
// mirrored, so M equals its own adjoint exactly.
inline MatrixXcd assemble(const OperatorSpec& spec, const Window& window) {
    require_window(window);
    const int n = window.size();
    MatrixXcd m = MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = spec.coupling * spec.kernel.at(0).real() + spec.potential.value(window.site_of(i));
        int jmax = std::min(n - 1, i + spec.kernel.truncation_radius);
        for (int j = i + 1; j <= jmax; ++j) {
            Complex a = spec.kernel.at(i - j);
            if (a == Complex{0.0, 0.0}) continue;
            m(i, j) = spec.coupling * a;
            m(j, i) = std::conj(m(i, j));
        }
    }
    return m;
}

inline bool spec_is_real(const OperatorSpec& spec) { return spec.kernel.is_real(); }

// Real-symmetric assembly; only valid when spec_is_real().
inline MatrixXd assemble_real(const OperatorSpec& spec, const Window& window) {
    require(spec_is_real(spec), "assemble_real: kernel has complex entries");
    require_window(window);
    const int n = window.size();
    MatrixXd m = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = spec.coupling * spec.kernel.at(0).real() + spec.potential.value(window.site_of(i));
        int jmax = std::min(n - 1, i + spec.kernel.truncation_radius);
        for (int j = i + 1; j <= jmax; ++j) {
            double a = spec.kernel.at(i - j).real();
            if (a == 0.0) continue;
            m(i, j) = spec.coupling * a;
            m(j, i) = m(i, j);
        }
    }
    return m;
}

// K with sigma(H) inside [-K+1, K-1], via the Schur row-sum bound plus one of slack.
inline double spectrum_bound(const OperatorSpec& spec) {
    return std::abs(spec.coupling) * spec.kernel.abs_sum() + spec.potential.sup_bound() + 1.0;
}

// ---------------------------------------------------------------------------
// Diophantine diagnostics
// ---------------------------------------------------------------------------

struct DiophantineParams {
    double kappa = 1.0;
    double tau = 0.1;
    long k_max = 1000;
};

struct DiophantineReport {
    bool pass = false;
    long worst_k = 0;
    double worst_value = 0.0;  // min over k of ||k alpha|| * |k|^kappa
    double worst_dist = 0.0;   // ||worst_k * alpha||
};

inline double torus_distance(double x) {
    double f = std::fmod(x, 1.0);
    if (f < 0) f += 1.0;
    return std::min(f, 1.0 - f);
}

// pass iff ||k alpha|| >= tau / |k|^kappa for all 1 <= k <= k_max
inline DiophantineReport diophantine_check(double alpha, const DiophantineParams& params) {
    require(alpha > 0 && alpha < 1, "diophantine_check: need 0 < alpha < 1");
    require(params.k_max >= 1 && params.kappa > 0 && params.tau > 0,
            "diophantine_check: bad parameters");
    DiophantineReport rep;
    rep.pass = true;
    double best = std::numeric_limits<double>::infinity();
    for (long k = 1; k <= params.k_max; ++k) {
        double dist = torus_distance(k * alpha);
        double scaled = dist * std::pow(static_cast<double>(k), params.kappa);
        if (scaled < best) {
            best = scaled;
            rep.worst_k = k;
            rep.worst_dist = dist;
        }
        if (dist < params.tau / std::pow(static_cast<double>(k), params.kappa)) rep.pass = false;
    }
    rep.worst_value = best;
    return rep;
}

}  // namespace qdlab
