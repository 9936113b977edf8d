// commutator.hpp - weighted momentum operators and the commutator calculus
// behind the ballistic bound
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "qdlab/common.hpp"
#include "qdlab/dynamics.hpp"
#include "qdlab/fitting.hpp"
#include "qdlab/lattice_operator.hpp"

namespace qdlab {

// Commutator convention used throughout this module: [B1, B2] = B2 B1 - B1 B2.
// hat(X) = -i [H0, X] therefore equals -i (X H0 - H0 X).
inline MatrixXcd commutator_bracket(const MatrixXcd& b1, const MatrixXcd& b2) {
    return b2 * b1 - b1 * b2;
}

// Exponentially decaying weight sequence gamma = {gamma_k}.
struct WeightSequence {
    std::map<int, Complex> entries;
    double decay_amp = 1.0;   // C_gamma
    double decay_rate = 1.0;  // c_gamma
    int radius = 0;

    Complex at(int k) const {
        auto it = entries.find(k);
        return it == entries.end() ? Complex{0.0, 0.0} : it->second;
    }

    void validate() const {
        for (auto& [k, g] : entries) {
            require(std::abs(k) <= radius, "weight entry beyond radius");
            require(std::abs(g) <= decay_amp * std::exp(-decay_rate * std::abs(k)) * (1 + 1e-12),
                    "weight entry exceeds its decay envelope");
        }
    }

    static WeightSequence delta0() {
        WeightSequence w;
        w.entries[0] = 1.0;
        w.decay_amp = 1.0;
        w.decay_rate = 1.0;
        w.radius = 0;
        return w;
    }

    static WeightSequence exponential(double amp, double rate, double tail_tol = 1e-14) {
        require(amp > 0 && rate > 0, "exponential weights need amp, rate > 0");
        WeightSequence w;
        w.decay_amp = amp;
        w.decay_rate = rate;
        w.radius = std::max(1, static_cast<int>(std::ceil(std::log(amp / tail_tol) / rate)));
        for (int k = -w.radius; k <= w.radius; ++k)
            w.entries[k] = amp * std::exp(-rate * std::abs(k));
        w.validate();
        return w;
    }

    static WeightSequence from_table(std::map<int, Complex> table, double amp, double rate) {
        WeightSequence w;
        w.decay_amp = amp;
        w.decay_rate = rate;
        for (auto& [k, g] : table) {
            if (g == Complex{0.0, 0.0}) continue;
            w.entries[k] = g;
            w.radius = std::max(w.radius, std::abs(k));
        }
        w.validate();
        return w;
    }
};

struct MomentumOperator {
    int order = 0;  // p in X^gamma_{2p}
    WeightSequence weights;
};

// Matrix of (X u)_n = n^p sum_k gamma_k u_{n-k} on a window:
// M(i,j) = site_i^p * gamma_{site_i - site_j}.
inline MatrixXcd momentum_matrix(const MomentumOperator& op, const Window& window) {
    require_window(window);
    const int n = window.size();
    MatrixXcd m = MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double np = pow_int(static_cast<double>(window.site_of(i)), op.order);
        int jlo = std::max(0, i - op.weights.radius);
        int jhi = std::min(n - 1, i + op.weights.radius);
        for (int j = jlo; j <= jhi; ++j) {
            Complex g = op.weights.at(i - j);
            if (g != Complex{0.0, 0.0}) m(i, j) = np * g;
        }
    }
    return m;
}

// Lower-order weights gamma^0..gamma^{p-1} with
//   (gamma^j)_m = i * binom(p,j) * sum_k (-k)^{p-j} a_k gamma_{m-k},
// so that -i[H0, X^gamma_{2p}] = sum_j X^{gamma^j}_{2j} on window interiors.
// The closed form follows from expanding n^p - (n-k)^p binomially; it is
// validated against the finite-matrix commutator oracle in the test suite.
inline std::vector<WeightSequence> commutator_decompose(const HoppingKernel& kernel,
                                                        const WeightSequence& gamma, int p) {
    require(p >= 1, "commutator_decompose: need p >= 1");
    std::vector<WeightSequence> out;
    const int radius = kernel.truncation_radius + gamma.radius;
    const double rate = 0.999 * std::min(kernel.decay_rate, gamma.decay_rate);
    for (int j = 0; j < p; ++j) {
        WeightSequence w;
        double coeff = static_cast<double>(binomial(p, j));
        for (int m = -radius; m <= radius; ++m) {
            Complex s{0.0, 0.0};
            for (auto& [k, a] : kernel.entries) {
                Complex g = gamma.at(m - k);
                if (g == Complex{0.0, 0.0}) continue;
                s += pow_int(static_cast<double>(-k), p - j) * a * g;
            }
            Complex value = Complex{0.0, 1.0} * coeff * s;
            if (value != Complex{0.0, 0.0}) {
                w.entries[m] = value;
                w.radius = std::max(w.radius, std::abs(m));
            }
        }
        w.decay_rate = rate;
        double amp = 1e-300;
        for (auto& [m, g] : w.entries)
            amp = std::max(amp, std::abs(g) * std::exp(rate * std::abs(m)));
        w.decay_amp = amp;
        w.radius = std::max(w.radius, 1);
        w.validate();
        out.push_back(std::move(w));
    }
    return out;
}

namespace detail {

inline MatrixXcd free_operator_matrix(const HoppingKernel& kernel, const Window& window) {
    const int n = window.size();
    MatrixXcd h = MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        int jlo = std::max(0, i - kernel.truncation_radius);
        int jhi = std::min(n - 1, i + kernel.truncation_radius);
        for (int j = jlo; j <= jhi; ++j) {
            Complex a = kernel.at(i - j);
            if (a != Complex{0.0, 0.0}) h(i, j) = a;
        }
    }
    return h;
}

// Quad-precision complex accumulator.  The decomposition identity is exact in
// exact arithmetic; site^p factors reach ~1e6, so double accumulation would
// floor the residual near 1e-8 and drown the check it is meant to make.
struct QuadComplex {
    __float128 re = 0, im = 0;
    void add_mul(const Complex& a, const Complex& b, __float128 scale) {
        __float128 ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
        re += (ar * br - ai * bi) * scale;
        im += (ar * bi + ai * br) * scale;
    }
};

inline __float128 quad_pow_int(long base, int exponent) {
    __float128 r = 1, b = base;
    for (int i = 0; i < exponent; ++i) r *= b;
    return r;
}

}  // namespace detail

// Max interior-entry residual of -i(X H0 - H0 X) - sum_j X^{gamma^j}_{2j};
// the collar of width kernel radius + weight radius is excluded because the
// identity only holds where the truncated convolutions do not clip.  Both
// sides are evaluated entrywise over the bands in quad precision.
inline double commutator_residual(const HoppingKernel& kernel, const WeightSequence& gamma, int p,
                                  const Window& window) {
    require(p >= 1, "commutator_residual: need p >= 1");
    const int collar = kernel.truncation_radius + gamma.radius;
    require(window.size() > 2 * collar + 1,
            "commutator_residual: window smaller than twice the collar");
    const int n = window.size();
    const int reach = kernel.truncation_radius + gamma.radius;
    double residual = 0.0;
    for (int r = collar; r < n - collar; ++r) {
        const long site_r = window.site_of(r);
        for (int c = std::max(collar, r - reach); c < std::min(n - collar, r + reach + 1); ++c) {
            const int m_off = r - c;
            // direct: -i * [ (X H0)(r,c) - (H0 X)(r,c) ] over the bands
            detail::QuadComplex xh, hx;
            for (auto& [k, g] : gamma.entries) {
                Complex a = kernel.at(m_off - k);
                if (a != Complex{0.0, 0.0})
                    xh.add_mul(g, a, detail::quad_pow_int(site_r, p));
            }
            for (auto& [k, a] : kernel.entries) {
                Complex g = gamma.at(m_off - k);
                if (g != Complex{0.0, 0.0})
                    hx.add_mul(a, g, detail::quad_pow_int(site_r - k, p));
            }
            // -i (xh - hx): real = im(xh - hx), imag = -(re(xh - hx))
            __float128 d_re = xh.im - hx.im;
            __float128 d_im = -(xh.re - hx.re);
            // decomposition side: sum_j site_r^j * i binom(p,j) sum_k (-k)^{p-j} a_k gamma_{m-k}
            detail::QuadComplex inner;
            for (int j = 0; j < p; ++j) {
                detail::QuadComplex s;
                for (auto& [k, a] : kernel.entries) {
                    Complex g = gamma.at(m_off - k);
                    if (g != Complex{0.0, 0.0})
                        s.add_mul(a, g, detail::quad_pow_int(-k, p - j));
                }
                __float128 coeff = static_cast<__float128>(binomial(p, j)) *
                                   detail::quad_pow_int(site_r, j);
                // i * s = (-s.im, s.re)
                inner.re += -s.im * coeff;
                inner.im += s.re * coeff;
            }
            double err_re = static_cast<double>(d_re - inner.re);
            double err_im = static_cast<double>(d_im - inner.im);
            residual = std::max(residual, std::hypot(err_re, err_im));
        }
    }
    return residual;
}

struct SequenceDecayFit {
    double amp_fit = 0.0;
    double rate_fit = 0.0;
    bool degenerate = false;
};

inline SequenceDecayFit sequence_decay_fit(const WeightSequence& w) {
    std::vector<double> xs, ys;
    for (auto& [k, g] : w.entries) {
        double m = std::abs(g);
        if (m <= 0) continue;
        xs.push_back(std::abs(k));
        ys.push_back(std::log(m));
    }
    SequenceDecayFit out;
    LineFit fit = fit_line(xs, ys);
    if (fit.degenerate) {
        out.degenerate = true;
        return out;
    }
    out.rate_fit = -fit.slope;
    out.amp_fit = std::exp(fit.intercept);
    return out;
}

// ---------------------------------------------------------------------------
// Heisenberg moment growth
// ---------------------------------------------------------------------------

struct GrowthPoint {
    double t = 0.0;
    double norm_x = 0.0;         // ||X^gamma_{2N} phi_t||
    double norm_hat_free = 0.0;  // || -i[H0, X] phi_t || via the decomposition
    double norm_hat_full = 0.0;  // || -i[H, X] phi_t || with the potential included
    double integral_bound = 0.0; // ||X phi|| + int_0^t ||hat X_full phi_s|| ds
};

struct GrowthReport {
    int order = 0;
    std::vector<GrowthPoint> points;
    double slope = 0.0;
    double slope_limit = 0.0;
    bool pass_growth = false;
    bool pass_integral = false;
    LineFit fit;
};

// Tracks ||X^gamma_{2N} e^{-itH} phi|| on a t grid.  The log-log slope must
// stay below N + growth_tol, and the triangle-inequality audit checks the
// accumulation identity X(t) = X + int_0^t hat(X)(s) ds against the full-H
// commutator (the free-H0 norm is reported alongside; with a diagonal weight
// sequence the two coincide because [V, X] = 0).
inline GrowthReport heisenberg_moment_growth(const OperatorSpec& spec, const WeightSequence& gamma,
                                             int order, const StateVector& phi,
                                             const std::vector<double>& t_grid,
                                             const Window& window, EigenCache* cache = nullptr,
                                             const DynamicsOptions& opts = {},
                                             double growth_tol = 0.1,
                                             double integral_slack = 0.05) {
    require(order >= 1, "heisenberg_moment_growth: need N >= 1");
    require(t_grid.size() >= 3, "heisenberg_moment_growth: need >= 3 time points");
    GrowthReport rep;
    rep.order = order;
    rep.slope_limit = order + growth_tol;

    // H0 carries the coupling; the decomposition acts on the scaled kernel
    HoppingKernel scaled = spec.kernel;
    for (auto& [k, a] : scaled.entries) a *= spec.coupling;
    scaled.decay_amp *= std::max(std::abs(spec.coupling), 1e-300);

    MatrixXcd x = momentum_matrix({order, gamma}, window);
    auto parts = commutator_decompose(scaled, gamma, order);
    MatrixXcd hat_free = MatrixXcd::Zero(window.size(), window.size());
    for (int j = 0; j < order; ++j) hat_free += momentum_matrix({j, parts[j]}, window);
    MatrixXcd h_full = assemble(spec, window);
    MatrixXcd hat_full = Complex{0.0, -1.0} * commutator_bracket(h_full, x);

    StateVector phi0 = detail::embed(phi, window);
    double base_norm = (x * phi0.amplitudes).norm();
    double accumulated = base_norm;
    double prev_t = 0.0;
    double prev_hat = (hat_full * phi0.amplitudes).norm();
    for (double t : t_grid) {
        require(t >= prev_t, "heisenberg_moment_growth: t grid must be nondecreasing");
        StateVector psi = evolve(spec, window, phi0, t, cache, opts);
        require(psi.window.size() == window.size(),
                "heisenberg_moment_growth: window was enlarged; pick a larger window");
        GrowthPoint pt;
        pt.t = t;
        pt.norm_x = (x * psi.amplitudes).norm();
        pt.norm_hat_free = (hat_free * psi.amplitudes).norm();
        pt.norm_hat_full = (hat_full * psi.amplitudes).norm();
        accumulated += 0.5 * (prev_hat + pt.norm_hat_full) * (t - prev_t);
        pt.integral_bound = accumulated;
        prev_hat = pt.norm_hat_full;
        prev_t = t;
        rep.points.push_back(pt);
    }

    // growth fit over the upper half of the grid
    std::vector<double> xs, ys;
    double t_mid = std::sqrt(std::max(t_grid.front(), 1e-12) * t_grid.back());
    for (auto& pt : rep.points) {
        if (pt.t <= 0 || pt.norm_x <= 1e-300 || pt.t < t_mid) continue;
        xs.push_back(std::log(pt.t));
        ys.push_back(std::log(pt.norm_x));
    }
    if (xs.size() >= 2) {
        rep.fit = fit_line(xs, ys);
        rep.slope = rep.fit.slope;
    }
    rep.pass_growth = rep.slope <= rep.slope_limit;
    rep.pass_integral = true;
    for (auto& pt : rep.points) {
        if (pt.norm_x > pt.integral_bound * (1.0 + integral_slack) + 1e-8)
            rep.pass_integral = false;
    }
    return rep;
}

}  // namespace qdlab
