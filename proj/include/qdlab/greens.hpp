// greens.hpp - restricted Green's functions, good boxes, barrier chain
#pragma once

#include <atomic>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qdlab/common.hpp"
#include "qdlab/fitting.hpp"
#include "qdlab/lattice_operator.hpp"

namespace qdlab {

// Complex energy z = E + i*eta with eta > 0; in dynamics contexts eta = 1/T.
struct Energy {
    double E = 0.0;
    double eta = 1.0;
    Complex z() const { return {E, eta}; }
};

// Counts every computed Green's matrix whose max-norm exceeded 1/eta.
// Mathematically impossible, so any increment is a solver defect.
inline std::atomic<long>& resolvent_bound_violations() {
    static std::atomic<long> count{0};
    return count;
}

struct GreensMatrix {
    Window window;
    Energy z;
    MatrixXcd entries;
    double residual = 0.0;  // max |(H - z)G - I|
    double max_abs = 0.0;

    const Complex& at(int m, int n) const {
        return entries(window.index_of(m), window.index_of(n));
    }
};

namespace detail {

inline void check_resolvent_bound(double max_abs, double eta) {
    if (max_abs > (1.0 / eta) * (1.0 + 1e-9)) {
        resolvent_bound_violations()++;
        throw numerical_error("Green's function exceeds the 1/eta resolvent bound");
    }
}

struct FactoredRestriction {
    MatrixXcd h;
    Eigen::PartialPivLU<MatrixXcd> lu;
    Energy z;
    bool real_sym = false;
};

inline FactoredRestriction factor_restriction(const OperatorSpec& spec, const Window& window,
                                              Energy z) {
    require(z.eta > 0, "greens: need eta > 0");
    FactoredRestriction f;
    f.z = z;
    f.h = assemble(spec, window);
    f.real_sym = spec_is_real(spec);
    MatrixXcd shifted = f.h;
    shifted.diagonal().array() -= z.z();
    f.lu.compute(shifted);
    return f;
}

// Solve (H - z) X = B with one step of iterative refinement.
inline MatrixXcd refined_solve(const FactoredRestriction& f, const MatrixXcd& rhs) {
    MatrixXcd shifted = f.h;
    shifted.diagonal().array() -= f.z.z();
    MatrixXcd x = f.lu.solve(rhs);
    MatrixXcd r = rhs - shifted * x;
    x += f.lu.solve(r);
    return x;
}

}  // namespace detail

// G_Lambda(z) = (R_Lambda (H - z) R_Lambda)^{-1}, dense.
inline GreensMatrix greens(const OperatorSpec& spec, const Window& window, Energy z,
                           double solve_tol = 1e-10) {
    auto f = detail::factor_restriction(spec, window, z);
    const int n = window.size();
    GreensMatrix g;
    g.window = window;
    g.z = z;
    g.entries = detail::refined_solve(f, MatrixXcd::Identity(n, n));
    MatrixXcd shifted = f.h;
    shifted.diagonal().array() -= z.z();
    g.residual = (shifted * g.entries - MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (g.residual > solve_tol) {
        throw numerical_error("greens: residual " + std::to_string(g.residual) +
                              " above solve_tol; condition estimate " +
                              std::to_string(g.entries.cwiseAbs().maxCoeff() *
                                             shifted.cwiseAbs().maxCoeff() * n));
    }
    g.max_abs = g.entries.cwiseAbs().maxCoeff();
    detail::check_resolvent_bound(g.max_abs, z.eta);
    if (f.real_sym) {
        // real-symmetric H makes G complex symmetric
        double asym = (g.entries - g.entries.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-8 * std::max(1.0, g.max_abs))
            throw numerical_error("greens: complex-symmetry check failed");
    }
    return g;
}

// Selected columns of G_Lambda; cheaper than the full inverse on long windows.
struct GreensColumns {
    Window window;
    Energy z;
    std::vector<int> column_sites;
    MatrixXcd cols;  // window.size() x column_sites.size()
    double residual = 0.0;
    double max_abs = 0.0;

    Complex at(int m, int column_site) const {
        for (std::size_t c = 0; c < column_sites.size(); ++c)
            if (column_sites[c] == column_site) return cols(window.index_of(m), c);
        throw std::invalid_argument("GreensColumns: site not among computed columns");
    }
};

inline GreensColumns greens_columns(const OperatorSpec& spec, const Window& window, Energy z,
                                    std::vector<int> column_sites, double solve_tol = 1e-10) {
    auto f = detail::factor_restriction(spec, window, z);
    const int n = window.size();
    GreensColumns g;
    g.window = window;
    g.z = z;
    g.column_sites = std::move(column_sites);
    MatrixXcd rhs = MatrixXcd::Zero(n, static_cast<int>(g.column_sites.size()));
    for (std::size_t c = 0; c < g.column_sites.size(); ++c) {
        require(window.contains(g.column_sites[c]), "greens_columns: site outside window");
        rhs(window.index_of(g.column_sites[c]), static_cast<int>(c)) = 1.0;
    }
    g.cols = detail::refined_solve(f, rhs);
    MatrixXcd shifted = f.h;
    shifted.diagonal().array() -= z.z();
    g.residual = (shifted * g.cols - rhs).cwiseAbs().maxCoeff();
    if (g.residual > solve_tol)
        throw numerical_error("greens_columns: residual above solve_tol");
    g.max_abs = g.cols.cwiseAbs().maxCoeff();
    detail::check_resolvent_bound(g.max_abs, z.eta);
    return g;
}

// ---------------------------------------------------------------------------
// good boxes
// ---------------------------------------------------------------------------

struct GoodBoxReport {
    Window interval;
    Energy z;
    double delta = 0.0;
    double threshold = 0.0;   // e^{-|I|^delta}
    double separation = 0.0;  // |I|/20
    double max_offdiag = 0.0;
    bool pass = false;
    int witness_m = 0, witness_n = 0;
    long pairs_tested = 0;
};

// Tests |G_I(n, n')| <= e^{-|I|^delta} over all pairs separated by at least
// |I|/20 sites (ties at the cut included).
inline GoodBoxReport good_box(const OperatorSpec& spec, const Window& interval, Energy z,
                              double delta, double solve_tol = 1e-10) {
    require_window(interval);
    require(interval.size() >= 2, "good_box: interval needs at least 2 sites");
    require(delta > 0 && delta < 1, "good_box: need 0 < delta < 1");
    GoodBoxReport rep;
    rep.interval = interval;
    rep.z = z;
    rep.delta = delta;
    double size = interval.size();
    rep.threshold = std::exp(-std::pow(size, delta));
    rep.separation = size / 20.0;
    GreensMatrix g = greens(spec, interval, z, solve_tol);
    for (int i = 0; i < interval.size(); ++i) {
        for (int j = 0; j < interval.size(); ++j) {
            if (std::abs(i - j) + 1e-12 < rep.separation) continue;
            ++rep.pairs_tested;
            double v = std::abs(g.entries(i, j));
            if (v > rep.max_offdiag) {
                rep.max_offdiag = v;
                rep.witness_m = interval.site_of(i);
                rep.witness_n = interval.site_of(j);
            }
        }
    }
    rep.pass = rep.max_offdiag <= rep.threshold;
    return rep;
}

struct GoodBoxScan {
    std::vector<GoodBoxReport> reports;
    bool any_pass = false;
    int passing = 0;
};

// Slides I = [b-ell, b+ell] across [N/4, N/2] and [-N/2, -N/4] with stride ell.
inline GoodBoxScan scan_good_boxes(const OperatorSpec& spec, int big_n, Energy z, double delta,
                                   int ell, double solve_tol = 1e-10) {
    require(ell >= 1, "scan_good_boxes: need ell >= 1");
    require(big_n >= 8 * ell, "scan_good_boxes: need N >= 8*ell");
    require(2.0 * ell + 1.0 >= std::pow(static_cast<double>(big_n), delta),
            "scan_good_boxes: need |I| = 2*ell+1 >= N^delta");
    GoodBoxScan scan;
    const int inner = (big_n + 3) / 4;  // ceil(N/4)
    const int outer = big_n / 2;
    for (int side = 0; side < 2; ++side) {
        for (int b = inner + ell; b + ell <= outer; b += ell) {
            int center = side == 0 ? b : -b;
            Window box{center - ell, center + ell};
            scan.reports.push_back(good_box(spec, box, z, delta, solve_tol));
            if (scan.reports.back().pass) ++scan.passing;
        }
    }
    scan.any_pass = scan.passing > 0;
    return scan;
}

struct BadBoxCount {
    long count = 0;
    long candidates = 0;
    bool sublinear_pass = false;
    double delta0_fit = std::numeric_limits<double>::infinity();
};

// Counts centers |b| <= N whose box I_b = [b-ell, b+ell] fails the good-box
// criterion; sublinear when count <= N^{1-delta0}.
inline BadBoxCount bad_box_count(const OperatorSpec& spec, int big_n, Energy z, int ell,
                                 double delta, double delta0, double solve_tol = 1e-10) {
    require(ell >= 1 && big_n >= 1, "bad_box_count: bad arguments");
    BadBoxCount out;
    for (int b = -big_n; b <= big_n; ++b) {
        ++out.candidates;
        Window box{b - ell, b + ell};
        if (!good_box(spec, box, z, delta, solve_tol).pass) ++out.count;
    }
    out.sublinear_pass = out.count <= std::pow(static_cast<double>(big_n), 1.0 - delta0);
    if (out.count >= 1)
        out.delta0_fit = 1.0 - std::log(static_cast<double>(out.count)) /
                                   std::log(static_cast<double>(big_n));
    return out;
}

// ---------------------------------------------------------------------------
// resolvent identity
// ---------------------------------------------------------------------------

// Max residual of
//   G_L(m,n) = G_L1(m,n) chi_L1(n) - sum_{n1 in L1, n2 in L2} G_L1(m,n1) H(n1,n2) G_L(n2,n)
// over m in L1, n in L, for the split L1 = [lo, split], L2 = [split+1, hi].
// Exact in exact arithmetic.
inline double resolvent_identity_residual(const OperatorSpec& spec, const Window& window,
                                          int split_site, Energy z, double solve_tol = 1e-10) {
    require_window(window);
    require(split_site >= window.lo && split_site < window.hi,
            "resolvent_identity_residual: split must leave both parts nonempty");
    Window part1{window.lo, split_site};
    Window part2{split_site + 1, window.hi};
    GreensMatrix g_full = greens(spec, window, z, solve_tol);
    GreensMatrix g_one = greens(spec, part1, z, solve_tol);
    const int n1 = part1.size(), n2 = part2.size(), n = window.size();
    MatrixXcd coupling(n1, n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
            coupling(i, j) = spec.coupling * spec.kernel.at(part1.site_of(i) - part2.site_of(j));
    MatrixXcd lhs = g_full.entries.topRows(n1);
    MatrixXcd rhs = MatrixXcd::Zero(n1, n);
    rhs.leftCols(n1) = g_one.entries;
    rhs -= g_one.entries * coupling * g_full.entries.bottomRows(n2);
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Combes-Thomas decay check
// ---------------------------------------------------------------------------

struct CombesThomasReport {
    double decay_rate_fit = 0.0;
    double intercept = 0.0;
    bool pass = false;
    bool degenerate = false;  // all sampled entries below the floor
    LineFit fit;
    int points_used = 0;
};

// Fits log|G(j,n)| against |n-j| at an energy a unit distance from the
// spectrum; pass when the fitted rate is at least rate_min.
inline CombesThomasReport combes_thomas_check(const OperatorSpec& spec, Energy z, int j, int n_lo,
                                              int n_hi, double rate_min = 0.1, int pad = 64,
                                              double solve_tol = 1e-10) {
    double k_bound = spectrum_bound(spec);
    require(std::abs(z.E) >= k_bound - 1e-9,
            "combes_thomas_check: |E| must be at least the spectrum bound K");
    require(n_lo > j && n_hi >= n_lo, "combes_thomas_check: need j < n_lo <= n_hi");
    Window window{j - pad, n_hi + pad};
    auto f = detail::factor_restriction(spec, window, z);
    const int n = window.size();
    // row j of G: solve with the transposed factor
    MatrixXcd shifted = f.h;
    shifted.diagonal().array() -= z.z();
    VectorXcd e = VectorXcd::Zero(n);
    e(window.index_of(j)) = 1.0;
    VectorXcd row = f.lu.transpose().solve(e);
    VectorXcd resid = e - shifted.transpose() * row;
    VectorXcd correction = f.lu.transpose().solve(resid);
    row += correction;
    detail::check_resolvent_bound(row.cwiseAbs().maxCoeff(), z.eta);

    const double floor = 1e-280;
    std::vector<double> xs, ys;
    for (int site = n_lo; site <= n_hi; ++site) {
        double v = std::abs(row(window.index_of(site)));
        if (v < floor) continue;
        xs.push_back(site - j);
        ys.push_back(std::log(v));
    }
    CombesThomasReport rep;
    rep.points_used = static_cast<int>(xs.size());
    if (xs.size() < 2) {
        rep.degenerate = true;
        rep.decay_rate_fit = std::numeric_limits<double>::infinity();
        rep.pass = true;  // decay faster than measurable
        return rep;
    }
    rep.fit = fit_line(xs, ys);
    rep.decay_rate_fit = -rep.fit.slope;
    rep.intercept = rep.fit.intercept;
    rep.pass = rep.decay_rate_fit >= rate_min;
    return rep;
}

// ---------------------------------------------------------------------------
// barrier chain (three-stage resolvent-identity propagation)
// ---------------------------------------------------------------------------

struct BarrierConstants {
    double prefactor = 1.0;  // C
    double rate = 0.05;      // c in e^{-c l^pow}
    double power = 0.3;      // stretched-exponential power
};

struct BarrierStage {
    std::string name;
    double max_abs = 0.0;
    int witness_m = 0, witness_n = 0;
    long pairs = 0;
    double bound = 0.0;  // C T^{2k} e^{-c scale^pow}
    bool pass = false;
    double implied_rate = 0.0;  // rate that would make the bound tight
};

struct BarrierCertificate {
    int center = 0;
    int half_length = 0;
    int support_radius = 0;
    int target_site = 0;
    Energy z;
    GoodBoxReport box_report;
    BarrierStage stages[3];
    double truncation_estimate = 0.0;
    double truncation_budget = 0.0;
    bool inconclusive = false;
    Window halfline_window;
    Window fullline_window;
};

struct BarrierOptions {
    double delta = 0.3;         // good-box exponent for the hypothesis check
    double trunc_tol = 1e-8;    // tail tolerance driving the pad size
    double budget = 1e-6;       // accepted truncation perturbation
    bool force = false;         // proceed even if the box is not good
    double solve_tol = 1e-10;
    int min_span = 0;           // floor on the half-line truncation length
};

// Measures the three stage sets: stage 1 on the truncated half-line with
// pairs inside/near the box, stage 2 from the state support to the box edge,
// stage 3 from the support to the distant target on the truncated full line.
inline BarrierCertificate barrier_chain(const OperatorSpec& spec, int center, int half_length,
                                        Energy z, int support_radius, int target_site,
                                        const BarrierConstants& constants,
                                        const BarrierOptions& opts = {}) {
    require(half_length >= 10, "barrier_chain: need ell >= 10");
    require(center - half_length > support_radius,
            "barrier_chain: box must sit right of the state support");
    require(target_site > 0, "barrier_chain: positive target site expected");
    BarrierCertificate cert;
    cert.center = center;
    cert.half_length = half_length;
    cert.support_radius = support_radius;
    cert.target_site = target_site;
    cert.z = z;
    cert.truncation_budget = opts.budget;

    const int ell = half_length;
    const int edge = center + ell;
    Window box{center - ell, center + ell};
    cert.box_report = good_box(spec, box, z, opts.delta, opts.solve_tol);
    if (!cert.box_report.pass && !opts.force)
        throw std::invalid_argument("barrier_chain: interval fails the good-box hypothesis");

    const double big_t = 1.0 / z.eta;
    const int pad = static_cast<int>(
        std::ceil(std::log(1.0 / (z.eta * opts.trunc_tol)) / spec.kernel.decay_rate));
    const int span = std::max({4 * (std::abs(center) + ell), std::abs(target_site) + pad,
                               opts.min_span});

    // truncated half-line (-inf, b+ell]
    Window halfline{edge - span, edge, Window::Intent::left_halfline_truncated, opts.budget};
    cert.halfline_window = halfline;
    require(halfline.lo < -support_radius, "barrier_chain: truncated half-line misses support");
    int cut_distance = std::min(-support_radius - halfline.lo, box.lo - halfline.lo);
    cert.truncation_estimate = std::abs(spec.coupling) / (z.eta * z.eta) *
                               spec.kernel.tail_abs_sum(cut_distance);
    cert.inconclusive = cert.truncation_estimate > opts.budget;

    std::vector<int> columns;
    for (int n = box.lo; n <= box.hi; ++n) columns.push_back(n);
    GreensColumns g = greens_columns(spec, halfline, z, columns, opts.solve_tol);

    auto record = [&](BarrierStage& st, double scale, int k_power) {
        st.bound = constants.prefactor * pow_int(big_t, 2 * k_power) *
                   std::exp(-constants.rate * std::pow(scale, constants.power));
        st.pass = st.max_abs <= st.bound;
        if (st.max_abs > 0) {
            st.implied_rate = -std::log(st.max_abs / (constants.prefactor *
                                                      pow_int(big_t, 2 * k_power))) /
                              std::pow(scale, constants.power);
        } else {
            st.implied_rate = std::numeric_limits<double>::infinity();
        }
    };

    // stage 1: m in [b-ell+ell/10, b+ell], n in I, |m-n| >= ell/10
    {
        BarrierStage& st = cert.stages[0];
        st.name = "halfline_box_pairs";
        int m_lo = center - ell + static_cast<int>(std::ceil(ell / 10.0));
        for (int m = m_lo; m <= edge; ++m) {
            for (std::size_t c = 0; c < columns.size(); ++c) {
                int n = columns[c];
                if (std::abs(m - n) + 1e-12 < ell / 10.0) continue;
                ++st.pairs;
                double v = std::abs(g.cols(halfline.index_of(m), static_cast<int>(c)));
                if (v > st.max_abs) {
                    st.max_abs = v;
                    st.witness_m = m;
                    st.witness_n = n;
                }
            }
        }
        record(st, ell, 1);
    }

    // stage 2: |j| <= K1, n in [b+ell-ell/10, b+ell]
    {
        BarrierStage& st = cert.stages[1];
        st.name = "support_to_box_edge";
        int n_lo = edge - static_cast<int>(std::floor(ell / 10.0));
        for (int j = -support_radius; j <= support_radius; ++j) {
            for (std::size_t c = 0; c < columns.size(); ++c) {
                int n = columns[c];
                if (n < n_lo) continue;
                ++st.pairs;
                double v = std::abs(g.cols(halfline.index_of(j), static_cast<int>(c)));
                if (v > st.max_abs) {
                    st.max_abs = v;
                    st.witness_m = j;
                    st.witness_n = n;
                }
            }
        }
        record(st, ell, 2);
    }

    // stage 3: |G(j, target)| on the truncated full line
    {
        BarrierStage& st = cert.stages[2];
        st.name = "support_to_target";
        Window fullline{-std::max({4 * (std::abs(center) + ell), support_radius + pad,
                                   opts.min_span - target_site - pad}),
                        target_site + pad, Window::Intent::full_line_truncated, opts.budget};
        cert.fullline_window = fullline;
        GreensColumns g3 =
            greens_columns(spec, fullline, z, std::vector<int>{target_site}, opts.solve_tol);
        for (int j = -support_radius; j <= support_radius; ++j) {
            ++st.pairs;
            double v = std::abs(g3.cols(fullline.index_of(j), 0));
            if (v > st.max_abs) {
                st.max_abs = v;
                st.witness_m = j;
                st.witness_n = target_site;
            }
        }
        record(st, std::abs(target_site), 3);
    }

    return cert;
}

}  // namespace qdlab
