// common.hpp - shared aliases, error types and small utilities
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdlab {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Raised when a solver or quadrature fails to reach its stated tolerance.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a state leaks past the guard zone of its evaluation window.
struct window_too_small_error : numerical_error {
    using numerical_error::numerical_error;
};

// Integer interval of lattice sites.  Half-/full-line intents are realized as
// finite windows; the budget records the Green's-function perturbation bound
// accepted for the cut.
struct Window {
    int lo = 0;
    int hi = 0;
    enum class Intent { finite, left_halfline_truncated, full_line_truncated };
    Intent intent = Intent::finite;
    double truncation_error_budget = 0.0;

    int size() const { return hi - lo + 1; }
    bool contains(int site) const { return site >= lo && site <= hi; }
    int index_of(int site) const { return site - lo; }
    int site_of(int index) const { return lo + index; }

    static Window centered(int half_width) { return Window{-half_width, half_width}; }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_window(const Window& w) {
    require(w.lo <= w.hi, "empty window: lo > hi");
}

// Exact small integer powers; 0^0 = 1 by convention (used by the p = 0
// normalization check).
inline double pow_int(double base, int exponent) {
    double r = 1.0;
    for (int i = 0; i < exponent; ++i) r *= base;
    return r;
}

inline double site_weight(int site, double p) {
    double a = std::abs(static_cast<double>(site));
    double ip;
    if (std::modf(p, &ip) == 0.0 && p >= 0 && p < 64) return pow_int(a, static_cast<int>(p));
    return std::pow(a, p);
}

inline long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// FNV-1a over raw bytes; used to fingerprint operator specs for caching and
// run manifests.
struct Fingerprint {
    std::uint64_t state = 1469598103934665603ull;
    void feed_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= p[i];
            state *= 1099511628211ull;
        }
    }
    void feed(double x) { feed_bytes(&x, sizeof x); }
    void feed(int x) { feed_bytes(&x, sizeof x); }
    void feed(std::uint64_t x) { feed_bytes(&x, sizeof x); }
    void feed(const Complex& z) {
        feed(z.real());
        feed(z.imag());
    }
    void feed(const std::string& s) { feed_bytes(s.data(), s.size()); }
};

inline std::vector<double> geometric_grid(double lo, double hi, int points) {
    require(points >= 1 && lo > 0 && hi >= lo, "geometric_grid: bad arguments");
    std::vector<double> g(points);
    if (points == 1) {
        g[0] = lo;
        return g;
    }
    double r = std::log(hi / lo) / (points - 1);
    for (int i = 0; i < points; ++i) g[i] = lo * std::exp(r * i);
    g.back() = hi;
    return g;
}

inline std::vector<double> linear_grid(double lo, double hi, int points) {
    require(points >= 1 && hi >= lo, "linear_grid: bad arguments");
    std::vector<double> g(points);
    if (points == 1) {
        g[0] = 0.5 * (lo + hi);
        return g;
    }
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

}  // namespace qdlab
