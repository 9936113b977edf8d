// quadrature.hpp - globally adaptive Gauss-Kronrod integration
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "qdlab/common.hpp"

namespace qdlab {

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    long evaluations = 0;
    bool converged = false;
};

namespace detail {

// 15-point Kronrod / 7-point Gauss pair on [-1, 1].
inline constexpr double kGK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr double kGK15KronrodW[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kGK15GaussW[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
inline Segment gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fsum[8];
    for (int i = 0; i < 7; ++i) {
        double x = kGK15Nodes[i] * h;
        fsum[i] = f(c - x) + f(c + x);
    }
    fsum[7] = f(c);
    double kron = 0.0;
    for (int i = 0; i < 8; ++i) kron += kGK15KronrodW[i] * fsum[i];
    // odd Kronrod nodes plus the center form the embedded 7-point Gauss rule
    double gauss = kGK15GaussW[3] * fsum[7];
    for (int i = 1; i < 7; i += 2) gauss += kGK15GaussW[i / 2] * fsum[i];
    double err = std::abs(kron - gauss) * h;
    double sharp = std::pow(200.0 * err, 1.5);
    if (sharp < err) err = sharp;
    return Segment{a, b, kron * h, err};
}

}  // namespace detail

// Integrates f over [a, b] by adaptive bisection of the worst segment.
// Stops when the summed error estimate is below max(abs_tol, rel_tol*|I|).
// Oscillatory integrands must be pre-subdivided at their oscillation scale
// (initial_segments), otherwise the embedded Gauss rule aliases against the
// Kronrod rule and the error estimate cannot be trusted.
template <typename F>
inline QuadResult integrate_adaptive(const F& f, double a, double b, double rel_tol = 1e-8,
                                     double abs_tol = 0.0, int max_segments = 4000,
                                     int initial_segments = 1) {
    QuadResult out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    initial_segments = std::max(1, std::min(initial_segments, max_segments));
    std::priority_queue<detail::Segment> heap;
    double total = 0.0, err = 0.0;
    for (int i = 0; i < initial_segments; ++i) {
        double lo = a + (b - a) * i / initial_segments;
        double hi = a + (b - a) * (i + 1) / initial_segments;
        auto s = detail::gk15(f, lo, hi);
        out.evaluations += 15;
        total += s.value;
        err += s.error;
        heap.push(s);
    }
    int segments = initial_segments;
    while (segments < max_segments) {
        double goal = std::max(abs_tol, rel_tol * std::abs(total));
        if (err <= goal) break;
        detail::Segment worst = heap.top();
        heap.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {  // interval exhausted by rounding
            heap.push(worst);
            break;
        }
        auto left = detail::gk15(f, worst.a, mid);
        auto right = detail::gk15(f, mid, worst.b);
        out.evaluations += 30;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++segments;
    }
    out.value = total;
    out.error_estimate = std::max(err, 0.0);
    out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total)) + 1e-300;
    return out;
}

}  // namespace qdlab
