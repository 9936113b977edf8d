// fitting.hpp - least-squares lines and upper envelopes for log-log data
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qdlab/common.hpp"

namespace qdlab {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
    double slope_stderr = 0.0;
    int points = 0;
    bool degenerate = false;  // fewer than 2 distinct abscissae
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit fit;
    fit.points = static_cast<int>(x.size());
    if (x.size() != y.size() || x.size() < 2) {
        fit.degenerate = true;
        return fit;
    }
    const int n = fit.points;
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0) {
        fit.degenerate = true;
        fit.intercept = my;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.rms_residual = std::sqrt(ss / n);
    if (n > 2) fit.slope_stderr = std::sqrt(ss / (n - 2) / sxx);
    return fit;
}

// Indices of the upper convex hull (x strictly increasing on input).
inline std::vector<int> upper_hull_indices(const std::vector<double>& x,
                                           const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    std::vector<int> hull;
    for (int i = 0; i < n; ++i) {
        while (hull.size() >= 2) {
            int a = hull[hull.size() - 2], b = hull[hull.size() - 1];
            // keep b only if it lies above the a--i chord
            double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if (cross >= 0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(i);
    }
    return hull;
}

// Least-squares line through the vertices of the upper convex envelope;
// finite-T limsup proxy for log-log growth data.
inline LineFit fit_upper_envelope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) return fit_line(x, y);
    auto idx = upper_hull_indices(x, y);
    std::vector<double> hx, hy;
    hx.reserve(idx.size());
    hy.reserve(idx.size());
    for (int i : idx) {
        hx.push_back(x[i]);
        hy.push_back(y[i]);
    }
    LineFit fit = fit_line(hx, hy);
    if (fit.degenerate && idx.size() == 2) {
        // two hull points: exact chord
        fit.slope = (hy[1] - hy[0]) / (hx[1] - hx[0]);
        fit.intercept = hy[0] - fit.slope * hx[0];
        fit.degenerate = false;
    }
    // residual reported against the full point set, not just hull vertices
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.rms_residual = std::sqrt(ss / x.size());
    fit.points = static_cast<int>(x.size());
    return fit;
}

}  // namespace qdlab
