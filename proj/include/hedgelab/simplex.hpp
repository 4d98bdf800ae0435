#pragma once

// Nelder-Mead downhill simplex with box bounds. Every trial point is
// projected into the box before it is evaluated.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace hedgelab {

struct Bounds {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dims() const { return lo.size(); }
    void validate() const {
        if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("Bounds: dimension mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw std::invalid_argument("Bounds: lo must be below hi");
    }
    std::vector<double> project(std::vector<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
        return x;
    }
    bool contains(const std::vector<double>& x) const {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
};

struct SimplexOptions {
    int max_iters = 500;
    double tolerance = 1e-6;      // simplex diameter
    double value_spread = 1e-8;   // objective spread across vertices
    double initial_step = 0.05;   // fraction of each bound width
};

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    int improvements = 0;  // iterations that lowered the best vertex
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

inline SimplexResult simplex_search(const Objective& f, const std::vector<double>& start, const Bounds& bounds,
                                    const SimplexOptions& opt = {}) {
    bounds.validate();
    const std::size_t n = bounds.dims();
    if (start.size() != n) throw std::invalid_argument("simplex_search: start has wrong dimension");

    SimplexResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> pts(n + 1, bounds.project(start));
    for (std::size_t i = 0; i < n; ++i) {
        const double step = opt.initial_step * (bounds.hi[i] - bounds.lo[i]);
        auto& p = pts[i + 1];
        // step inward when the start sits on the upper bound
        p[i] = p[i] + step <= bounds.hi[i] ? p[i] + step : p[i] - step;
    }
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    auto sort_vertices = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> p2;
        std::vector<double> v2;
        for (auto k : order) {
            p2.push_back(pts[k]);
            v2.push_back(vals[k]);
        }
        pts.swap(p2);
        vals.swap(v2);
    };
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += (pts[i][j] - pts[0][j]) * (pts[i][j] - pts[0][j]);
            d = std::max(d, std::sqrt(s));
        }
        return d;
    };
    auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double coef) {
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = c[j] + coef * (w[j] - c[j]);
        return bounds.project(std::move(x));
    };

    sort_vertices();
    while (res.iterations < opt.max_iters) {
        if (diameter() < opt.tolerance || vals[n] - vals[0] < opt.value_spread) {
            res.converged = true;
            break;
        }
        ++res.iterations;
        const double best_before = vals[0];
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);

        const auto xr = along(centroid, pts[n], -1.0);
        const double fr = eval(xr);
        if (fr < vals[0]) {
            const auto xe = along(centroid, pts[n], -2.0);
            const double fe = eval(xe);
            if (fe < fr) pts[n] = xe, vals[n] = fe;
            else pts[n] = xr, vals[n] = fr;
        } else if (fr < vals[n - 1]) {
            pts[n] = xr, vals[n] = fr;
        } else {
            const bool outside = fr < vals[n];
            const auto xc = outside ? along(centroid, xr, 0.5) : along(centroid, pts[n], 0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, vals[n])) {
                pts[n] = xc, vals[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    pts[i] = along(pts[0], pts[i], 0.5);
                    vals[i] = eval(pts[i]);
                }
            }
        }
        sort_vertices();
        if (vals[0] < best_before) ++res.improvements;
    }
    res.x = pts[0];
    res.value = vals[0];
    return res;
}

}  // namespace hedgelab
