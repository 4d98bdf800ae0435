#pragma once

// Dynamic Chebyshev pricing of American puts.
//
// Value functions are stored per time layer as Chebyshev coefficient
// tensors over a fixed (price[, volatility]) box. Layers are filled by
// backward induction: every node runs a one-step Monte Carlo transition,
// the next layer's interpolant is evaluated at the landed states and the
// discounted mean is compared with immediate exercise. Once built, a
// surface answers price queries with two Clenshaw evaluations and no
// simulation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <nlohmann/json.hpp>

#include "hedgelab/analytic.hpp"
#include "hedgelab/market_sim.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

struct ChebAxis {
    double lo = 0.0;
    double hi = 1.0;
    int degree = 2;

    double mid() const { return 0.5 * (lo + hi); }
    double half() const { return 0.5 * (hi - lo); }
    /// Node k = 0..degree; k = 0 is the upper bound.
    double node(int k) const { return mid() + half() * std::cos(std::numbers::pi * k / degree); }
    double to_unit(double x) const { return std::clamp((x - mid()) / half(), -1.0, 1.0); }
    double clamp(double x) const { return std::clamp(x, lo, hi); }
    int size() const { return degree + 1; }
};

struct ChebGrid {
    std::vector<ChebAxis> axes;

    std::size_t dims() const { return axes.size(); }
    std::size_t n_nodes() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= static_cast<std::size_t>(a.size());
        return n;
    }
    /// Flat node index: price index varies slowest.
    std::size_t flat(int price_idx, int vol_idx = 0) const {
        return dims() == 1 ? static_cast<std::size_t>(price_idx)
                           : static_cast<std::size_t>(price_idx) * axes[1].size() + vol_idx;
    }
};

inline ChebGrid build_grid(const std::vector<std::pair<double, double>>& bounds, const std::vector<int>& degrees) {
    if (bounds.empty() || bounds.size() > 2 || bounds.size() != degrees.size())
        throw std::invalid_argument("build_grid: need one or two dimensions with matching degrees");
    ChebGrid grid;
    for (std::size_t d = 0; d < bounds.size(); ++d) {
        const auto [lo, hi] = bounds[d];
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
            throw std::invalid_argument("build_grid: degenerate bounds");
        if (degrees[d] < 2) throw std::invalid_argument("build_grid: degree must be >= 2");
        grid.axes.push_back({lo, hi, degrees[d]});
    }
    return grid;
}

namespace cheb {

/// Coefficient matrix M (size n+1 square) with c = M f for Chebyshev-Lobatto samples f.
inline std::vector<double> transform_matrix(int n) {
    std::vector<double> m(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int k = 0; k <= n; ++k) {
            double w = 2.0 / n * std::cos(std::numbers::pi * j * k / n);
            if (k == 0 || k == n) w *= 0.5;
            if (j == 0 || j == n) w *= 0.5;
            m[static_cast<std::size_t>(j * (n + 1) + k)] = w;
        }
    return m;
}

inline double clenshaw(const double* c, int n, double x, std::ptrdiff_t stride = 1) {
    double b1 = 0.0, b2 = 0.0;
    const double x2 = 2.0 * x;
    for (int j = n; j >= 1; --j) {
        const double b0 = c[j * stride] + x2 * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return c[0] + x * b1 - b2;
}

/// Coefficients for values laid out as in ChebGrid::flat.
inline std::vector<double> fit(const ChebGrid& grid, const std::vector<double>& values) {
    const int np = grid.axes[0].degree;
    const auto mp = transform_matrix(np);
    if (grid.dims() == 1) {
        std::vector<double> c(np + 1, 0.0);
        for (int j = 0; j <= np; ++j)
            for (int k = 0; k <= np; ++k) c[j] += mp[j * (np + 1) + k] * values[k];
        return c;
    }
    const int nv = grid.axes[1].degree;
    const auto mv = transform_matrix(nv);
    const int cols = nv + 1;
    std::vector<double> tmp(static_cast<std::size_t>((np + 1) * cols), 0.0);
    for (int i = 0; i <= np; ++i)
        for (int l = 0; l <= nv; ++l) {
            double acc = 0.0;
            for (int m = 0; m <= nv; ++m) acc += mv[l * cols + m] * values[i * cols + m];
            tmp[i * cols + l] = acc;
        }
    std::vector<double> c(tmp.size(), 0.0);
    for (int j = 0; j <= np; ++j)
        for (int l = 0; l <= nv; ++l) {
            double acc = 0.0;
            for (int i = 0; i <= np; ++i) acc += mp[j * (np + 1) + i] * tmp[i * cols + l];
            c[j * cols + l] = acc;
        }
    return c;
}

/// Evaluates a coefficient tensor at (x[, y]); coordinates are clamped to the box.
inline double eval(const ChebGrid& grid, const std::vector<double>& coef, double x, double y = 0.0) {
    const double u = grid.axes[0].to_unit(x);
    const int np = grid.axes[0].degree;
    if (grid.dims() == 1) return clenshaw(coef.data(), np, u);
    const int nv = grid.axes[1].degree;
    const double v = grid.axes[1].to_unit(y);
    double b1 = 0.0, b2 = 0.0;
    for (int j = np; j >= 1; --j) {
        const double cj = clenshaw(coef.data() + j * (nv + 1), nv, v);
        const double b0 = cj + 2.0 * u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return clenshaw(coef.data(), nv, v) + u * b1 - b2;
}

}  // namespace cheb

namespace detail {
/// Latin hypercube sample of n standard-normal points in `dims` dimensions,
/// stored point-major: one stratum of width 1/n per point and coordinate.
inline void latin_hypercube_normals(Philox& rng, int n, int dims, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(n) * dims);
    std::vector<int> strata(n);
    for (int d = 0; d < dims; ++d) {
        for (int i = 0; i < n; ++i) strata[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(strata[i], strata[rng.below(static_cast<std::uint64_t>(i) + 1)]);
        for (int i = 0; i < n; ++i) {
            const double u = (strata[i] + rng.uniform()) / n;
            out[static_cast<std::size_t>(i) * dims + d] = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
        }
    }
}
}  // namespace detail

using PricingModel = std::variant<GBMParams, SABRParams>;

struct ValueSurface {
    OptionSpec spec;
    PricingModel model;
    ChebGrid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> coefficients;   // per layer
    std::vector<std::vector<double>> node_values;    // per layer, ChebGrid::flat order
    std::vector<std::vector<char>> exercise;         // per layer, ChebGrid::flat order

    bool two_dimensional() const { return grid.dims() == 2; }
    double rate() const { return std::visit([](const auto& m) { return m.r; }, model); }
    double maturity() const { return times.back(); }
};

struct ChebSettings {
    int price_degree = 80;
    int vol_degree = 10;
    int time_steps = 50;
    int mc_per_node = 2000;
};

/// Default domain: +/- 4 standard deviations in price; volatility box scaled by nu.
inline ChebGrid default_grid(const PricingModel& model, double maturity, const ChebSettings& settings) {
    const double sqrt_t = std::sqrt(maturity);
    if (const auto* g = std::get_if<GBMParams>(&model)) {
        const double spread = 4.0 * std::max(g->sigma, 1e-3) * sqrt_t;
        return build_grid({{g->s0 * std::exp(-spread), g->s0 * std::exp(spread)}}, {settings.price_degree});
    }
    const auto& s = std::get<SABRParams>(model);
    const double sigma_bar = s.sigma0 * std::exp(2.0 * s.nu * sqrt_t);
    const double spread = 4.0 * sigma_bar * sqrt_t;
    return build_grid({{s.s0 * std::exp(-spread), s.s0 * std::exp(spread)},
                       {s.sigma0 / 4.0, s.sigma0 * std::exp(3.0 * s.nu * sqrt_t)}},
                      {settings.price_degree, settings.vol_degree});
}

inline ValueSurface backward_induce(const PricingModel& model, const OptionSpec& spec, const ChebGrid& grid,
                                    int n_time_steps, int mc_per_node, std::uint64_t seed) {
    spec.validate();
    if (n_time_steps < 2) throw std::invalid_argument("backward_induce: n_time_steps must be >= 2");
    if (mc_per_node < 100) throw std::invalid_argument("backward_induce: mc_per_node must be >= 100");
    const bool sabr = std::holds_alternative<SABRParams>(model);
    if (sabr && grid.dims() != 2)
        throw std::invalid_argument("backward_induce: SABR pricing needs a (price, volatility) grid");
    if (!sabr && grid.dims() != 1)
        throw std::invalid_argument("backward_induce: GBM pricing needs a price-only grid");
    std::visit([](const auto& m) { m.validate(); }, model);

    ValueSurface surf;
    surf.spec = spec;
    surf.model = model;
    surf.grid = grid;
    surf.times = uniform_times(static_cast<std::size_t>(n_time_steps), spec.maturity);
    const std::size_t layers = surf.times.size();
    surf.coefficients.resize(layers);
    surf.node_values.resize(layers);
    surf.exercise.resize(layers);

    const double dt = spec.maturity / n_time_steps;
    const double r = surf.rate();
    const double disc = std::exp(-r * dt);
    const bool american = spec.style == ExerciseStyle::american;
    const int np = grid.axes[0].size();
    const int nv = sabr ? grid.axes[1].size() : 1;
    const std::size_t n_nodes = grid.n_nodes();

    auto& terminal = surf.node_values.back();
    terminal.resize(n_nodes);
    surf.exercise.back().assign(n_nodes, 0);
    for (int i = 0; i < np; ++i)
        for (int l = 0; l < nv; ++l) {
            const auto idx = grid.flat(i, l);
            terminal[idx] = spec.intrinsic(grid.axes[0].node(i));
            surf.exercise.back()[idx] = terminal[idx] > 0.0;
        }
    surf.coefficients.back() = cheb::fit(grid, terminal);

    // Layers below maturity store the continuation value, which is smooth; the value
    // function is recovered as max(intrinsic, continuation) wherever it is needed.
    auto layer_value = [&](const std::vector<double>& coef, double s, double v) {
        const double cont = cheb::eval(grid, coef, grid.axes[0].clamp(s), sabr ? grid.axes[1].clamp(v) : 0.0);
        return american ? std::max(spec.intrinsic(s), cont) : cont;
    };

    const std::size_t last = layers - 1;
    std::vector<double> continuation(n_nodes);
    std::vector<double> draws;
    for (std::size_t k = last; k-- > 0;) {
        const bool to_maturity = (k + 1 == last);
        const auto& next_coef = surf.coefficients[k + 1];
        auto& values = surf.node_values[k];
        auto& flags = surf.exercise[k];
        values.resize(n_nodes);
        flags.assign(n_nodes, 0);
        for (int i = 0; i < np; ++i) {
            const double s = grid.axes[0].node(i);
            for (int l = 0; l < nv; ++l) {
                const auto idx = grid.flat(i, l);
                Philox rng(seed, stream_id(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(idx)));
                detail::latin_hypercube_normals(rng, mc_per_node, nv > 1 ? 2 : 1, draws);
                double acc = 0.0;
                if (!sabr) {
                    const auto& g = std::get<GBMParams>(model);
                    const double drift = (r - 0.5 * g.sigma * g.sigma) * dt;
                    const double diff = g.sigma * std::sqrt(dt);
                    for (int m = 0; m < mc_per_node; ++m) {
                        const double landed = s * std::exp(drift + diff * draws[m]);
                        acc += to_maturity ? spec.intrinsic(landed) : layer_value(next_coef, landed, 0.0);
                    }
                } else {
                    const auto& p = std::get<SABRParams>(model);
                    const double sigma = grid.axes[1].node(l);
                    for (int m = 0; m < mc_per_node; ++m) {
                        const auto inc = correlated_increments(p.rho, dt, draws[2 * m], draws[2 * m + 1]);
                        const auto [ls, lv] = sabr_step(s, sigma, r, p.nu, dt, inc);
                        acc += to_maturity ? spec.intrinsic(ls) : layer_value(next_coef, ls, lv);
                    }
                }
                const double cont = disc * acc / mc_per_node;
                continuation[idx] = cont;
                const double intrinsic = spec.intrinsic(s);
                if (american && intrinsic > 0.0 && intrinsic >= cont) {
                    values[idx] = intrinsic;
                    flags[idx] = 1;
                } else {
                    values[idx] = cont;
                }
            }
        }
        surf.coefficients[k] = cheb::fit(grid, continuation);
    }
    return surf;
}

inline ValueSurface backward_induce(const PricingModel& model, const OptionSpec& spec, const ChebSettings& settings,
                                    std::uint64_t seed) {
    return backward_induce(model, spec, default_grid(model, spec.maturity, settings), settings.time_steps,
                           settings.mc_per_node, seed);
}

/// Price at (s[, sigma], t): Clenshaw at the bracketing layers, linear in t; American values are floored at intrinsic.
inline double query_price(const ValueSurface& surf, double s, std::optional<double> sigma, double t) {
    if (!(t >= surf.times.front() - 1e-12) || t > surf.times.back() + 1e-12)
        throw std::invalid_argument("query_price: t outside the surface time grid");
    if (surf.two_dimensional() && !sigma)
        throw std::invalid_argument("query_price: volatility required for a two-dimensional surface");
    const double dt = surf.times[1] - surf.times[0];
    const int n = static_cast<int>(surf.times.size()) - 1;
    const auto [k, w] = detail::layer_bracket(std::clamp(t, 0.0, surf.times.back()), dt, n);
    const double x = s;
    const double y = sigma.value_or(0.0);
    const bool american = surf.spec.style == ExerciseStyle::american;
    const double intrinsic = surf.spec.intrinsic(s);
    // Layers below maturity hold continuation values; the last layer is the payoff itself.
    auto layer = [&](int j) {
        if (j == n) return intrinsic;
        const double cont = cheb::eval(surf.grid, surf.coefficients[j], x, y);
        return american ? std::max(cont, intrinsic) : cont;
    };
    double v = layer(k);
    if (w > 0.0) v = (1.0 - w) * v + w * layer(k + 1);
    return american ? std::max(v, intrinsic) : v;
}

/// True where immediate exercise is optimal: positive intrinsic at least the interpolated continuation.
inline bool surface_exercise(const ValueSurface& surf, double s, std::optional<double> sigma, double t) {
    if (surf.spec.style != ExerciseStyle::american) return false;
    const double intrinsic = surf.spec.intrinsic(s);
    if (!(intrinsic > 0.0)) return false;
    const double dt = surf.times[1] - surf.times[0];
    const int n = static_cast<int>(surf.times.size()) - 1;
    const auto [k, w] = detail::layer_bracket(std::clamp(t, 0.0, surf.times.back()), dt, n);
    const double y = sigma.value_or(0.0);
    if (k + 1 == n && w == 1.0) return true;
    double cont = cheb::eval(surf.grid, surf.coefficients[k], s, y);
    // the maturity layer is the payoff; its continuation is the intrinsic value itself
    if (w > 0.0) cont = (1.0 - w) * cont + w * (k + 1 == n ? intrinsic : cheb::eval(surf.grid, surf.coefficients[k + 1], s, y));
    return intrinsic >= cont;
}

struct SurfaceBoundaryPoint {
    double t;
    std::optional<double> critical_price;
    std::optional<double> vol;
};

/// Per layer (and per volatility node in 2-D): the largest exercised price node.
inline std::vector<SurfaceBoundaryPoint> exercise_boundary(const ValueSurface& surf) {
    if (surf.spec.style != ExerciseStyle::american)
        throw std::invalid_argument("exercise_boundary: European surface has no exercise boundary");
    std::vector<SurfaceBoundaryPoint> out;
    const auto& g = surf.grid;
    const int np = g.axes[0].size();
    const int nv = surf.two_dimensional() ? g.axes[1].size() : 1;
    for (std::size_t k = 0; k < surf.times.size(); ++k)
        for (int l = 0; l < nv; ++l) {
            SurfaceBoundaryPoint bp{surf.times[k], std::nullopt, std::nullopt};
            if (surf.two_dimensional()) bp.vol = g.axes[1].node(l);
            // node 0 is the upper bound, so the first flagged index is the largest price
            for (int i = 0; i < np; ++i)
                if (surf.exercise[k][g.flat(i, l)]) {
                    bp.critical_price = g.axes[0].node(i);
                    break;
                }
            out.push_back(bp);
        }
    return out;
}

// JSON round trip so weekly runs can cache pricers.

inline nlohmann::json to_json(const ValueSurface& surf) {
    using nlohmann::json;
    json j;
    j["strike"] = surf.spec.strike;
    j["maturity"] = surf.spec.maturity;
    j["style"] = surf.spec.style == ExerciseStyle::american ? "american" : "european";
    if (const auto* g = std::get_if<GBMParams>(&surf.model))
        j["model"] = {{"kind", "gbm"}, {"s0", g->s0}, {"mu", g->mu}, {"sigma", g->sigma}, {"r", g->r}};
    else {
        const auto& s = std::get<SABRParams>(surf.model);
        j["model"] = {{"kind", "sabr"}, {"s0", s.s0}, {"sigma0", s.sigma0}, {"nu", s.nu},
                      {"rho", s.rho}, {"mu", s.mu}, {"r", s.r}};
    }
    j["bounds"] = json::array();
    j["degrees"] = json::array();
    for (const auto& a : surf.grid.axes) {
        j["bounds"].push_back({a.lo, a.hi});
        j["degrees"].push_back(a.degree);
    }
    j["times"] = surf.times;
    j["coefficients"] = surf.coefficients;
    j["node_values"] = surf.node_values;
    json flags = json::array();
    for (const auto& layer : surf.exercise) {
        std::vector<int> row(layer.begin(), layer.end());
        flags.push_back(row);
    }
    j["exercise"] = flags;
    return j;
}

inline ValueSurface surface_from_json(const nlohmann::json& j) {
    ValueSurface surf;
    surf.spec.strike = j.at("strike").get<double>();
    surf.spec.maturity = j.at("maturity").get<double>();
    surf.spec.style = j.at("style").get<std::string>() == "american" ? ExerciseStyle::american : ExerciseStyle::european;
    const auto& m = j.at("model");
    if (m.at("kind").get<std::string>() == "gbm")
        surf.model = GBMParams{m.at("s0"), m.at("mu"), m.at("sigma"), m.at("r")};
    else
        surf.model = SABRParams{m.at("s0"), m.at("sigma0"), m.at("nu"), m.at("rho"), m.at("mu"), m.at("r")};
    std::vector<std::pair<double, double>> bounds;
    for (const auto& b : j.at("bounds")) bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    surf.grid = build_grid(bounds, j.at("degrees").get<std::vector<int>>());
    surf.times = j.at("times").get<std::vector<double>>();
    surf.coefficients = j.at("coefficients").get<std::vector<std::vector<double>>>();
    surf.node_values = j.at("node_values").get<std::vector<std::vector<double>>>();
    for (const auto& row : j.at("exercise")) {
        const auto ints = row.get<std::vector<int>>();
        surf.exercise.emplace_back(ints.begin(), ints.end());
    }
    if (surf.coefficients.size() != surf.times.size() || surf.exercise.size() != surf.times.size())
        throw std::runtime_error("surface json: layer count mismatch");
    return surf;
}

}  // namespace hedgelab
