#pragma once

// Closed-form Black-Scholes put and a CRR binomial tree for American puts.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace hedgelab {

enum class ExerciseStyle { american, european };

struct OptionSpec {
    double strike = 100.0;
    double maturity = 1.0;
    ExerciseStyle style = ExerciseStyle::american;

    void validate() const {
        if (!(strike > 0.0) || !std::isfinite(strike)) throw std::invalid_argument("OptionSpec: strike must be positive");
        if (!(maturity > 0.0) || !std::isfinite(maturity)) throw std::invalid_argument("OptionSpec: maturity must be positive");
    }
    double intrinsic(double s) const { return std::max(strike - s, 0.0); }
};

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double bs_put_price(double s, const OptionSpec& spec, double sigma, double r, double tau) {
    if (!(s > 0.0)) throw std::invalid_argument("bs_put_price: s must be positive");
    if (tau < 0.0) throw std::invalid_argument("bs_put_price: negative time to maturity");
    if (sigma < 0.0) throw std::invalid_argument("bs_put_price: negative volatility");
    const double k = spec.strike;
    if (tau == 0.0) return std::max(k - s, 0.0);
    const double disc_k = k * std::exp(-r * tau);
    if (sigma == 0.0) return std::max(disc_k - s, 0.0);
    const double vol_t = sigma * std::sqrt(tau);
    const double d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * tau) / vol_t;
    const double d2 = d1 - vol_t;
    return disc_k * norm_cdf(-d2) - s * norm_cdf(-d1);
}

inline double bs_put_delta(double s, const OptionSpec& spec, double sigma, double r, double tau) {
    if (!(s > 0.0)) throw std::invalid_argument("bs_put_delta: s must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("bs_put_delta: delta undefined at expiry");
    if (!(sigma > 0.0)) return s < spec.strike * std::exp(-r * tau) ? -1.0 : 0.0;
    const double vol_t = sigma * std::sqrt(tau);
    const double d1 = (std::log(s / spec.strike) + (r + 0.5 * sigma * sigma) * tau) / vol_t;
    return norm_cdf(d1) - 1.0;
}

/// Recombining CRR tree. Layer i holds i+1 nodes in ascending price order.
struct BinomialTree {
    OptionSpec spec;
    double s0 = 0.0;
    double sigma = 0.0;
    double r = 0.0;
    int n_steps = 0;
    double dt = 0.0;
    double up = 1.0;
    double down = 1.0;
    std::vector<std::vector<double>> prices;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<char>> exercise;

    double root() const { return values.front().front(); }
};

inline BinomialTree build_tree(const OptionSpec& spec, double s0, double sigma, double r, int n_steps) {
    spec.validate();
    if (n_steps < 1) throw std::invalid_argument("build_tree: n_steps must be >= 1");
    if (!(s0 > 0.0)) throw std::invalid_argument("build_tree: s0 must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("build_tree: sigma must be positive");

    BinomialTree tree;
    tree.spec = spec;
    tree.s0 = s0;
    tree.sigma = sigma;
    tree.r = r;
    tree.n_steps = n_steps;
    tree.dt = spec.maturity / n_steps;
    tree.up = std::exp(sigma * std::sqrt(tree.dt));
    tree.down = 1.0 / tree.up;
    const double growth = std::exp(r * tree.dt);
    const double p = (growth - tree.down) / (tree.up - tree.down);
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("build_tree: risk-neutral probability outside (0, 1)");
    const double disc = 1.0 / growth;
    const bool american = spec.style == ExerciseStyle::american;

    tree.prices.resize(n_steps + 1);
    tree.values.resize(n_steps + 1);
    tree.exercise.resize(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) {
        auto& layer = tree.prices[i];
        layer.resize(i + 1);
        for (int j = 0; j <= i; ++j) layer[j] = s0 * std::pow(tree.up, 2 * j - i);
    }

    auto& terminal = tree.values[n_steps];
    terminal.resize(n_steps + 1);
    tree.exercise[n_steps].assign(n_steps + 1, 0);
    for (int j = 0; j <= n_steps; ++j) {
        terminal[j] = spec.intrinsic(tree.prices[n_steps][j]);
        tree.exercise[n_steps][j] = terminal[j] > 0.0;
    }
    for (int i = n_steps - 1; i >= 0; --i) {
        const auto& next = tree.values[i + 1];
        auto& cur = tree.values[i];
        cur.resize(i + 1);
        tree.exercise[i].assign(i + 1, 0);
        for (int j = 0; j <= i; ++j) {
            const double cont = disc * (p * next[j + 1] + (1.0 - p) * next[j]);
            const double intrinsic = spec.intrinsic(tree.prices[i][j]);
            if (american && intrinsic > 0.0 && intrinsic >= cont) {
                cur[j] = intrinsic;
                tree.exercise[i][j] = 1;
            } else {
                cur[j] = cont;
            }
        }
    }
    return tree;
}

namespace detail {
inline double layer_interp(const std::vector<double>& xs, const std::vector<double>& ys, double s) {
    if (s <= xs.front()) return ys.front();
    if (s >= xs.back()) return ys.back();
    const auto hi = std::upper_bound(xs.begin(), xs.end(), s);
    const auto j = static_cast<std::size_t>(hi - xs.begin());
    const double w = (s - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return (1.0 - w) * ys[j - 1] + w * ys[j];
}

/// Bracketing layer index and weight of the upper layer for time t.
inline std::pair<int, double> layer_bracket(double t, double dt, int n_steps) {
    const double x = t / dt;
    const double nearest = std::round(x);
    if (std::abs(x - nearest) < 1e-9) {
        const int k = static_cast<int>(nearest);
        return k >= n_steps ? std::pair{n_steps - 1, 1.0} : std::pair{k, 0.0};
    }
    const int k = std::min(static_cast<int>(std::floor(x)), n_steps - 1);
    return {k, x - k};
}
}  // namespace detail

/// Bilinear interpolation of the tree value surface; prices outside a layer's range clamp to its end nodes,
/// floored at intrinsic for American style.
inline double tree_price_at(const BinomialTree& tree, double s, double t) {
    if (!(t >= 0.0) || t > tree.spec.maturity * (1.0 + 1e-12))
        throw std::invalid_argument("tree_price_at: t outside [0, maturity]");
    const auto [k, w] = detail::layer_bracket(t, tree.dt, tree.n_steps);
    const double lo = detail::layer_interp(tree.prices[k], tree.values[k], s);
    const double v = w == 0.0 ? lo : (1.0 - w) * lo + w * detail::layer_interp(tree.prices[k + 1], tree.values[k + 1], s);
    // below a layer's lowest node the clamped value understates an American put
    return tree.spec.style == ExerciseStyle::american ? std::max(v, tree.spec.intrinsic(s)) : v;
}

inline double tree_delta(const BinomialTree& tree, double s, double t) {
    constexpr double h = 1e-3;
    // the root layer has one node; read the slope from the first branching layer
    const double tq = std::max(t, std::min(tree.dt, tree.spec.maturity));
    const double up = tree_price_at(tree, s * (1.0 + h), tq);
    const double dn = tree_price_at(tree, s * (1.0 - h), tq);
    return std::clamp((up - dn) / (2.0 * h * s), -1.0, 0.0);
}

struct BoundaryPoint {
    double t;
    std::optional<double> critical_price;
};

/// Highest exercised node price per layer; empty where no node is exercised.
inline std::vector<BoundaryPoint> tree_exercise_boundary(const BinomialTree& tree) {
    if (tree.spec.style != ExerciseStyle::american)
        throw std::invalid_argument("tree_exercise_boundary: European tree has no exercise boundary");
    std::vector<BoundaryPoint> out;
    out.reserve(tree.n_steps + 1);
    for (int i = 0; i <= tree.n_steps; ++i) {
        BoundaryPoint bp{i * tree.dt, std::nullopt};
        for (int j = i; j >= 0; --j)
            if (tree.exercise[i][j]) {
                bp.critical_price = tree.prices[i][j];
                break;
            }
        out.push_back(bp);
    }
    return out;
}

}  // namespace hedgelab
