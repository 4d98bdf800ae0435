#pragma once

// Discrete-time path generation: exact log-normal GBM steps and the
// Euler-discretised lognormal-volatility SABR variant used for the
// calibrated-market experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hedgelab/rng.hpp"

namespace hedgelab {

inline constexpr double kVolFloor = 1e-4;
inline constexpr double kPriceFloor = 1e-6;

struct GBMParams {
    double s0 = 100.0;
    double mu = 0.05;
    double sigma = 0.2;
    double r = 0.05;

    void validate() const {
        if (!std::isfinite(s0) || !std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(r))
            throw std::invalid_argument("GBMParams: non-finite parameter");
        if (s0 <= 0.0) throw std::invalid_argument("GBMParams: s0 must be positive");
        if (sigma < 0.0) throw std::invalid_argument("GBMParams: sigma must be non-negative");
    }
};

struct SABRParams {
    double s0 = 100.0;
    double sigma0 = 0.2;
    double nu = 0.5;
    double rho = -0.5;
    double mu = 0.05;
    double r = 0.05;

    void validate() const {
        for (double v : {s0, sigma0, nu, rho, mu, r})
            if (!std::isfinite(v)) throw std::invalid_argument("SABRParams: non-finite parameter");
        if (s0 <= 0.0) throw std::invalid_argument("SABRParams: s0 must be positive");
        if (sigma0 <= 0.0) throw std::invalid_argument("SABRParams: sigma0 must be positive");
        if (nu < 0.0) throw std::invalid_argument("SABRParams: nu must be non-negative");
        if (rho < -1.0 || rho > 1.0) throw std::invalid_argument("SABRParams: rho outside [-1, 1]");
    }
};

/// Row-major n_paths x (n_steps + 1) grids of prices (and optionally vols).
class PathSet {
public:
    PathSet() = default;
    PathSet(std::vector<double> times, std::size_t n_paths, std::uint64_t seed, bool with_vols)
        : times_(std::move(times)), n_paths_(n_paths), seed_(seed),
          prices_(n_paths * times_.size(), 0.0) {
        if (with_vols) vols_.assign(prices_.size(), 0.0);
    }

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_steps() const { return times_.empty() ? 0 : times_.size() - 1; }
    std::size_t n_times() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }
    std::uint64_t seed() const { return seed_; }
    bool has_vols() const { return !vols_.empty(); }

    double price(std::size_t path, std::size_t step) const { return prices_[path * times_.size() + step]; }
    double& price(std::size_t path, std::size_t step) { return prices_[path * times_.size() + step]; }
    double vol(std::size_t path, std::size_t step) const { return vols_.at(path * times_.size() + step); }
    double& vol(std::size_t path, std::size_t step) { return vols_.at(path * times_.size() + step); }

    /// Copy of one path's prices.
    std::vector<double> path_prices(std::size_t path) const {
        auto first = prices_.begin() + static_cast<std::ptrdiff_t>(path * times_.size());
        return {first, first + static_cast<std::ptrdiff_t>(times_.size())};
    }
    std::vector<double> path_vols(std::size_t path) const {
        if (vols_.empty()) return {};
        auto first = vols_.begin() + static_cast<std::ptrdiff_t>(path * times_.size());
        return {first, first + static_cast<std::ptrdiff_t>(times_.size())};
    }

    /// Throws if any structural invariant is broken.
    void check_invariants() const {
        if (times_.size() < 2) throw std::logic_error("PathSet: need at least two instants");
        if (times_.front() != 0.0) throw std::logic_error("PathSet: times must start at 0");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1])) throw std::logic_error("PathSet: times not increasing");
        for (double p : prices_)
            if (!(p > 0.0) || !std::isfinite(p)) throw std::logic_error("PathSet: non-positive price");
        for (double v : vols_)
            if (!(v > 0.0) || !std::isfinite(v)) throw std::logic_error("PathSet: non-positive vol");
        for (std::size_t p = 1; p < n_paths_; ++p)
            if (price(p, 0) != price(0, 0)) throw std::logic_error("PathSet: column 0 not constant");
    }

private:
    std::vector<double> times_;
    std::size_t n_paths_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> prices_;
    std::vector<double> vols_;
};

struct Increments {
    double dW;
    double dB;
};

/// Correlated Brownian increments over dt from two independent normals.
inline Increments correlated_increments(double rho, double dt, double z1, double z2) {
    if (!std::isfinite(rho) || !std::isfinite(dt) || !std::isfinite(z1) || !std::isfinite(z2))
        throw std::invalid_argument("correlated_increments: non-finite input");
    if (dt <= 0.0) throw std::invalid_argument("correlated_increments: dt must be positive");
    if (rho < -1.0 || rho > 1.0) throw std::invalid_argument("correlated_increments: rho outside [-1, 1]");
    const double sq = std::sqrt(dt);
    return {sq * z1, sq * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2)};
}

inline std::vector<double> uniform_times(std::size_t n_steps, double horizon) {
    std::vector<double> t(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    return t;
}

namespace detail {
inline void check_grid_args(std::size_t n_paths, std::size_t n_steps, double horizon) {
    if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
    if (n_steps < 1) throw std::invalid_argument("simulate: n_steps must be >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("simulate: horizon must be positive");
}
}  // namespace detail

/// One GBM path written into `out` (size n_steps + 1) from substream `stream`.
inline void gbm_path(const GBMParams& p, double dt, std::uint64_t seed, std::uint64_t stream,
                     std::vector<double>& out) {
    Philox rng(seed, stream);
    const double drift = (p.mu - 0.5 * p.sigma * p.sigma) * dt;
    const double diffusion = p.sigma * std::sqrt(dt);
    out[0] = p.s0;
    for (std::size_t i = 1; i < out.size(); ++i)
        out[i] = out[i - 1] * std::exp(drift + diffusion * rng.normal());
}

inline PathSet simulate_gbm(const GBMParams& params, std::size_t n_paths, std::size_t n_steps,
                            double horizon, std::uint64_t seed) {
    params.validate();
    detail::check_grid_args(n_paths, n_steps, horizon);
    PathSet set(uniform_times(n_steps, horizon), n_paths, seed, false);
    const double dt = horizon / static_cast<double>(n_steps);
    std::vector<double> buf(n_steps + 1);
    for (std::size_t p = 0; p < n_paths; ++p) {
        gbm_path(params, dt, seed, p, buf);
        for (std::size_t i = 0; i <= n_steps; ++i) set.price(p, i) = buf[i];
    }
    return set;
}

/// One Euler step of the SABR variant: volatility first, then price with the new volatility.
inline std::pair<double, double> sabr_step(double s, double sigma, double drift, double nu, double dt,
                                           const Increments& inc) {
    const double next_sigma = std::max(sigma + nu * sigma * inc.dB, kVolFloor);
    const double next_s = std::max(s + drift * s * dt + next_sigma * s * inc.dW, kPriceFloor);
    return {next_s, next_sigma};
}

inline void sabr_path(const SABRParams& p, double dt, std::uint64_t seed, std::uint64_t stream,
                      std::vector<double>& prices, std::vector<double>& vols) {
    Philox rng(seed, stream);
    prices[0] = p.s0;
    vols[0] = p.sigma0;
    for (std::size_t i = 1; i < prices.size(); ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const auto inc = correlated_increments(p.rho, dt, z1, z2);
        std::tie(prices[i], vols[i]) = sabr_step(prices[i - 1], vols[i - 1], p.mu, p.nu, dt, inc);
    }
}

inline PathSet simulate_sabr(const SABRParams& params, std::size_t n_paths, std::size_t n_steps,
                             double horizon, std::uint64_t seed) {
    params.validate();
    detail::check_grid_args(n_paths, n_steps, horizon);
    PathSet set(uniform_times(n_steps, horizon), n_paths, seed, true);
    const double dt = horizon / static_cast<double>(n_steps);
    std::vector<double> prices(n_steps + 1), vols(n_steps + 1);
    for (std::size_t p = 0; p < n_paths; ++p) {
        sabr_path(params, dt, seed, p, prices, vols);
        for (std::size_t i = 0; i <= n_steps; ++i) {
            set.price(p, i) = prices[i];
            set.vol(p, i) = vols[i];
        }
    }
    return set;
}

// CSV: time,path_id,price[,vol]; path-major rows.

inline void write_paths_csv(std::ostream& os, const PathSet& set) {
    os << (set.has_vols() ? "time,path_id,price,vol\n" : "time,path_id,price\n");
    os << std::setprecision(17);
    for (std::size_t p = 0; p < set.n_paths(); ++p)
        for (std::size_t i = 0; i < set.n_times(); ++i) {
            os << set.times()[i] << ',' << p << ',' << set.price(p, i);
            if (set.has_vols()) os << ',' << set.vol(p, i);
            os << '\n';
        }
}

inline PathSet read_paths_csv(std::istream& is, std::uint64_t seed = 0) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("paths csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool with_vols = false;
    if (line == "time,path_id,price,vol") with_vols = true;
    else if (line != "time,path_id,price") throw std::runtime_error("paths csv: unexpected header '" + line + "'");

    struct Row { double t; std::size_t path; double price; double vol; };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        Row r{0, 0, 0, 0};
        char c1 = 0, c2 = 0, c3 = ',';
        ss >> r.t >> c1 >> r.path >> c2 >> r.price;
        if (with_vols) ss >> c3 >> r.vol;
        if (!ss || c1 != ',' || c2 != ',' || c3 != ',')
            throw std::runtime_error("paths csv: malformed row " + std::to_string(lineno));
        rows.push_back(r);
    }
    if (rows.empty()) throw std::runtime_error("paths csv: no rows");
    std::vector<double> times;
    for (const auto& r : rows) {
        if (r.path != 0) break;
        times.push_back(r.t);
    }
    if (rows.size() % times.size() != 0) throw std::runtime_error("paths csv: ragged paths");
    const std::size_t n_paths = rows.size() / times.size();
    PathSet set(times, n_paths, seed, with_vols);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t p = k / times.size(), i = k % times.size();
        if (rows[k].path != p || rows[k].t != times[i])
            throw std::runtime_error("paths csv: rows not path-major at row " + std::to_string(k + 2));
        set.price(p, i) = rows[k].price;
        if (with_vols) set.vol(p, i) = rows[k].vol;
    }
    set.check_invariants();
    return set;
}

}  // namespace hedgelab
