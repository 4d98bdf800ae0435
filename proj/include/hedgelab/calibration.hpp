#pragma once

// Fits (sigma0, nu, rho) of the SABR variant to one cross-section of
// American put quotes using Chebyshev prices inside a bounded simplex.
//
// The dynamics scale with the price level, so P(S, K) = K * P(S / K, 1):
// one strike-1 surface prices every quote of a cross-section.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <boost/math/tools/roots.hpp>

#include "hedgelab/analytic.hpp"
#include "hedgelab/chebyshev.hpp"
#include "hedgelab/simplex.hpp"

namespace hedgelab {

inline constexpr double kTradingDaysPerYear = 252.0;

/// Accepts YYYY-MM-DD or MM/DD/YYYY.
inline std::chrono::sys_days parse_date(const std::string& text) {
    int y = 0, m = 0, d = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(text);
    if (text.find('/') != std::string::npos) ss >> m >> c1 >> d >> c2 >> y;
    else ss >> y >> c1 >> m >> c2 >> d;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ss || (c1 != '-' && c1 != '/') || c1 != c2 || !ymd.ok())
        throw std::invalid_argument("parse_date: cannot read '" + text + "'");
    return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Weekdays in (from, to]; exchange holidays are not modelled.
inline int trading_days_between(std::chrono::sys_days from, std::chrono::sys_days to) {
    int n = 0;
    for (auto d = from + std::chrono::days{1}; d <= to; d += std::chrono::days{1}) {
        const std::chrono::weekday wd{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) ++n;
    }
    return n;
}

struct OptionQuote {
    std::string symbol;
    std::string quote_date;
    std::string expiry;
    double strike = 0.0;
    double mid = 0.0;
    double spot = 0.0;
    double rate = 0.0;

    double maturity_years() const {
        return trading_days_between(parse_date(quote_date), parse_date(expiry)) / kTradingDaysPerYear;
    }
    void validate() const {
        if (!(spot > 0.0)) throw std::invalid_argument("OptionQuote: spot must be positive");
        if (!(strike > 0.0)) throw std::invalid_argument("OptionQuote: strike must be positive");
        if (!(mid >= 0.0)) throw std::invalid_argument("OptionQuote: negative mid");
        if (mid < std::max(strike - spot, 0.0) - 0.05)
            throw std::invalid_argument("OptionQuote: mid below intrinsic for strike " + std::to_string(strike));
        if (!(parse_date(expiry) > parse_date(quote_date)))
            throw std::invalid_argument("OptionQuote: expiry must follow the quote date");
    }
};

inline std::vector<OptionQuote> read_quotes_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("quotes csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "symbol,quote_date,expiry,strike,mid,spot,rate")
        throw std::runtime_error("quotes csv: unexpected header '" + line + "'");
    std::vector<OptionQuote> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw std::runtime_error("quotes csv: row " + std::to_string(lineno) + " needs 7 cells");
        try {
            OptionQuote q{cells[0], cells[1], cells[2], std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5]),
                          std::stod(cells[6])};
            q.validate();
            out.push_back(q);
        } catch (const std::exception& e) {
            throw std::runtime_error("quotes csv: row " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void write_quotes_csv(std::ostream& os, const std::vector<OptionQuote>& quotes) {
    os << "symbol,quote_date,expiry,strike,mid,spot,rate\n";
    std::ostringstream body;
    body.precision(12);
    for (const auto& q : quotes)
        body << q.symbol << ',' << q.quote_date << ',' << q.expiry << ',' << q.strike << ',' << q.mid << ',' << q.spot
             << ',' << q.rate << '\n';
    os << body.str();
}

struct PricingSettings {
    ChebSettings cheb{24, 6, 12, 300};
    std::uint64_t seed = 7;
};

/// Common (spot, rate, maturity) of a cross-section; throws if the quotes disagree.
struct CrossSection {
    double spot;
    double rate;
    double maturity;
};

inline CrossSection cross_section(const std::vector<OptionQuote>& quotes) {
    if (quotes.empty()) throw std::invalid_argument("cross_section: no quotes");
    const auto& q0 = quotes.front();
    for (const auto& q : quotes) {
        q.validate();
        if (q.spot != q0.spot || q.rate != q0.rate || q.expiry != q0.expiry || q.quote_date != q0.quote_date)
            throw std::invalid_argument("cross_section: quotes must share spot, rate, quote date and expiry");
    }
    return {q0.spot, q0.rate, q0.maturity_years()};
}

/// Strike-1 American put surface for the cross-section, centred on spot / reference strike.
inline ValueSurface normalized_surface(const SABRParams& p, const CrossSection& cs, double reference_strike,
                                       const PricingSettings& settings) {
    SABRParams m = p;
    m.s0 = cs.spot / reference_strike;
    m.r = cs.rate;
    m.mu = cs.rate;
    const OptionSpec unit{1.0, cs.maturity, ExerciseStyle::american};
    return backward_induce(m, unit, settings.cheb, settings.seed);
}

inline double reference_strike(const std::vector<OptionQuote>& quotes) {
    std::vector<double> k;
    for (const auto& q : quotes) k.push_back(q.strike);
    std::sort(k.begin(), k.end());
    return k[k.size() / 2];
}

/// Black-Scholes implied volatility of the quote nearest the money, rounded to a 10% ladder.
/// The American premium biases it up slightly; it only positions the calibration grid.
inline double anchor_vol(const std::vector<OptionQuote>& quotes) {
    const auto atm = std::min_element(quotes.begin(), quotes.end(), [](const OptionQuote& a, const OptionQuote& b) {
        return std::abs(std::log(a.strike / a.spot)) < std::abs(std::log(b.strike / b.spot));
    });
    const OptionSpec spec{atm->strike, atm->maturity_years(), ExerciseStyle::european};
    auto gap = [&](double v) { return bs_put_price(atm->spot, spec, v, atm->rate, spec.maturity) - atm->mid; };
    double lo = 1e-3, hi = 3.0;
    double iv = gap(lo) >= 0.0 ? lo : gap(hi) <= 0.0 ? hi : 0.0;
    if (iv == 0.0) {
        boost::uintmax_t iters = 100;
        const auto r = boost::math::tools::toms748_solve(gap, lo, hi, boost::math::tools::eps_tolerance<double>(30), iters);
        iv = 0.5 * (r.first + r.second);
    }
    const double step = std::log(1.1);
    return std::exp(std::round(std::log(iv) / step) * step);
}

/// Grid for the loss: fixed by the cross-section and the anchor, so the loss is a smooth
/// function of the parameters instead of jumping as a parameter-dependent box moves.
inline ChebGrid calibration_grid(const CrossSection& cs, double reference_strike, double anchor,
                                 const ChebSettings& cheb) {
    const SABRParams box{cs.spot / reference_strike, anchor, 0.5, 0.0, cs.rate, cs.rate};
    return default_grid(box, cs.maturity, cheb);
}

/// Model prices at t = 0 for every quote on the grid fixed by `anchor`.
inline std::vector<double> model_prices(const SABRParams& p, const std::vector<OptionQuote>& quotes,
                                        const PricingSettings& settings, double anchor) {
    const CrossSection cs = cross_section(quotes);
    const double kref = reference_strike(quotes);
    SABRParams m = p;
    m.s0 = cs.spot / kref;
    m.r = cs.rate;
    m.mu = cs.rate;
    const OptionSpec unit{1.0, cs.maturity, ExerciseStyle::american};
    const ValueSurface surf = backward_induce(m, unit, calibration_grid(cs, kref, anchor, settings.cheb),
                                              settings.cheb.time_steps, settings.cheb.mc_per_node, settings.seed);
    std::vector<double> out;
    for (const auto& q : quotes) {
        const double sv = surf.grid.axes[1].clamp(p.sigma0);
        out.push_back(q.strike * query_price(surf, cs.spot / q.strike, sv, 0.0));
    }
    return out;
}

inline std::vector<double> model_prices(const SABRParams& p, const std::vector<OptionQuote>& quotes,
                                        const PricingSettings& settings) {
    return model_prices(p, quotes, settings, anchor_vol(quotes));
}

/// Quotes cheap enough to be dominated by tick noise are dropped; a note is added per dropped quote.
inline std::vector<OptionQuote> usable_quotes(const std::vector<OptionQuote>& quotes, std::vector<std::string>* notes) {
    std::vector<OptionQuote> out;
    for (const auto& q : quotes) {
        if (q.mid < 0.01) {
            if (notes) notes->push_back("excluded strike " + std::to_string(q.strike) + ": mid below 0.01");
            continue;
        }
        out.push_back(q);
    }
    return out;
}

/// Sum of squared relative price errors.
inline double calibration_loss(const SABRParams& p, const std::vector<OptionQuote>& quotes,
                               const PricingSettings& settings) {
    const auto usable = usable_quotes(quotes, nullptr);
    if (usable.size() < 2) throw std::invalid_argument("calibration_loss: need at least two usable quotes");
    const auto model = model_prices(p, usable, settings, anchor_vol(usable));
    double loss = 0.0;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        const double e = (model[i] - usable[i].mid) / usable[i].mid;
        loss += e * e;
    }
    return loss;
}

struct CalibrationSettings {
    PricingSettings pricing;
    SimplexOptions simplex{300, 1e-5, 1e-12, 0.05};
    int starts = 3;
};

struct StrikeResidual {
    double strike;
    double model;
    double mid;
    double relative_error;
};

struct CalibrationResult {
    SABRParams params;
    double objective = 0.0;
    std::vector<StrikeResidual> residuals;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<std::vector<double>> start_points;
    std::vector<double> start_objectives;
    std::vector<std::string> notes;
    std::optional<ValueSurface> surface;  // strike-1 surface at the optimum
    double reference_strike = 1.0;
};

inline Bounds sabr_bounds() { return {{0.01, 0.0, -0.99}, {2.0, 3.0, 0.99}}; }

inline CalibrationResult calibrate(const std::vector<OptionQuote>& quotes, const SABRParams& guess,
                                   const CalibrationSettings& settings = {}) {
    CalibrationResult res;
    const auto usable = usable_quotes(quotes, &res.notes);
    if (usable.size() < 2) throw std::invalid_argument("calibrate: need at least two usable quotes");
    const CrossSection cs = cross_section(usable);
    const Bounds bounds = sabr_bounds();

    auto params_of = [&](const std::vector<double>& x) {
        SABRParams p = guess;
        p.s0 = cs.spot;
        p.sigma0 = x[0];
        p.nu = x[1];
        p.rho = x[2];
        p.mu = cs.rate;
        p.r = cs.rate;
        return p;
    };
    const Objective f = [&](const std::vector<double>& x) { return calibration_loss(params_of(x), usable, settings.pricing); };

    const std::vector<double> g{guess.sigma0, guess.nu, guess.rho};
    std::vector<std::vector<double>> starts{bounds.project(g)};
    if (settings.starts > 1) starts.push_back(bounds.project({g[0] * 1.25, g[1] * 0.7 + 0.05, g[2] * 0.5}));
    if (settings.starts > 2) starts.push_back(bounds.project({g[0] * 0.8, g[1] * 1.3 + 0.1, g[2] - 0.3}));

    std::optional<SimplexResult> best;
    for (const auto& s : starts) {
        const SimplexResult r = simplex_search(f, s, bounds, settings.simplex);
        res.start_points.push_back(r.x);
        res.start_objectives.push_back(r.value);
        res.iterations += r.iterations;
        res.evaluations += r.evaluations;
        if (!best || r.value < best->value) best = r;
    }
    res.params = params_of(best->x);
    res.objective = best->value;
    res.converged = best->converged;
    if (!res.converged) res.notes.push_back("simplex hit the iteration limit before converging");

    res.reference_strike = reference_strike(usable);
    res.surface = normalized_surface(res.params, cs, res.reference_strike, settings.pricing);
    const auto fitted = model_prices(res.params, usable, settings.pricing);
    for (std::size_t i = 0; i < usable.size(); ++i)
        res.residuals.push_back({usable[i].strike, fitted[i], usable[i].mid, (fitted[i] - usable[i].mid) / usable[i].mid});
    return res;
}

inline nlohmann::json to_json(const CalibrationResult& r) {
    nlohmann::json j;
    j["params"] = {{"sigma0", r.params.sigma0}, {"nu", r.params.nu}, {"rho", r.params.rho},
                   {"mu", r.params.mu},         {"r", r.params.r},   {"s0", r.params.s0}};
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["evaluations"] = r.evaluations;
    j["converged"] = r.converged;
    j["residuals"] = nlohmann::json::array();
    for (const auto& e : r.residuals)
        j["residuals"].push_back({{"strike", e.strike}, {"model", e.model}, {"mid", e.mid}, {"relative_error", e.relative_error}});
    j["starts"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.start_points.size(); ++i)
        j["starts"].push_back({{"x", r.start_points[i]}, {"objective", r.start_objectives[i]}});
    j["notes"] = r.notes;
    return j;
}

/// Mid prices generated by the model itself; used for round-trip checks and synthetic weekly data.
inline std::vector<OptionQuote> synthetic_quotes(const SABRParams& p, const std::string& symbol,
                                                 const std::string& quote_date, const std::string& expiry,
                                                 const std::vector<double>& strikes, const PricingSettings& settings) {
    std::vector<OptionQuote> quotes;
    for (double k : strikes) quotes.push_back({symbol, quote_date, expiry, k, 0.0, p.s0, p.r});
    // a placeholder mid keeps validation from rejecting deep ITM rows before pricing
    for (auto& q : quotes) q.mid = std::max(q.strike - q.spot, 0.0) + 1.0;
    // price on the grid the calibration will rebuild from these mids; the ladder makes this settle at once
    double anchor = p.sigma0;
    for (int pass = 0; pass < 5; ++pass) {
        const auto prices = model_prices(p, quotes, settings, anchor);
        for (std::size_t i = 0; i < quotes.size(); ++i) quotes[i].mid = prices[i];
        const double next = anchor_vol(quotes);
        if (next == anchor) break;
        anchor = next;
    }
    return quotes;
}

}  // namespace hedgelab
