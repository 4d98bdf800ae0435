#pragma once

// Weekly re-calibration workflow on realized daily paths: per training date,
// calibrate the stochastic volatility model to that date's quotes, train a
// daily-rebalancing agent per strike on model paths, and hedge the realized
// segment up to the next training date, carrying the option mark and the
// share holding across week boundaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgelab/calibration.hpp"
#include "hedgelab/config.hpp"
#include "hedgelab/eval.hpp"
#include "hedgelab/workflow.hpp"

namespace hedgelab {

/// Daily closes: one row per date, one column per symbol.
struct EmpiricalPaths {
    std::vector<std::string> dates;  // as written in the file
    std::vector<std::string> symbols;
    std::vector<std::vector<double>> prices;  // [symbol][row]

    std::size_t n_rows() const { return dates.size(); }
    const std::vector<double>& of(const std::string& symbol) const {
        const auto it = std::find(symbols.begin(), symbols.end(), symbol);
        if (it == symbols.end()) throw std::invalid_argument("paths: unknown symbol '" + symbol + "'");
        return prices[static_cast<std::size_t>(it - symbols.begin())];
    }
    std::size_t row_of(const std::string& date) const {
        const auto d = parse_date(date);
        for (std::size_t i = 0; i < dates.size(); ++i)
            if (parse_date(dates[i]) == d) return i;
        throw std::invalid_argument("paths: date " + date + " not in the path file");
    }
    /// Single-path set over rows [first, first + steps], one trading day per step.
    PathSet segment(const std::string& symbol, std::size_t first, std::size_t steps) const {
        const auto& p = of(symbol);
        if (steps < 1 || first + steps >= p.size())
            throw std::invalid_argument("paths: segment outside the file");
        PathSet set(uniform_times(steps, static_cast<double>(steps) / kTradingDaysPerYear), 1, 0, false);
        for (std::size_t i = 0; i <= steps; ++i) set.price(0, i) = p[first + i];
        return set;
    }
};

inline EmpiricalPaths load_paths(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || detail::trim(line).empty()) throw std::runtime_error("paths file: empty input");
    auto header = detail::split(detail::trim(line), ',');
    if (header.size() < 2 || (header[0] != "date" && header[0] != "Date"))
        throw std::runtime_error("paths file: header must be date followed by symbols");
    EmpiricalPaths out;
    out.symbols.assign(header.begin() + 1, header.end());
    out.prices.resize(out.symbols.size());
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string row = "row " + std::to_string(lineno);
        std::vector<std::string> cells;
        std::stringstream ss(detail::trim(line));
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(detail::trim(cell));
        if (cells.size() != header.size()) throw std::runtime_error("paths file: " + row + " has a missing or extra cell");
        try {
            const auto d = parse_date(cells[0]);
            if (!out.dates.empty() && !(d > parse_date(out.dates.back())))
                throw std::runtime_error("dates must increase");
        } catch (const std::exception& e) {
            throw std::runtime_error("paths file: " + row + ": " + e.what());
        }
        out.dates.push_back(cells[0]);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double v = 0.0;
            try {
                v = detail::to_double(out.symbols[j - 1], cells[j]);
            } catch (const std::exception&) {
                throw std::runtime_error("paths file: " + row + ": non-numeric cell '" + cells[j] + "' for " + out.symbols[j - 1]);
            }
            if (!(v > 0.0)) throw std::runtime_error("paths file: " + row + ": non-positive price for " + out.symbols[j - 1]);
            out.prices[j - 1].push_back(v);
        }
    }
    if (out.dates.empty()) throw std::runtime_error("paths file: no data rows");
    return out;
}

inline EmpiricalPaths load_paths(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open paths file '" + file + "'");
    return load_paths(in);
}

/// symbol,strike rows grouped by symbol.
inline std::map<std::string, std::vector<double>> load_strikes(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || detail::trim(line) != "symbol,strike")
        throw std::runtime_error("strikes file: header must be symbol,strike");
    std::map<std::string, std::vector<double>> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != 2) throw std::runtime_error("strikes file: row " + std::to_string(lineno) + " needs 2 cells");
        out[cells[0]].push_back(detail::to_double("strike", cells[1]));
    }
    return out;
}

inline std::map<std::string, std::vector<double>> load_strikes(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open strikes file '" + file + "'");
    return load_strikes(in);
}

struct WeeklySchedule {
    std::string symbol;
    std::vector<std::string> dates;
    std::vector<int> horizons;  // trading days hedged after each date
    std::vector<std::string> quote_files;
    std::string expiry;

    /// Dates increase, each lies in the path file, and the horizons tile the rows from the first date to the last row.
    void validate(const EmpiricalPaths& paths) const {
        if (dates.empty()) throw std::invalid_argument("schedule: no dates");
        if (horizons.size() != dates.size() || quote_files.size() != dates.size())
            throw std::invalid_argument("schedule: one horizon and one quote file per date required");
        for (std::size_t w = 1; w < dates.size(); ++w)
            if (!(parse_date(dates[w]) > parse_date(dates[w - 1])))
                throw std::invalid_argument("schedule: dates must be strictly increasing");
        std::size_t row = paths.row_of(dates.front());
        for (std::size_t w = 0; w < dates.size(); ++w) {
            if (paths.row_of(dates[w]) != row)
                throw std::invalid_argument("schedule: horizons do not reach " + dates[w]);
            if (horizons[w] < 1) throw std::invalid_argument("schedule: horizons must be positive");
            row += static_cast<std::size_t>(horizons[w]);
        }
        if (row != paths.n_rows() - 1) throw std::invalid_argument("schedule: horizons do not end on the last path row");
        if (parse_date(expiry) < parse_date(paths.dates.back()))
            throw std::invalid_argument("schedule: path runs past expiry");
    }
};

inline std::string quote_file_name(const std::string& dir, const std::string& symbol, const std::string& date) {
    return (fs::path(dir) / (symbol + "_" + format_date(parse_date(date)) + ".csv")).string();
}

inline WeeklySchedule make_schedule(const WeeklyConfig& w, const std::string& symbol) {
    WeeklySchedule s{symbol, w.dates, w.horizons, {}, w.expiry};
    for (const auto& d : w.dates) s.quote_files.push_back(quote_file_name(w.quotes_dir, symbol, d));
    return s;
}

/// American put of strike K priced from a strike-1 surface: P(s, K) = K P(s / K, 1).
/// Realized paths carry no volatility; the week's calibrated sigma0 stands in.
class ScaledSurfacePricer final : public Pricer {
public:
    ScaledSurfacePricer(std::shared_ptr<const ValueSurface> unit, double strike, double sigma_fallback)
        : unit_(std::move(unit)), spec_{strike, unit_->spec.maturity, ExerciseStyle::american}, fallback_(sigma_fallback) {
        if (unit_->spec.strike != 1.0) throw std::invalid_argument("ScaledSurfacePricer: surface must have strike 1");
    }
    const OptionSpec& spec() const override { return spec_; }
    double rate() const override { return unit_->rate(); }
    double price(double s, double sigma, double t) const override {
        return spec_.strike * query_price(*unit_, s / spec_.strike, vol(sigma), std::min(t, spec_.maturity));
    }
    bool exercise(double s, double sigma, double t) const override {
        return surface_exercise(*unit_, s / spec_.strike, vol(sigma), std::min(t, spec_.maturity));
    }

private:
    std::optional<double> vol(double sigma) const {
        if (!unit_->two_dimensional()) return std::nullopt;
        return unit_->grid.axes[1].clamp(sigma > 0.0 ? sigma : fallback_);
    }
    std::shared_ptr<const ValueSurface> unit_;
    OptionSpec spec_;
    double fallback_;
};

struct WeekFit {
    std::string symbol;
    std::string date;
    CalibrationResult calibration;
    std::shared_ptr<const ValueSurface> surface;
    double maturity = 0.0;
    double rate = 0.0;
    double spot = 0.0;
};

struct WeekLogRow {
    std::string symbol;
    std::string strategy;
    double lambda;
    double strike;
    int week;
    std::string date;
    double start_holding;
    double end_holding;
    double week_pnl;
    double cumulative_pnl;
    bool exercised;
};

struct StrikeOutcome {
    std::string symbol;
    double strike;
    double lambda;
    std::map<std::string, double> pnl;  // strategy -> final P&L
};

struct WeeklyReport {
    std::vector<WeekFit> fits;
    std::vector<StrikeOutcome> outcomes;
    std::vector<WeekLogRow> log;
    bool holding_continuity = true;
};

inline const std::vector<std::string>& weekly_strategies() {
    static const std::vector<std::string> names{"Delta (Weekly Re-Cal)", "DRL (Weekly Re-train)", "DRL (Train Once)"};
    return names;
}

inline std::vector<OptionQuote> read_quote_file(const std::string& file, const std::string& date) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("weekly: missing quote file '" + file + "' for " + date);
    return read_quotes_csv(in);
}

/// Model-generated quote files for every schedule date; spot is the realized close on that date.
inline void write_synthetic_quotes(const WeeklyConfig& w, const WeeklySchedule& sched, const EmpiricalPaths& paths,
                                   const std::vector<double>& strikes, const PricingSettings& pricing) {
    const auto& prices = paths.of(sched.symbol);
    for (std::size_t k = 0; k < sched.dates.size(); ++k) {
        const double spot = prices[paths.row_of(sched.dates[k])];
        const SABRParams p{spot, w.synthetic_sigma0, w.synthetic_nu, w.synthetic_rho, w.rate, w.rate};
        const auto quotes = synthetic_quotes(p, sched.symbol, format_date(parse_date(sched.dates[k])), sched.expiry,
                                             strikes, pricing);
        fs::create_directories(fs::path(sched.quote_files[k]).parent_path());
        std::ofstream out(sched.quote_files[k]);
        write_quotes_csv(out, quotes);
    }
}

/// Runs the weekly pipeline for one symbol; appends to `report`.
inline void run_weekly(const RunConfig& c, const WeeklySchedule& sched, const EmpiricalPaths& paths,
                       const std::vector<double>& strikes, WeeklyReport& report, std::ostream* log = nullptr,
                       CalibrationSettings cal = {}) {
    sched.validate(paths);
    const auto& w = c.weekly;
    cal.starts = w.calibration_starts;
    const std::size_t n_weeks = sched.dates.size();

    // calibrate every week first: a missing quote file aborts before any training
    std::vector<std::vector<OptionQuote>> quotes;
    for (std::size_t k = 0; k < n_weeks; ++k) quotes.push_back(read_quote_file(sched.quote_files[k], sched.dates[k]));
    std::vector<WeekFit> fits;
    SABRParams guess{1.0, w.guess_sigma0, w.guess_nu, w.guess_rho, w.rate, w.rate};
    for (std::size_t k = 0; k < n_weeks; ++k) {
        std::vector<OptionQuote> q;
        for (const auto& x : quotes[k])
            if (x.symbol == sched.symbol) q.push_back(x);
        if (q.empty()) throw std::runtime_error("weekly: no " + sched.symbol + " quotes in " + sched.quote_files[k]);
        const CrossSection cs = cross_section(q);
        if (parse_date(q.front().expiry) != parse_date(sched.expiry))
            throw std::runtime_error("weekly: quote expiry differs from the schedule in " + sched.quote_files[k]);
        WeekFit f;
        f.symbol = sched.symbol;
        f.date = sched.dates[k];
        f.calibration = calibrate(q, guess, cal);
        f.rate = cs.rate;
        f.spot = cs.spot;
        f.maturity = cs.maturity;
        // strike-1 surface centred on the spot, shared by all strikes of the week
        f.surface = std::make_shared<const ValueSurface>(normalized_surface(f.calibration.params, cs, cs.spot, cal.pricing));
        guess = f.calibration.params;
        if (log)
            *log << sched.symbol << ' ' << f.date << ": sigma0=" << f.calibration.params.sigma0
                 << " nu=" << f.calibration.params.nu << " rho=" << f.calibration.params.rho
                 << " objective=" << f.calibration.objective << std::endl;
        fits.push_back(std::move(f));
    }

    const fs::path agent_dir = fs::path(c.output.dir) / c.output.experiment;
    for (double strike : strikes) {
        std::vector<std::shared_ptr<const Pricer>> pricers;
        std::vector<std::shared_ptr<const TrainedAgent>> agents;
        for (std::size_t k = 0; k < n_weeks; ++k) {
            const auto& f = fits[k];
            pricers.push_back(std::make_shared<ScaledSurfacePricer>(f.surface, strike, f.calibration.params.sigma0));
            AgentConfig a = c.agent;
            a.episodes = w.episodes;
            a.steps_per_episode = sched.horizons[k];
            EpisodeConfig env;
            env.pricer = pricers.back();
            env.steps = sched.horizons[k];
            env.horizon = sched.horizons[k] / kTradingDaysPerYear;
            env.reward = c.reward;
            SABRParams model = f.calibration.params;
            model.s0 = f.spot;
            const std::uint64_t path_seed = mix_seed(a.seed, 1000 + k);
            const nlohmann::json data{{"symbol", sched.symbol}, {"date", f.date}, {"strike", strike},
                                      {"sabr", {model.sigma0, model.nu, model.rho}}, {"path_seed", path_seed}};
            TrainResult tr = train(env, a, sabr_sampler(model, env.steps, env.horizon, path_seed), data);
            if (tr.diverged) throw std::runtime_error("weekly: training diverged: " + tr.divergence_report);
            const std::string point = sched.symbol + "_" + format_date(parse_date(f.date)) + "_K" + detail::num(strike);
            fs::create_directories(agent_dir / point);
            std::ofstream(agent_dir / point / (std::to_string(a.seed) + ".agent.json")) << to_json(tr.agent).dump(1);
            agents.push_back(std::make_shared<const TrainedAgent>(std::move(tr.agent)));
        }

        std::optional<double> premium;
        for (const auto& q : quotes[0])
            if (q.symbol == sched.symbol && q.strike == strike) premium = q.mid;
        if (!premium) premium = pricers[0]->price(fits[0].spot, 0.0, 0.0);

        for (double lam : w.lambdas) {
            StrikeOutcome outcome{sched.symbol, strike, lam, {}};
            for (const auto& name : weekly_strategies()) {
                double total = 0.0, holding = 0.0, mark = *premium;
                for (std::size_t k = 0; k < n_weeks; ++k) {
                    Strategy st = name == weekly_strategies()[0]
                                      ? Strategy::bs_delta(fits[k].calibration.params.sigma0, fits[k].rate)
                                      : Strategy::from_agent(name == weekly_strategies()[1] ? agents[k] : agents[0]);
                    HedgeTestConfig h = hedge_test_config(c.test, lam);
                    h.charge_initial = k > 0 || c.test.charge_initial;
                    h.charge_unwind = c.test.charge_unwind && k + 1 == n_weeks;
                    h.start_value = mark;
                    h.initial_holding = {holding};
                    const PathSet seg = paths.segment(sched.symbol, paths.row_of(sched.dates[k]),
                                                      static_cast<std::size_t>(sched.horizons[k]));
                    std::vector<PathTrace> traces;
                    const PnLRecord rec = run_hedge_test(st, seg, *pricers[k], h, &traces);
                    const double growth = c.test.financing ? std::exp(fits[k].rate * sched.horizons[k] / kTradingDaysPerYear) : 1.0;
                    total = total * growth + rec.pnl[0];
                    const bool continuous = h.initial_holding[0] == holding;
                    report.holding_continuity = report.holding_continuity && continuous;
                    report.log.push_back({sched.symbol, name, lam, strike, static_cast<int>(k), sched.dates[k], holding,
                                          rec.final_holding[0], rec.pnl[0], total, traces[0].exercised});
                    holding = rec.final_holding[0];
                    mark = traces[0].option_end;
                    if (traces[0].exercised) break;
                    if (h.charge_unwind) holding = 0.0;
                }
                outcome.pnl[name] = total;
            }
            report.outcomes.push_back(outcome);
        }
        if (log) *log << sched.symbol << " K=" << strike << " done" << std::endl;
    }
    report.fits.insert(report.fits.end(), fits.begin(), fits.end());
}

/// Table 7 layout: per lambda, one row per symbol, strategy columns averaged over strikes.
inline std::string weekly_summary_table(const WeeklyReport& r) {
    std::vector<double> lambdas;
    std::vector<std::string> symbols;
    for (const auto& o : r.outcomes) {
        if (std::find(lambdas.begin(), lambdas.end(), o.lambda) == lambdas.end()) lambdas.push_back(o.lambda);
        if (std::find(symbols.begin(), symbols.end(), o.symbol) == symbols.end()) symbols.push_back(o.symbol);
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    for (double lam : lambdas) {
        os << "lambda = " << lam * 100 << "%\n" << std::left << std::setw(8) << "Symbol";
        for (const auto& n : weekly_strategies()) os << std::right << std::setw(24) << n;
        os << '\n';
        for (const auto& sym : symbols) {
            os << std::left << std::setw(8) << sym;
            for (const auto& n : weekly_strategies()) {
                double sum = 0.0;
                int count = 0;
                for (const auto& o : r.outcomes)
                    if (o.symbol == sym && o.lambda == lam) sum += o.pnl.at(n), ++count;
                os << std::right << std::setw(24) << (count ? sum / count : 0.0);
            }
            os << '\n';
        }
        os << '\n';
    }
    return os.str();
}

/// Per-option layout: symbol, lambda, strike and the three strategy columns.
inline std::string weekly_detail_table(const WeeklyReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << std::left << std::setw(8) << "Symbol" << std::right << std::setw(10)
       << "TC Rate" << std::setw(10) << "Strike";
    for (const auto& n : weekly_strategies()) os << std::setw(24) << n;
    os << '\n';
    for (const auto& o : r.outcomes) {
        std::ostringstream rate;
        rate << std::defaultfloat << o.lambda * 100 << "%";
        os << std::left << std::setw(8) << o.symbol << std::right << std::setw(10) << rate.str() << std::setw(10)
           << o.strike;
        for (const auto& n : weekly_strategies()) os << std::setw(24) << o.pnl.at(n);
        os << '\n';
    }
    return os.str();
}

inline void write_week_log(std::ostream& os, const WeeklyReport& r) {
    os << "symbol,strategy,lambda,strike,week,date,start_holding,end_holding,week_pnl,cumulative_pnl,exercised\n";
    std::ostringstream body;
    body << std::setprecision(10);
    for (const auto& x : r.log)
        body << x.symbol << ',' << x.strategy << ',' << x.lambda << ',' << x.strike << ',' << x.week << ',' << x.date
             << ',' << x.start_holding << ',' << x.end_holding << ',' << x.week_pnl << ',' << x.cumulative_pnl << ','
             << x.exercised << '\n';
    os << body.str();
}

/// Every week after the first must start from the previous week's closing holding.
inline bool check_holding_continuity(const WeeklyReport& r) {
    for (std::size_t i = 1; i < r.log.size(); ++i) {
        const auto& a = r.log[i - 1];
        const auto& b = r.log[i];
        const bool same_run = a.symbol == b.symbol && a.strategy == b.strategy && a.lambda == b.lambda && a.strike == b.strike;
        if (same_run && b.week == a.week + 1 && b.start_holding != a.end_holding) return false;
    }
    return r.holding_continuity;
}

struct WeeklyFiles {
    fs::path summary;
    fs::path detail;
    fs::path log;
    fs::path fits;
};

/// Full configured run over every symbol; writes the summary, per-option table, week log and fits.
inline WeeklyReport run_weekly_all(const RunConfig& c, WeeklyFiles* files = nullptr, std::ostream* log = nullptr,
                                   const CalibrationSettings& cal = {}) {
    const auto& w = c.weekly;
    const EmpiricalPaths paths = load_paths(w.paths_file);
    const auto strikes = load_strikes(w.strikes_file);
    WeeklyReport report;
    for (const auto& sym : w.symbols) {
        const auto it = strikes.find(sym);
        if (it == strikes.end()) throw std::runtime_error("weekly: no strikes for " + sym);
        const WeeklySchedule sched = make_schedule(w, sym);
        if (w.synthetic) write_synthetic_quotes(w, sched, paths, it->second, cal.pricing);
        run_weekly(c, sched, paths, it->second, report, log, cal);
    }
    if (!check_holding_continuity(report)) throw std::logic_error("weekly: holding continuity violated");

    const fs::path dir = c.output.dir;
    const WeeklyFiles out{dir / (c.output.experiment + "_weekly_summary.txt"), dir / (c.output.experiment + "_weekly_detail.txt"),
                          dir / (c.output.experiment + "_weekly_log.csv"), dir / (c.output.experiment + "_weekly_fits.json")};
    fs::create_directories(dir);
    std::ofstream(out.summary) << weekly_summary_table(report);
    std::ofstream(out.detail) << weekly_detail_table(report);
    {
        std::ofstream lg(out.log);
        write_week_log(lg, report);
        lg << "# holding continuity: " << (check_holding_continuity(report) ? "ok" : "violated") << '\n';
    }
    nlohmann::json fj = nlohmann::json::array();
    for (const auto& f : report.fits) fj.push_back({{"symbol", f.symbol}, {"date", f.date}, {"spot", f.spot}, {"calibration", to_json(f.calibration)}});
    std::ofstream(out.fits) << fj.dump(1);
    if (files) *files = out;
    return report;
}

}  // namespace hedgelab
