#pragma once

// Out-of-sample hedging tests: strategies, per-path final P&L and summaries.
//
// Accounting (per path, short one put, holding a_t shares over [t, t+1]):
//   pv += -(D_{t+1} C_{t+1} - D_t C_t) + a_t (D_{t+1} s_{t+1} - D_t s_t) - D_t lambda |a_t - a_{t-1}| s_t
// with D_t = exp(-r (t - t_start)); the final P&L is pv carried to the end of
// the test window. C at the last instant is the payoff (maturity) or the
// intrinsic value (early exercise). Without financing, D = 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hedgelab/analytic.hpp"
#include "hedgelab/ddpg.hpp"
#include "hedgelab/hedge_env.hpp"
#include "hedgelab/market_sim.hpp"

namespace hedgelab {

enum class StrategyKind { agent, bs_delta, tree_delta, constant };

struct Strategy {
    StrategyKind kind = StrategyKind::constant;
    std::string name;
    std::shared_ptr<const TrainedAgent> agent;
    double sigma = 0.0;  // bs_delta
    double rate = 0.0;   // bs_delta
    std::shared_ptr<const BinomialTree> tree;
    double constant = 0.0;

    static Strategy from_agent(std::shared_ptr<const TrainedAgent> a, std::string name = "DRL") {
        Strategy s;
        s.kind = StrategyKind::agent;
        s.name = std::move(name);
        s.agent = std::move(a);
        return s;
    }
    static Strategy bs_delta(double sigma, double rate, std::string name = "BS Delta") {
        Strategy s;
        s.kind = StrategyKind::bs_delta;
        s.name = std::move(name);
        s.sigma = sigma;
        s.rate = rate;
        return s;
    }
    static Strategy tree_delta(std::shared_ptr<const BinomialTree> tree, std::string name = "Tree Delta") {
        Strategy s;
        s.kind = StrategyKind::tree_delta;
        s.name = std::move(name);
        s.tree = std::move(tree);
        return s;
    }
    static Strategy constant_action(double a, std::string name = "Constant") {
        check_action(a, "Strategy::constant_action");
        Strategy s;
        s.kind = StrategyKind::constant;
        s.name = std::move(name);
        s.constant = a;
        return s;
    }
};

/// Black-Scholes put delta clamped to [-1, 0]; at expiry -1 in the money, 0 otherwise.
inline double bs_delta_action(double s, const OptionSpec& spec, double sigma, double r, double tau) {
    if (!(tau > 0.0)) return s < spec.strike ? -1.0 : 0.0;
    return std::clamp(bs_put_delta(s, spec, sigma, r, tau), -1.0, 0.0);
}

/// Actions for a batch of states at calendar time t (measured from the pricer origin).
inline Eigen::RowVectorXd strategy_actions(const Strategy& st, const std::vector<HedgeState>& states,
                                           const OptionSpec& spec, double t) {
    const auto n = static_cast<Eigen::Index>(states.size());
    Eigen::RowVectorXd a(n);
    switch (st.kind) {
    case StrategyKind::agent: {
        Eigen::MatrixXd x(3, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = states[static_cast<std::size_t>(i)];
            x(0, i) = s.s / st.agent->strike;
            x(1, i) = s.tau / st.agent->maturity;
            x(2, i) = s.holding;
        }
        a = st.agent->act(x);
        break;
    }
    case StrategyKind::bs_delta:
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = states[static_cast<std::size_t>(i)];
            a(i) = bs_delta_action(s.s, spec, st.sigma, st.rate, s.tau);
        }
        break;
    case StrategyKind::tree_delta:
        for (Eigen::Index i = 0; i < n; ++i) a(i) = tree_delta(*st.tree, states[static_cast<std::size_t>(i)].s, t);
        break;
    case StrategyKind::constant:
        a.setConstant(st.constant);
        break;
    }
    return a;
}

inline std::string to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::agent: return "agent";
    case StrategyKind::bs_delta: return "bs_delta";
    case StrategyKind::tree_delta: return "tree_delta";
    case StrategyKind::constant: return "constant";
    }
    return "unknown";
}

struct PnLStats {
    double mean = 0.0;
    double sd = 0.0;
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
inline PnLStats pnl_stats(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("pnl_stats: empty input");
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    if (x.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

struct PnLRecord {
    std::vector<double> pnl;
    std::vector<double> exercise_time;  // maturity (or window end) when never exercised
    std::vector<double> transaction_costs;
    std::vector<double> final_holding;
    PnLStats stats;
};

/// Per-path log sufficient to recompute the P&L in telescoped form.
struct PathTrace {
    std::vector<double> times;
    std::vector<double> prices;
    std::vector<double> actions;
    double option_start = 0.0;
    double option_end = 0.0;
    std::size_t end_index = 0;
    bool exercised = false;
};

struct HedgeTestConfig {
    double lambda = 0.01;
    double start_time = 0.0;          // calendar time of the first path instant
    bool financing = true;
    bool charge_initial = false;      // charge lambda on the first trade from the initial holding
    bool charge_unwind = false;       // charge lambda on closing the final holding
    bool early_exercise = true;
    std::optional<double> start_value;        // overrides the pricer's value at the first instant
    std::vector<double> initial_holding;      // one per path; empty means flat
};

/// Telescoped P&L: C_0 - D_end C_end + sum a_t (D_{t+1} s_{t+1} - D_t s_t) - sum D_t TC_t, carried to the window end.
inline double telescoped_pnl(const PathTrace& tr, double r, const HedgeTestConfig& cfg, double initial_holding = 0.0) {
    auto disc = [&](double t) { return cfg.financing ? std::exp(-r * (t - tr.times.front())) : 1.0; };
    double pv = tr.option_start - disc(tr.times[tr.end_index]) * tr.option_end;
    double prev = initial_holding;
    for (std::size_t i = 0; i < tr.end_index; ++i) {
        const double a = tr.actions[i];
        pv += a * (disc(tr.times[i + 1]) * tr.prices[i + 1] - disc(tr.times[i]) * tr.prices[i]);
        if (i > 0 || cfg.charge_initial) pv -= disc(tr.times[i]) * cfg.lambda * std::abs(a - prev) * tr.prices[i];
        prev = a;
    }
    if (cfg.charge_unwind)
        pv -= disc(tr.times[tr.end_index]) * cfg.lambda * std::abs(prev) * tr.prices[tr.end_index];
    return pv / disc(tr.times.back());
}

/// Runs a strategy over every path; rebalance count is the path grid's step count.
inline PnLRecord run_hedge_test(const Strategy& strategy, const PathSet& paths, const Pricer& pricer,
                                const HedgeTestConfig& cfg, std::vector<PathTrace>* traces = nullptr) {
    if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("run_hedge_test: lambda must be non-negative");
    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_steps = paths.n_steps();
    if (n_steps < 1) throw std::invalid_argument("run_hedge_test: paths need at least one step");
    if (!cfg.initial_holding.empty() && cfg.initial_holding.size() != n_paths)
        throw std::invalid_argument("run_hedge_test: one initial holding per path required");
    const OptionSpec& spec = pricer.spec();
    const double r = pricer.rate();
    const auto& times = paths.times();
    const double t0 = cfg.start_time + times.front();
    const double t_end = cfg.start_time + times.back();
    if (t_end > spec.maturity * (1.0 + 1e-9)) throw std::invalid_argument("run_hedge_test: paths run past maturity");
    auto disc = [&](double t) { return cfg.financing ? std::exp(-r * (t - t0)) : 1.0; };
    auto vol = [&](std::size_t p, std::size_t i) { return paths.has_vols() ? paths.vol(p, i) : 0.0; };

    PnLRecord rec;
    rec.pnl.assign(n_paths, 0.0);
    rec.exercise_time.assign(n_paths, t_end);
    rec.transaction_costs.assign(n_paths, 0.0);
    rec.final_holding.assign(n_paths, 0.0);
    std::vector<double> option(n_paths), holding(n_paths, 0.0);
    std::vector<char> alive(n_paths, 1);
    if (!cfg.initial_holding.empty()) holding = cfg.initial_holding;
    for (std::size_t p = 0; p < n_paths; ++p) {
        option[p] = cfg.start_value ? *cfg.start_value : pricer.price(paths.price(p, 0), vol(p, 0), t0);
    }
    if (traces) {
        traces->assign(n_paths, PathTrace{});
        for (std::size_t p = 0; p < n_paths; ++p) {
            auto& tr = (*traces)[p];
            for (double t : times) tr.times.push_back(cfg.start_time + t);
            tr.prices = paths.path_prices(p);
            tr.option_start = option[p];
        }
    }

    std::vector<HedgeState> states;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = cfg.start_time + times[i];
        const double t1 = cfg.start_time + times[i + 1];
        states.clear();
        ids.clear();
        for (std::size_t p = 0; p < n_paths; ++p)
            if (alive[p]) {
                states.push_back({paths.price(p, i), spec.maturity - t, holding[p], vol(p, i)});
                ids.push_back(p);
            }
        if (ids.empty()) break;
        const Eigen::RowVectorXd acts = strategy_actions(strategy, states, spec, t);
        const bool at_maturity = t1 >= spec.maturity * (1.0 - 1e-12);
        const bool last = i + 1 == n_steps;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const std::size_t p = ids[k];
            const double a = acts(static_cast<Eigen::Index>(k));
            check_action(a, "run_hedge_test");
            const double s = paths.price(p, i), s1 = paths.price(p, i + 1);
            double tc = 0.0;
            if (i > 0 || cfg.charge_initial) tc = cfg.lambda * std::abs(a - holding[p]) * s;
            bool exercised = false;
            double c1;
            if (at_maturity) {
                c1 = spec.intrinsic(s1);
            } else if (cfg.early_exercise && pricer.exercise(s1, vol(p, i + 1), t1)) {
                c1 = spec.intrinsic(s1);
                exercised = true;
            } else {
                c1 = pricer.price(s1, vol(p, i + 1), t1);
            }
            double& pv = rec.pnl[p];
            pv += -(disc(t1) * c1 - disc(t) * option[p]) + a * (disc(t1) * s1 - disc(t) * s) - disc(t) * tc;
            const bool done = exercised || last;
            rec.transaction_costs[p] += disc(t) * tc;
            if (done && cfg.charge_unwind) {
                const double unwind = cfg.lambda * std::abs(a) * s1;
                pv -= disc(t1) * unwind;
                rec.transaction_costs[p] += disc(t1) * unwind;
            }
            holding[p] = a;
            option[p] = c1;
            if (traces) (*traces)[p].actions.push_back(a);
            if (done) {
                alive[p] = 0;
                rec.exercise_time[p] = t1;
                if (traces) {
                    auto& tr = (*traces)[p];
                    tr.option_end = c1;
                    tr.end_index = i + 1;
                    tr.exercised = exercised;
                }
            }
        }
    }
    const double carry = 1.0 / disc(t_end);
    for (std::size_t p = 0; p < n_paths; ++p) {
        rec.pnl[p] *= carry;
        rec.transaction_costs[p] *= carry;
        rec.final_holding[p] = holding[p];
    }
    rec.stats = pnl_stats(rec.pnl);
    return rec;
}

struct NamedRecord {
    std::string strategy;
    double lambda = 0.0;
    int rebalance_steps = 0;
    PnLStats stats;
};

/// Strict improvement on both moments.
inline bool dominates(const PnLStats& a, const PnLStats& baseline) {
    return a.mean > baseline.mean && a.sd < baseline.sd;
}

/// Aligned mean/SD table, one row per strategy and one column pair per lambda.
/// Rows beating `baseline` on both mean and SD at a given lambda are marked with '*'.
inline std::string compare_report(const std::vector<NamedRecord>& records, const std::string& baseline = "BS Delta") {
    if (records.empty()) throw std::invalid_argument("compare_report: no records");
    std::vector<std::string> names;
    std::vector<double> lambdas;
    for (const auto& r : records) {
        if (std::find(names.begin(), names.end(), r.strategy) == names.end()) names.push_back(r.strategy);
        if (std::find(lambdas.begin(), lambdas.end(), r.lambda) == lambdas.end()) lambdas.push_back(r.lambda);
    }
    std::size_t width = 8;
    for (const auto& n : names) width = std::max(width, n.size());
    auto find = [&](const std::string& name, double lam) -> const NamedRecord* {
        for (const auto& r : records)
            if (r.strategy == name && r.lambda == lam) return &r;
        return nullptr;
    };

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "Strategy";
    for (double lam : lambdas) {
        std::ostringstream h;
        h << "lambda=" << lam * 100 << "%";
        os << "  " << std::right << std::setw(21) << h.str();
    }
    os << '\n' << std::left << std::setw(static_cast<int>(width)) << "";
    for (std::size_t i = 0; i < lambdas.size(); ++i) os << "  " << std::right << std::setw(10) << "Mean" << std::setw(11) << "SD";
    os << '\n';
    os << std::fixed << std::setprecision(2);
    for (const auto& name : names) {
        os << std::left << std::setw(static_cast<int>(width)) << name;
        for (double lam : lambdas) {
            const NamedRecord* r = find(name, lam);
            if (!r) {
                os << "  " << std::right << std::setw(21) << "-";
                continue;
            }
            const NamedRecord* base = name == baseline ? nullptr : find(baseline, lam);
            const bool flag = base && dominates(r->stats, base->stats);
            std::ostringstream m, s;
            m << std::fixed << std::setprecision(2) << r->stats.mean;
            s << std::fixed << std::setprecision(2) << r->stats.sd << (flag ? "*" : " ");
            os << "  " << std::right << std::setw(10) << m.str() << std::setw(11) << s.str();
        }
        os << '\n';
    }
    return os.str();
}

struct ResultRow {
    std::string strategy;
    double lambda = 0.0;
    int rebalance_steps = 0;
    std::size_t n_paths = 0;
    PnLStats stats;
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::string config_hash;
    std::string version;
};

inline void write_results_header(std::ostream& os) {
    os << "strategy,lambda,rebalance_steps,n_paths,mean_pnl,sd_pnl,seed,status,config_hash,version\n";
}

inline void write_result_row(std::ostream& os, const ResultRow& r) {
    std::ostringstream line;
    line << std::setprecision(10) << r.strategy << ',' << r.lambda << ',' << r.rebalance_steps << ',' << r.n_paths
         << ',' << r.stats.mean << ',' << r.stats.sd << ',' << r.seed << ',' << r.status << ',' << r.config_hash << ','
         << r.version << '\n';
    os << line.str();
}

inline void write_per_path(std::ostream& os, const PnLRecord& rec) {
    os << "path_id,final_pnl,exercise_time\n" << std::setprecision(12);
    for (std::size_t p = 0; p < rec.pnl.size(); ++p) os << p << ',' << rec.pnl[p] << ',' << rec.exercise_time[p] << '\n';
}

}  // namespace hedgelab
