#pragma once

// Experiment orchestration: pricer and path factories, grid enumeration,
// resumable sweeps with a manifest, and the step and penalty experiments.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hedgelab/config.hpp"
#include "hedgelab/ddpg.hpp"
#include "hedgelab/eval.hpp"

namespace hedgelab {

namespace fs = std::filesystem;

inline std::shared_ptr<const Pricer> make_pricer(const RunConfig& c) {
    const OptionSpec spec = c.market.option();
    if (c.pricer.method == "tree") return std::make_shared<TreePricer>(spec, c.market.gbm(), c.pricer.tree_steps);
    const PricingModel model = c.market.model == "gbm" ? PricingModel{c.market.gbm()} : PricingModel{c.market.sabr()};
    return std::make_shared<SurfacePricer>(backward_induce(model, spec, c.pricer.cheb, c.pricer.seed));
}

inline PathSet make_test_paths(const RunConfig& c, int steps) {
    const auto n = static_cast<std::size_t>(steps);
    if (c.market.model == "gbm") return simulate_gbm(c.market.gbm(), c.test.paths, n, c.market.maturity, c.test.seed);
    return simulate_sabr(c.market.sabr(), c.test.paths, n, c.market.maturity, c.test.seed);
}

inline std::uint64_t training_path_seed(const AgentConfig& a) { return mix_seed(a.seed, 99); }

inline PathSampler make_sampler(const RunConfig& c, const AgentConfig& a) {
    const std::uint64_t seed = training_path_seed(a);
    if (c.market.model == "gbm") return gbm_sampler(c.market.gbm(), a.steps_per_episode, c.market.maturity, seed);
    return sabr_sampler(c.market.sabr(), a.steps_per_episode, c.market.maturity, seed);
}

inline TrainResult train_agent(const RunConfig& c, const AgentConfig& a, const RewardConfig& reward,
                               std::shared_ptr<const Pricer> pricer) {
    EpisodeConfig env;
    env.pricer = std::move(pricer);
    env.steps = a.steps_per_episode;
    env.reward = reward;
    env.early_exercise = c.test.early_exercise;
    const nlohmann::json data{{"model", c.market.model}, {"market", to_json(c)["market"]},
                              {"path_seed", training_path_seed(a)}, {"pricer", c.pricer.method}};
    return train(env, a, make_sampler(c, a), data);
}

inline HedgeTestConfig hedge_test_config(const TestConfig& t, double lambda) {
    HedgeTestConfig h;
    h.lambda = lambda;
    h.financing = t.financing;
    h.charge_initial = t.charge_initial;
    h.charge_unwind = t.charge_unwind;
    h.early_exercise = t.early_exercise;
    return h;
}

/// Volatility handed to the Black-Scholes benchmark.
inline double benchmark_sigma(const MarketConfig& m) { return m.model == "gbm" ? m.sigma : m.sigma0; }

struct GridPoint {
    std::string label;
    AgentConfig agent;
    RewardConfig reward;
};

namespace detail {

inline std::string num(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

template <class T>
std::vector<T> axis_or(const std::vector<T>& axis, const T& base) {
    return axis.empty() ? std::vector<T>{base} : axis;
}

}  // namespace detail

/// Cartesian product in fixed order (actor lr outermost, penalty innermost); seeds are not part of a point.
inline std::vector<GridPoint> enumerate_grid(const RunConfig& c) {
    using detail::axis_or;
    const auto& s = c.sweep;
    const AgentConfig& base = c.agent;
    std::vector<GridPoint> out;
    for (double alr : axis_or(s.actor_lr, base.actor_lr))
        for (double clr : axis_or(s.critic_lr, base.critic_lr))
            for (int ep : axis_or(s.episodes, base.episodes))
                for (const auto& aa : axis_or(s.actor_arch, base.actor_arch))
                    for (const auto& ca : axis_or(s.critic_arch, base.critic_arch))
                        for (int st : axis_or(s.train_steps, base.steps_per_episode))
                            for (const auto& pen : axis_or(s.penalties, PenaltySetting{c.reward.kind, c.reward.multiplier})) {
                                GridPoint g;
                                g.agent = base;
                                g.agent.actor_lr = alr;
                                g.agent.critic_lr = clr;
                                g.agent.episodes = ep;
                                g.agent.actor_arch = aa;
                                g.agent.critic_arch = ca;
                                g.agent.steps_per_episode = st;
                                g.reward = {pen.kind, pen.multiplier};
                                g.label = "alr" + detail::num(alr) + "_clr" + detail::num(clr) + "_ep" +
                                          std::to_string(ep) + "_a" + detail::join_arch(aa, 'x') + "_c" +
                                          detail::join_arch(ca, 'x') + "_st" + std::to_string(st) + "_" +
                                          to_string(pen.kind) + detail::num(pen.multiplier);
                                out.push_back(std::move(g));
                            }
    return out;
}

inline std::vector<ResultRow> read_result_rows(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("results csv: empty input");
    std::vector<ResultRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != 10) throw std::runtime_error("results csv: row " + std::to_string(lineno) + " needs 10 cells");
        ResultRow r;
        r.strategy = cells[0];
        r.lambda = std::stod(cells[1]);
        r.rebalance_steps = std::stoi(cells[2]);
        r.n_paths = std::stoul(cells[3]);
        r.stats = {std::stod(cells[4]), std::stod(cells[5])};
        r.seed = std::stoull(cells[6]);
        r.status = cells[7];
        r.config_hash = cells[8];
        r.version = cells[9];
        rows.push_back(r);
    }
    return rows;
}

inline std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_results_header(os);
    for (const auto& r : rows) write_result_row(os, r);
    return os.str();
}

/// Writes only when the content differs, so reruns leave finished files untouched.
inline bool write_if_changed(const fs::path& path, const std::string& content) {
    if (fs::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        const std::string old((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (old == content) return false;
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    return true;
}

/// Completed point keys, one per line.
class Manifest {
public:
    explicit Manifest(fs::path path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) done_.insert(line);
    }
    bool contains(const std::string& key) const { return done_.count(key) > 0; }
    void add(const std::string& key) {
        if (!done_.insert(key).second) return;
        fs::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app);
        out << key << '\n';
    }

private:
    fs::path path_;
    std::set<std::string> done_;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::string report;
    std::size_t executed = 0;
    std::size_t skipped = 0;
    fs::path results_file;
    fs::path report_file;
};

/// Point-level evaluation plan shared by all grid experiments.
struct ExperimentPlan {
    std::vector<GridPoint> points;
    std::vector<int> test_steps;
    std::vector<double> lambdas;
    std::string title;
};

namespace detail {

inline std::vector<ResultRow> load_or_run(Manifest& manifest, const std::string& key, const fs::path& rows_file,
                                          std::size_t& executed, std::size_t& skipped,
                                          const std::function<std::vector<ResultRow>()>& run) {
    if (manifest.contains(key) && fs::exists(rows_file)) {
        std::ifstream in(rows_file);
        ++skipped;
        return read_result_rows(in);
    }
    auto rows = run();
    write_if_changed(rows_file, rows_to_csv(rows));
    manifest.add(key);
    ++executed;
    return rows;
}

inline std::string plan_report(const ExperimentPlan& plan, const std::vector<ResultRow>& rows, bool multi_seed) {
    std::ostringstream os;
    os << plan.title << '\n';
    for (int steps : plan.test_steps) {
        std::vector<NamedRecord> recs;
        for (const auto& r : rows) {
            if (r.rebalance_steps != steps) continue;
            std::string name = r.strategy;
            if (multi_seed && r.strategy != "BS Delta") name += " seed" + std::to_string(r.seed);
            if (r.status != "ok") name += " [" + r.status + "]";
            recs.push_back({name, r.lambda, r.rebalance_steps, r.stats});
        }
        if (recs.empty()) continue;
        os << "\nTest rebalance steps: " << steps << '\n' << compare_report(recs);
    }
    return os.str();
}

}  // namespace detail

/// Trains every grid point for every seed, evaluates each agent on every test grid and lambda,
/// and writes <dir>/<experiment>_results.csv plus an aligned report. Completed points are
/// recorded in a manifest and skipped on rerun.
inline ExperimentResult run_plan(const RunConfig& c, const ExperimentPlan& plan, std::ostream* log = nullptr) {
    const fs::path dir = c.output.dir;
    const fs::path exp_dir = dir / c.output.experiment;
    fs::create_directories(exp_dir);
    Manifest manifest(exp_dir / "manifest.txt");
    const std::string hash = config_hash(c);

    std::shared_ptr<const Pricer> pricer;
    auto get_pricer = [&] {
        if (!pricer) pricer = make_pricer(c);
        return pricer;
    };
    std::map<int, PathSet> test_paths;
    auto get_paths = [&](int steps) -> const PathSet& {
        auto it = test_paths.find(steps);
        if (it == test_paths.end()) it = test_paths.emplace(steps, make_test_paths(c, steps)).first;
        return it->second;
    };

    ExperimentResult res;
    for (int steps : plan.test_steps) {
        const std::string key = "bs_delta/" + std::to_string(steps);
        auto rows = detail::load_or_run(manifest, key, exp_dir / "bs_delta" / (std::to_string(steps) + ".rows.csv"),
                                        res.executed, res.skipped, [&] {
            std::vector<ResultRow> out;
            const Strategy bs = Strategy::bs_delta(benchmark_sigma(c.market), c.market.r);
            for (double lam : plan.lambdas) {
                const PnLRecord rec = run_hedge_test(bs, get_paths(steps), *get_pricer(), hedge_test_config(c.test, lam));
                out.push_back({bs.name, lam, steps, c.test.paths, rec.stats, c.test.seed, "ok", hash, kVersion});
            }
            return out;
        });
        res.rows.insert(res.rows.end(), rows.begin(), rows.end());
    }

    for (const auto& point : plan.points)
        for (std::uint64_t seed : c.sweep.seeds) {
            const std::string key = point.label + "/" + std::to_string(seed);
            const fs::path point_dir = exp_dir / point.label;
            auto rows = detail::load_or_run(manifest, key, point_dir / (std::to_string(seed) + ".rows.csv"), res.executed,
                                            res.skipped, [&] {
                AgentConfig a = point.agent;
                a.seed = seed;
                if (log) *log << "train " << key << std::endl;
                const TrainResult tr = train_agent(c, a, point.reward, get_pricer());
                fs::create_directories(point_dir);
                std::ofstream(point_dir / (std::to_string(seed) + ".agent.json")) << to_json(tr.agent).dump(1);
                {
                    std::ofstream tl(point_dir / (std::to_string(seed) + ".train.csv"));
                    write_training_log(tl, tr.log);
                }
                std::vector<ResultRow> out;
                const auto agent = std::make_shared<const TrainedAgent>(tr.agent);
                for (int steps : plan.test_steps)
                    for (double lam : plan.lambdas) {
                        ResultRow r{"DRL " + point.label, lam, steps, c.test.paths, {}, seed, "ok", hash, kVersion};
                        if (tr.diverged) {
                            r.status = "diverged";
                            r.stats = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
                        } else {
                            r.stats = run_hedge_test(Strategy::from_agent(agent), get_paths(steps), *get_pricer(),
                                                     hedge_test_config(c.test, lam)).stats;
                        }
                        out.push_back(r);
                    }
                if (log && tr.diverged) *log << "diverged " << key << ": " << tr.divergence_report << std::endl;
                return out;
            });
            res.rows.insert(res.rows.end(), rows.begin(), rows.end());
        }

    res.results_file = dir / (c.output.experiment + "_results.csv");
    res.report_file = dir / (c.output.experiment + "_report.txt");
    res.report = detail::plan_report(plan, res.rows, c.sweep.seeds.size() > 1);
    write_if_changed(res.results_file, rows_to_csv(res.rows));
    write_if_changed(res.report_file, res.report);
    return res;
}

inline ExperimentResult run_sweep(const RunConfig& c, std::ostream* log = nullptr) {
    return run_plan(c, {enumerate_grid(c), c.test.steps, c.test.lambdas, "Hyperparameter sweep: final P&L mean and SD"}, log);
}

inline ExperimentResult run_step_experiment(RunConfig c, const std::vector<int>& train_steps,
                                            const std::vector<int>& test_steps, std::ostream* log = nullptr) {
    c.sweep.train_steps = train_steps;
    c.test.steps = test_steps;
    return run_plan(c, {enumerate_grid(c), test_steps, c.test.lambdas, "Training step vs testing step combinations"}, log);
}

/// Linear and quadratic training penalties; testing always charges lambda |trade| s.
inline std::vector<PenaltySetting> default_penalty_menu() {
    return {{PenaltyKind::linear, 0.001},    {PenaltyKind::linear, 0.005},    {PenaltyKind::linear, 0.01},
            {PenaltyKind::linear, 0.03},     {PenaltyKind::quadratic, 0.001}, {PenaltyKind::quadratic, 0.005},
            {PenaltyKind::quadratic, 0.01}};
}

inline ExperimentResult run_penalty_experiment(RunConfig c, const std::vector<PenaltySetting>& penalties,
                                               std::ostream* log = nullptr) {
    c.sweep.penalties = penalties;
    return run_plan(c, {enumerate_grid(c), c.test.steps, c.test.lambdas, "Training penalty functions"}, log);
}

}  // namespace hedgelab
