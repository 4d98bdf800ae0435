// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the exit status is non-zero when any run criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "checks.hpp"
#include "hedgelab/calibration.hpp"
#include "hedgelab/weekly.hpp"
#include "hedgelab/workflow.hpp"
#include "oracles.hpp"

using namespace hedgelab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool pass, const std::string& name, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// base case shared by the hedging criteria: GBM, tree pricer, 10^4 test paths
const RunConfig& base() {
    static const RunConfig c = [] {
        RunConfig r;
        validate(r);
        return r;
    }();
    return c;
}

std::shared_ptr<const Pricer> base_pricer() {
    static const auto p = make_pricer(base());
    return p;
}

const PathSet& test_paths(int steps) {
    static std::map<int, PathSet> cache;
    auto it = cache.find(steps);
    if (it == cache.end()) it = cache.emplace(steps, make_test_paths(base(), steps)).first;
    return it->second;
}

PnLStats run_bs(int steps, double lambda) {
    const RunConfig& c = base();
    return run_hedge_test(Strategy::bs_delta(benchmark_sigma(c.market), c.market.r), test_paths(steps), *base_pricer(),
                          hedge_test_config(c.test, lambda))
        .stats;
}

struct AgentRun {
    bool diverged = false;
    PnLStats at1, at3;
    double seconds = 0.0;
};

AgentRun train_and_test(AgentConfig a, const RewardConfig& reward) {
    const RunConfig& c = base();
    const auto t0 = Clock::now();
    const TrainResult tr = train_agent(c, a, reward, base_pricer());
    AgentRun out;
    out.seconds = seconds_since(t0);
    out.diverged = tr.diverged;
    if (tr.diverged) return out;
    const auto agent = std::make_shared<const TrainedAgent>(tr.agent);
    const int steps = c.test.steps.front();
    out.at1 = run_hedge_test(Strategy::from_agent(agent), test_paths(steps), *base_pricer(), hedge_test_config(c.test, 0.01)).stats;
    out.at3 = run_hedge_test(Strategy::from_agent(agent), test_paths(steps), *base_pricer(), hedge_test_config(c.test, 0.03)).stats;
    return out;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

// quadratic base-case agents, shared by criteria 4, 5 and 6
const std::map<std::uint64_t, AgentRun>& base_agents() {
    static const std::map<std::uint64_t, AgentRun> runs = [] {
        std::map<std::uint64_t, AgentRun> r;
        for (auto seed : kSeeds) {
            AgentConfig a = base().agent;
            a.seed = seed;
            r[seed] = train_and_test(a, base().reward);
            std::fprintf(stderr, "base seed %llu: %.1fs\n", static_cast<unsigned long long>(seed), r[seed].seconds);
        }
        return r;
    }();
    return runs;
}

void bs_benchmark() {
    const auto t0 = Clock::now();
    struct Cell {
        int steps;
        double lambda, mean, sd;
    };
    const std::vector<Cell> table{{52, 0.01, -2.34, 1.21},  {104, 0.01, -3.16, 1.21}, {252, 0.01, -4.71, 1.71},
                                  {52, 0.03, -6.10, 2.36},  {104, 0.03, -8.59, 3.37}, {252, 0.03, -13.14, 5.49}};
    double worst = 0.0;
    std::string cells;
    for (const auto& cell : table) {
        const PnLStats s = run_bs(cell.steps, cell.lambda);
        worst = std::max({worst, std::abs(s.mean - cell.mean), std::abs(s.sd - cell.sd)});
        cells += fmt(" %d@%.0f%%=(%.2f,%.2f)", cell.steps, cell.lambda * 100, s.mean, s.sd);
    }
    const double secs = seconds_since(t0);
    verdict(1, worst <= 0.35 && secs < 60, "BS Delta benchmark",
            fmt("max deviation %.3f (tol 0.35), %.1fs;", worst, secs) + cells);
}

void zero_cost() {
    const PnLStats s = run_bs(252, 0.0);
    const double se = s.sd / std::sqrt(static_cast<double>(base().test.paths));
    verdict(2, std::abs(s.mean) <= 3 * se, "zero-cost unbiasedness", fmt("mean %.4f, 3 SE %.4f", s.mean, 3 * se));
}

void pricing_oracle() {
    const OptionSpec spec = base().market.option();
    const GBMParams g = base().market.gbm();
    const BinomialTree tree = build_tree(spec, g.s0, g.sigma, g.r, 2000);
    const ValueSurface surf = backward_induce(PricingModel{g}, spec, ChebSettings{}, 42);
    const double band = std::exp(g.sigma * std::sqrt(spec.maturity));
    Philox rng(7, 0);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double s = g.s0 / band + (g.s0 * band - g.s0 / band) * rng.uniform();
        const double t = spec.maturity * (0.05 + 0.70 * rng.uniform());
        worst = std::max(worst, std::abs(query_price(surf, s, std::nullopt, t) / tree_price_at(tree, s, t) - 1.0));
    }
    const double root = query_price(surf, g.s0, std::nullopt, 0.0);
    const double root_err = std::abs(root / tree.root() - 1.0);
    const OptionSpec euro{spec.strike, spec.maturity, ExerciseStyle::european};
    const double eu = bs_put_price(g.s0, euro, g.sigma, g.r, spec.maturity);
    const double eu_delta = bs_put_delta(g.s0, euro, g.sigma, g.r, spec.maturity);
    const double h = 1e-3;
    const double int_price = oracle::european_put_integral(g.s0, spec.strike, g.sigma, g.r, spec.maturity);
    const double int_delta = (oracle::european_put_integral(g.s0 + h, spec.strike, g.sigma, g.r, spec.maturity) -
                              oracle::european_put_integral(g.s0 - h, spec.strike, g.sigma, g.r, spec.maturity)) / (2 * h);
    const bool anchors = std::abs(eu - 5.57) < 0.005 && std::abs(eu_delta + 0.363) < 0.0005 &&
                         std::abs(eu - int_price) < 1e-3 && std::abs(eu_delta - int_delta) < 1e-3;
    verdict(3, worst <= 0.01 && root_err <= 0.005 && root >= eu && anchors, "Chebyshev vs tree",
            fmt("max rel %.4f over 50 points, root %.4f vs tree %.4f (rel %.4f), European %.4f (integral %.4f), "
                "delta %.4f (integral %.4f)",
                worst, root, tree.root(), root_err, eu, int_price, eu_delta, int_delta));
}

void drl_beats_delta() {
    const PnLStats bs = run_bs(base().test.steps.front(), 0.03);
    int wins = 0;
    double slowest = 0.0;
    std::string detail;
    for (const auto& [seed, run] : base_agents()) {
        const bool win = !run.diverged && run.at3.mean >= bs.mean && run.at3.sd <= bs.sd;
        wins += win;
        slowest = std::max(slowest, run.seconds);
        detail += fmt(" seed%llu=(%.2f,%.2f)%s", static_cast<unsigned long long>(seed), run.at3.mean, run.at3.sd, win ? "*" : "");
    }
    verdict(4, wins >= 3 && slowest <= 600, "DRL beats Delta at 3%",
            fmt("%d of %zu seeds dominate BS (%.2f,%.2f), slowest %.0fs;", wins, kSeeds.size(), bs.mean, bs.sd, slowest) + detail);
}

void penalty_ordering() {
    bool ordered = true, blowup = true;
    std::string detail;
    for (const auto& [seed, quad] : base_agents()) {
        AgentConfig a = base().agent;
        a.seed = seed;
        const AgentRun lin = train_and_test(a, {PenaltyKind::linear, 0.03});
        const bool dom = lin.diverged || (dominates(quad.at1, lin.at1) && dominates(quad.at3, lin.at3));
        const bool big = lin.diverged || lin.at1.sd >= 3 * quad.at1.sd;
        ordered = ordered && dom;
        blowup = blowup && big;
        detail += lin.diverged ? fmt(" seed%llu linear diverged", static_cast<unsigned long long>(seed))
                               : fmt(" seed%llu 1%%: quad (%.2f,%.2f) linear (%.2f,%.2f)",
                                     static_cast<unsigned long long>(seed), quad.at1.mean, quad.at1.sd, lin.at1.mean, lin.at1.sd);
    }
    verdict(5, ordered && blowup, "quadratic beats linear 0.03",
            fmt("dominates every seed: %s, linear SD >= 3x: %s;", ordered ? "yes" : "no", blowup ? "yes" : "no") + detail);
}

void grid_corner() {
    const auto t0 = Clock::now();
    const AgentRun& base_run = base_agents().at(1);
    AgentConfig a = base().agent;
    a.seed = 1;
    a.actor_lr = 1e-6;
    a.critic_lr = 1e-4;
    a.episodes = 2500;
    const AgentRun corner = train_and_test(a, base().reward);
    const double secs = seconds_since(t0) + base_run.seconds;
    verdict(6, !corner.diverged && corner.at1.sd > base_run.at1.sd && secs <= 1800, "grid corner variance",
            fmt("corner SD %.2f vs base SD %.2f at 1%%, %.0fs", corner.at1.sd, base_run.at1.sd, secs));
}

void algebra_suites() {
    double grad = 0.0;
    for (const auto& arch : std::vector<std::vector<int>>{{32, 32}, {64, 64}, {64, 64, 64}}) {
        grad = std::max(grad, checks::gradient_check(3, arch, Head::neg_sigmoid, 3));
        grad = std::max(grad, checks::gradient_check(4, arch, Head::linear, 4));
    }
    const double soft = checks::soft_update_ratio_error(base().agent.soft_tau, 200, 9);

    double corr_gap = 0.0;
    bool corr_ok = true;
    const int n = 1000000;
    for (double rho : {-0.9, 0.0, 0.5}) {
        Philox rng(11, 0);
        std::vector<double> w(n), b(n);
        for (int i = 0; i < n; ++i) {
            const double z1 = rng.normal(), z2 = rng.normal();
            const auto inc = correlated_increments(rho, 1.0 / 252, z1, z2);
            w[i] = inc.dW;
            b[i] = inc.dB;
        }
        const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(n));
        const double gap = std::abs(checks::sample_corr(w, b) - rho);
        corr_ok = corr_ok && gap <= std::max(3 * se, 1e-12);
        corr_gap = std::max(corr_gap, gap / std::max(se, 1e-12));
    }

    const auto paths = simulate_gbm(base().market.gbm(), 300, 52, 1.0, 7);
    double tele = 0.0;
    for (bool financing : {false, true})
        for (bool charges : {false, true}) {
            HedgeTestConfig cfg;
            cfg.lambda = 0.01;
            cfg.financing = financing;
            cfg.charge_initial = charges;
            cfg.charge_unwind = charges;
            std::vector<PathTrace> traces;
            const auto rec = run_hedge_test(Strategy::bs_delta(0.2, 0.05), paths, *base_pricer(), cfg, &traces);
            for (std::size_t p = 0; p < paths.n_paths(); ++p)
                tele = std::max(tele, std::abs(telescoped_pnl(traces[p], 0.05, cfg) - rec.pnl[p]));
        }
    verdict(7, grad <= 1e-4 && soft <= 1e-9 && corr_ok && tele <= 1e-9, "gradient and algebra suites",
            fmt("backprop rel %.2e, soft-update ratio error %.1e, correlation max %.2f SE, telescoping %.1e", grad, soft,
                corr_gap, tele));
}

void calibration_round_trip() {
    const auto t0 = Clock::now();
    const CalibrationSettings settings;
    const SABRParams guess{100, 0.3, 0.3, 0.0, 0.05, 0.05};
    const std::vector<double> strikes{90, 95, 100, 105, 110};
    auto fit = [&](double sigma0, double nu, double rho) {
        const SABRParams truth{100, sigma0, nu, rho, 0.05, 0.05};
        const auto quotes = synthetic_quotes(truth, "SYN", "2023-10-16", "2024-01-19", strikes, settings.pricing);
        return calibrate(quotes, guess, settings).params;
    };
    const SABRParams a = fit(0.2, 0.5, -0.5);
    const SABRParams b = fit(0.25, 0.0, 0.0);
    const bool ok_a = std::abs(a.sigma0 - 0.2) <= 0.01 && std::abs(a.nu - 0.5) <= 0.1 && std::abs(a.rho + 0.5) <= 0.1;
    const bool ok_b = b.nu < 0.05 && std::abs(b.sigma0 - 0.25) <= 0.01;
    verdict(8, ok_a && ok_b, "calibration round trip",
            fmt("(0.2,0.5,-0.5) -> (%.4f,%.4f,%.4f); (0.25,0,0) -> (%.4f,%.4f,%.4f); %.0fs", a.sigma0, a.nu, a.rho,
                b.sigma0, b.nu, b.rho, seconds_since(t0)));
}

void weekly_workflow() {
    const auto t0 = Clock::now();
    const fs::path dir = fs::temp_directory_path() / "hedgelab_acceptance_weekly";
    fs::remove_all(dir);
    RunConfig c;
    for (const char* o : {"weekly.symbols=GE", "weekly.synthetic=true", "weekly.episodes=300", "weekly.calibration_starts=1"})
        apply_override(c, o);
    const std::string data = std::string(HEDGELAB_SOURCE_DIR) + "/data/";
    c.weekly.paths_file = data + "table_a2_paths.csv";
    c.weekly.strikes_file = data + "table2_strikes.csv";
    c.weekly.quotes_dir = (dir / "quotes").string();
    c.output.dir = dir.string();
    validate(c);
    CalibrationSettings cal;
    cal.pricing.cheb = {16, 4, 8, 200};
    WeeklyFiles files;
    const WeeklyReport r = run_weekly_all(c, &files, nullptr, cal);
    const std::string table = weekly_summary_table(r);
    bool layout = table.find("Symbol") != std::string::npos && table.find("lambda = 1.00%") != std::string::npos &&
                  table.find("lambda = 3.00%") != std::string::npos && table.find("GE") != std::string::npos;
    for (const auto& n : weekly_strategies()) layout = layout && table.find(n) != std::string::npos;
    const bool files_ok = fs::exists(files.summary) && fs::exists(files.detail) && fs::exists(files.log) && fs::exists(files.fits);
    const bool weeks = r.fits.size() == c.weekly.dates.size();
    verdict(9, layout && files_ok && weeks && check_holding_continuity(r), "weekly workflow",
            fmt("%zu weekly fits, %zu strike outcomes, continuity %s, layout %s, %.0fs", r.fits.size(), r.outcomes.size(),
                check_holding_continuity(r) ? "ok" : "violated", layout ? "ok" : "missing", seconds_since(t0)));
    fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto want = [&](int id) { return only.empty() || only.count(id) > 0; };
    const std::vector<void (*)()> criteria{bs_benchmark,     zero_cost,      pricing_oracle,
                                           drl_beats_delta,  penalty_ordering, grid_corner,
                                           algebra_suites,   calibration_round_trip, weekly_workflow};
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!want(static_cast<int>(i) + 1)) continue;
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            verdict(static_cast<int>(i) + 1, false, "criterion", std::string("threw: ") + e.what());
        }
    }
    return failures == 0 ? 0 : 1;
}
