// Command-line front end: one subcommand per workflow.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hedgelab/calibration.hpp"
#include "hedgelab/config.hpp"
#include "hedgelab/eval.hpp"
#include "hedgelab/weekly.hpp"
#include "hedgelab/workflow.hpp"

using namespace hedgelab;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "INI configuration file");
    cmd->add_option("--set", c.overrides, "override as section.key=value (repeatable)");
}

RunConfig load(const Common& c) { return load_config(c.config, c.overrides); }

void print_experiment(const ExperimentResult& r) {
    std::cout << r.report << "\nexecuted " << r.executed << " points, reused " << r.skipped << "\nresults: "
              << r.results_file.string() << "\nreport: " << r.report_file.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"American put hedging with deep reinforcement learning"};
    app.require_subcommand(1);

    Common simulate_o, train_o, eval_o, sweep_o, steps_o, penalty_o, cal_o, weekly_o;

    auto* simulate = app.add_subcommand("simulate", "simulate market paths to CSV");
    add_common(simulate, simulate_o);
    std::string sim_out = "paths.csv";
    int sim_steps = 0;
    simulate->add_option("--out", sim_out, "output CSV");
    simulate->add_option("--steps", sim_steps, "steps per path (default: first test.steps)");

    auto* price = app.add_subcommand("price", "price an American put");
    std::string model = "gbm", method = "tree";
    double s = 100, k = 100, sigma = 0.2, r = 0.05, t = 1.0, nu = 0.5, rho = -0.5;
    int tree_steps = 2000;
    price->add_option("--model", model, "gbm or sabr")->check(CLI::IsMember({"gbm", "sabr"}));
    price->add_option("--method", method, "tree, chebyshev or bs (European)")->check(CLI::IsMember({"tree", "chebyshev", "bs"}));
    price->add_option("--s", s, "spot");
    price->add_option("--k", k, "strike");
    price->add_option("--sigma", sigma, "volatility (sigma0 under sabr)");
    price->add_option("--r", r, "risk-free rate");
    price->add_option("--t", t, "maturity in years");
    price->add_option("--nu", nu, "vol of vol (sabr)");
    price->add_option("--rho", rho, "correlation (sabr)");
    price->add_option("--tree-steps", tree_steps, "binomial steps");

    auto* train_cmd = app.add_subcommand("train", "train one agent");
    add_common(train_cmd, train_o);
    std::string agent_out = "agent.json", log_out = "training_log.csv";
    train_cmd->add_option("--out", agent_out, "agent JSON");
    train_cmd->add_option("--log", log_out, "training log CSV");

    auto* evaluate = app.add_subcommand("evaluate", "test an agent against BS Delta");
    add_common(evaluate, eval_o);
    std::string agent_in, per_path_out;
    evaluate->add_option("--agent", agent_in, "agent JSON (omit for BS Delta only)");
    evaluate->add_option("--per-path", per_path_out, "per-path P&L CSV for the agent at the first lambda");

    auto* sweep = app.add_subcommand("sweep", "hyperparameter grid");
    add_common(sweep, sweep_o);
    auto* steps = app.add_subcommand("steps", "training step vs testing step grid");
    add_common(steps, steps_o);
    auto* penalty = app.add_subcommand("penalty", "training penalty menu");
    add_common(penalty, penalty_o);

    auto* calibrate_cmd = app.add_subcommand("calibrate", "fit the stochastic volatility model to quotes");
    add_common(calibrate_cmd, cal_o);
    std::string quotes_in, cal_out = "calibration.json";
    calibrate_cmd->add_option("--quotes", quotes_in, "quotes CSV")->required();
    calibrate_cmd->add_option("--out", cal_out, "result JSON");

    auto* weekly = app.add_subcommand("weekly", "weekly re-calibration workflow");
    add_common(weekly, weekly_o);
    bool synthetic = false;
    weekly->add_flag("--synthetic", synthetic, "generate model quotes for every schedule date first");

    if (argc < 2) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*simulate) {
            const RunConfig c = load(simulate_o);
            const PathSet set = make_test_paths(c, sim_steps > 0 ? sim_steps : c.test.steps.front());
            std::ofstream out(sim_out);
            write_paths_csv(out, set);
            std::cout << "wrote " << set.n_paths() << " paths to " << sim_out << '\n';
        } else if (*price) {
            const OptionSpec spec{k, t, method == "bs" ? ExerciseStyle::european : ExerciseStyle::american};
            double v = 0.0;
            if (method == "bs") {
                v = bs_put_price(s, spec, sigma, r, t);
            } else if (method == "tree") {
                if (model != "gbm") throw std::invalid_argument("the tree supports gbm only");
                v = build_tree(spec, s, sigma, r, tree_steps).root();
            } else {
                const PricingModel m = model == "gbm" ? PricingModel{GBMParams{s, r, sigma, r}}
                                                      : PricingModel{SABRParams{s, sigma, nu, rho, r, r}};
                const ValueSurface surf = backward_induce(m, spec, ChebSettings{}, 7);
                v = query_price(surf, s, model == "gbm" ? std::nullopt : std::optional<double>(sigma), 0.0);
            }
            std::printf("%.6f\n", v);
        } else if (*train_cmd) {
            const RunConfig c = load(train_o);
            const TrainResult tr = train_agent(c, c.agent, c.reward, make_pricer(c));
            std::ofstream(agent_out) << to_json(tr.agent).dump(1);
            std::ofstream lg(log_out);
            write_training_log(lg, tr.log);
            std::cout << (tr.diverged ? "diverged: " + tr.divergence_report : "trained") << "; agent " << agent_out << '\n';
            if (tr.diverged) return 3;
        } else if (*evaluate) {
            const RunConfig c = load(eval_o);
            const auto pricer = make_pricer(c);
            std::vector<Strategy> strategies{Strategy::bs_delta(benchmark_sigma(c.market), c.market.r)};
            if (!agent_in.empty()) {
                std::ifstream in(agent_in);
                if (!in) throw std::runtime_error("cannot open agent '" + agent_in + "'");
                strategies.push_back(Strategy::from_agent(std::make_shared<const TrainedAgent>(agent_from_json(nlohmann::json::parse(in)))));
            }
            std::vector<NamedRecord> recs;
            const fs::path results = fs::path(c.output.dir) / (c.output.experiment + "_results.csv");
            fs::create_directories(results.parent_path());
            std::ofstream csv(results);
            write_results_header(csv);
            for (int n : c.test.steps) {
                const PathSet paths = make_test_paths(c, n);
                for (const auto& st : strategies)
                    for (double lam : c.test.lambdas) {
                        const PnLRecord rec = run_hedge_test(st, paths, *pricer, hedge_test_config(c.test, lam));
                        recs.push_back({st.name + (c.test.steps.size() > 1 ? " @" + std::to_string(n) : ""), lam, n, rec.stats});
                        write_result_row(csv, {st.name, lam, n, c.test.paths, rec.stats, c.test.seed, "ok", config_hash(c), kVersion});
                        if (!per_path_out.empty() && st.kind == StrategyKind::agent && lam == c.test.lambdas.front()) {
                            std::ofstream pp(per_path_out);
                            write_per_path(pp, rec);
                        }
                    }
            }
            std::cout << compare_report(recs) << "results: " << results.string() << '\n';
        } else if (*sweep) {
            print_experiment(run_sweep(load(sweep_o), &std::cerr));
        } else if (*steps) {
            const RunConfig c = load(steps_o);
            const std::vector<int> train_steps = c.sweep.train_steps.empty() ? std::vector<int>{10, 25, 50} : c.sweep.train_steps;
            print_experiment(run_step_experiment(c, train_steps, c.test.steps, &std::cerr));
        } else if (*penalty) {
            const RunConfig c = load(penalty_o);
            print_experiment(run_penalty_experiment(c, c.sweep.penalties.empty() ? default_penalty_menu() : c.sweep.penalties, &std::cerr));
        } else if (*calibrate_cmd) {
            const RunConfig c = load(cal_o);
            std::ifstream in(quotes_in);
            if (!in) throw std::runtime_error("cannot open quotes '" + quotes_in + "'");
            const auto quotes = read_quotes_csv(in);
            CalibrationSettings settings;
            settings.starts = c.weekly.calibration_starts;
            const SABRParams guess{1.0, c.weekly.guess_sigma0, c.weekly.guess_nu, c.weekly.guess_rho, 0.0, 0.0};
            const CalibrationResult res = calibrate(quotes, guess, settings);
            std::ofstream(cal_out) << to_json(res).dump(1);
            std::printf("sigma0=%.6f nu=%.6f rho=%.6f objective=%.3e converged=%d\n", res.params.sigma0, res.params.nu,
                        res.params.rho, res.objective, res.converged ? 1 : 0);
        } else if (*weekly) {
            std::vector<std::string> overrides = weekly_o.overrides;
            if (synthetic) overrides.push_back("weekly.synthetic=true");
            const RunConfig c = load_config(weekly_o.config, overrides);
            WeeklyFiles files;
            const WeeklyReport rep = run_weekly_all(c, &files, &std::cerr);
            std::cout << weekly_summary_table(rep) << "holding continuity: "
                      << (check_holding_continuity(rep) ? "ok" : "violated") << "\nsummary: " << files.summary.string()
                      << "\ndetail: " << files.detail.string() << "\nlog: " << files.log.string() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
