#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hedgelab/workflow.hpp"

using namespace hedgelab;

namespace {

RunConfig tiny_config(const std::string& dir) {
    RunConfig c;
    for (const char* o : {"agent.episodes=4", "agent.steps=5", "agent.warmup=8", "agent.batch=8", "agent.actor_arch=8",
                          "agent.critic_arch=8", "test.paths=40", "test.steps=10", "test.lambdas=0.01",
                          "pricer.tree_steps=100", "output.experiment=tiny"})
        apply_override(c, o);
    c.output.dir = dir;
    validate(c);
    return c;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("hedgelab_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST(Grid, EmptyAxesGiveTheBasePoint) {
    const RunConfig c;
    const auto g = enumerate_grid(c);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_DOUBLE_EQ(g[0].agent.actor_lr, c.agent.actor_lr);
    EXPECT_EQ(g[0].reward.kind, c.reward.kind);
}

TEST(Grid, CartesianProductInFixedOrder) {
    RunConfig c;
    apply_override(c, "sweep.actor_lr=1e-6,5e-6,1e-5");
    apply_override(c, "sweep.critic_lr=1e-4,5e-4,1e-3");
    apply_override(c, "sweep.episodes=1000,2500,5000");
    const auto g = enumerate_grid(c);
    ASSERT_EQ(g.size(), 27u);
    std::set<std::string> labels;
    for (const auto& p : g) labels.insert(p.label);
    EXPECT_EQ(labels.size(), 27u);
    EXPECT_DOUBLE_EQ(g.front().agent.actor_lr, 1e-6);
    EXPECT_EQ(g.front().agent.episodes, 1000);
    EXPECT_DOUBLE_EQ(g.back().agent.actor_lr, 1e-5);
    EXPECT_EQ(g.back().agent.episodes, 5000);
    // episodes vary fastest among the three axes
    EXPECT_EQ(g[1].agent.episodes, 2500);
    EXPECT_DOUBLE_EQ(g[1].agent.critic_lr, 1e-4);
}

TEST(Grid, PenaltyMenuHasFourLinearAndThreeQuadratic) {
    int linear = 0, quadratic = 0;
    for (const auto& p : default_penalty_menu()) (p.kind == PenaltyKind::linear ? linear : quadratic)++;
    EXPECT_EQ(linear, 4);
    EXPECT_EQ(quadratic, 3);
    RunConfig c;
    c.sweep.penalties = default_penalty_menu();
    EXPECT_EQ(enumerate_grid(c).size(), 7u);
}

TEST(Results, RowsRoundTripThroughCsv) {
    const std::vector<ResultRow> rows{{"BS Delta", 0.01, 104, 100, {-0.5, 1.25}, 42, "ok", "abc", kVersion},
                                      {"DRL x", 0.03, 52, 100, {0.1, 2.0}, 1, "diverged", "abc", kVersion}};
    std::istringstream in(rows_to_csv(rows));
    const auto back = read_result_rows(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].strategy, "DRL x");
    EXPECT_DOUBLE_EQ(back[0].stats.mean, -0.5);
    EXPECT_DOUBLE_EQ(back[0].stats.sd, 1.25);
    EXPECT_EQ(back[1].rebalance_steps, 52);
    EXPECT_EQ(back[1].status, "diverged");
}

TEST(Experiment, RerunSkipsCompletedPoints) {
    const fs::path dir = fresh_dir("rerun");
    RunConfig c = tiny_config(dir.string());
    apply_override(c, "sweep.actor_lr=1e-5,1e-4");
    const ExperimentResult first = run_sweep(c);
    // one benchmark entry per test grid plus one per point and seed
    EXPECT_EQ(first.executed, 3u);
    EXPECT_EQ(first.skipped, 0u);
    EXPECT_EQ(first.rows.size(), 3u);
    ASSERT_TRUE(fs::exists(first.results_file));
    const auto stamp = fs::last_write_time(first.results_file);

    const ExperimentResult second = run_sweep(c);
    EXPECT_EQ(second.executed, 0u);
    EXPECT_EQ(second.skipped, 3u);
    ASSERT_EQ(second.rows.size(), first.rows.size());
    for (std::size_t i = 0; i < first.rows.size(); ++i) {
        EXPECT_EQ(second.rows[i].strategy, first.rows[i].strategy);
        EXPECT_NEAR(second.rows[i].stats.mean, first.rows[i].stats.mean, 1e-9 * (1 + std::abs(first.rows[i].stats.mean)));
    }
    EXPECT_EQ(fs::last_write_time(first.results_file), stamp);

    // a new grid point runs only itself
    apply_override(c, "sweep.actor_lr=1e-5,1e-4,1e-3");
    const ExperimentResult third = run_sweep(c);
    EXPECT_EQ(third.executed, 1u);
    EXPECT_EQ(third.skipped, 3u);
    fs::remove_all(dir);
}

TEST(Experiment, StepGridEvaluatesEveryPair) {
    const fs::path dir = fresh_dir("steps");
    const RunConfig c = tiny_config(dir.string());
    const ExperimentResult r = run_step_experiment(c, {5, 10}, {10, 20});
    // benchmark on two test grids plus two trained agents on two test grids
    EXPECT_EQ(r.rows.size(), 2u + 4u);
    for (const auto& row : r.rows) {
        EXPECT_TRUE(row.rebalance_steps == 10 || row.rebalance_steps == 20);
        EXPECT_EQ(row.config_hash.size(), 16u);
        EXPECT_EQ(row.version, kVersion);
    }
    EXPECT_NE(r.report.find("BS Delta"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Experiment, SameSeedsReproduceResults) {
    const fs::path d1 = fresh_dir("repro1"), d2 = fresh_dir("repro2");
    const ExperimentResult a = run_sweep(tiny_config(d1.string()));
    const ExperimentResult b = run_sweep(tiny_config(d2.string()));
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.rows[i].stats.mean, b.rows[i].stats.mean);
        EXPECT_DOUBLE_EQ(a.rows[i].stats.sd, b.rows[i].stats.sd);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}
