#pragma once

// Episodic hedging environment for a short American put.
//
// The hedger holds a in [-1, 0] shares per option. Each step revalues the
// option with a pluggable pricer, books the hedge error of the
// self-financing increment and charges a training-time turnover penalty.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgelab/analytic.hpp"
#include "hedgelab/chebyshev.hpp"

namespace hedgelab {

/// Option value and exercise rule as functions of (s, sigma, t), t measured from the pricer's origin.
class Pricer {
public:
    virtual ~Pricer() = default;
    virtual const OptionSpec& spec() const = 0;
    virtual double rate() const = 0;
    virtual double price(double s, double sigma, double t) const = 0;
    virtual bool exercise(double s, double sigma, double t) const = 0;
};

class TreePricer final : public Pricer {
public:
    explicit TreePricer(BinomialTree tree) : tree_(std::move(tree)) {}
    TreePricer(const OptionSpec& spec, const GBMParams& model, int n_steps)
        : tree_(build_tree(spec, model.s0, model.sigma, model.r, n_steps)) {}

    const OptionSpec& spec() const override { return tree_.spec; }
    double rate() const override { return tree_.r; }
    double price(double s, double, double t) const override {
        if (t >= tree_.spec.maturity) return tree_.spec.intrinsic(s);
        return std::max(tree_price_at(tree_, s, t), tree_.spec.intrinsic(s));
    }
    // Interpolating between exercised nodes reproduces the (linear) intrinsic value exactly,
    // so "value equals intrinsic" identifies the exercise region up to one node spacing.
    bool exercise(double s, double, double t) const override {
        if (tree_.spec.style != ExerciseStyle::american) return false;
        const double intrinsic = tree_.spec.intrinsic(s);
        if (!(intrinsic > 0.0)) return false;
        if (t >= tree_.spec.maturity) return true;
        return tree_price_at(tree_, s, t) <= intrinsic + 1e-10 * tree_.spec.strike;
    }
    const BinomialTree& tree() const { return tree_; }

private:
    BinomialTree tree_;
};

class SurfacePricer final : public Pricer {
public:
    explicit SurfacePricer(ValueSurface surface) : surf_(std::move(surface)) {}

    const OptionSpec& spec() const override { return surf_.spec; }
    double rate() const override { return surf_.rate(); }
    double price(double s, double sigma, double t) const override {
        return query_price(surf_, s, vol_arg(sigma), std::min(t, surf_.maturity()));
    }
    bool exercise(double s, double sigma, double t) const override {
        return surface_exercise(surf_, s, vol_arg(sigma), std::min(t, surf_.maturity()));
    }
    const ValueSurface& surface() const { return surf_; }

private:
    std::optional<double> vol_arg(double sigma) const {
        return surf_.two_dimensional() ? std::optional<double>(surf_.grid.axes[1].clamp(sigma)) : std::nullopt;
    }
    ValueSurface surf_;
};

/// European Black-Scholes put; never exercised early.
class BlackScholesPricer final : public Pricer {
public:
    BlackScholesPricer(const OptionSpec& spec, double sigma, double r) : spec_(spec), sigma_(sigma), r_(r) {
        spec_.style = ExerciseStyle::european;
    }
    const OptionSpec& spec() const override { return spec_; }
    double rate() const override { return r_; }
    double price(double s, double, double t) const override {
        return bs_put_price(s, spec_, sigma_, r_, std::max(spec_.maturity - t, 0.0));
    }
    bool exercise(double, double, double) const override { return false; }

private:
    OptionSpec spec_;
    double sigma_;
    double r_;
};

inline bool check_exercise(const Pricer& pricer, double s, double sigma, double t) {
    return pricer.exercise(s, sigma, t);
}

enum class PenaltyKind { linear, quadratic };

struct RewardConfig {
    PenaltyKind kind = PenaltyKind::quadratic;
    double multiplier = 0.005;

    void validate() const {
        if (!(multiplier >= 0.0) || !std::isfinite(multiplier))
            throw std::invalid_argument("RewardConfig: multiplier must be non-negative");
    }
};

inline std::string to_string(PenaltyKind k) { return k == PenaltyKind::linear ? "linear" : "quadratic"; }
inline PenaltyKind penalty_kind_from(const std::string& s) {
    if (s == "linear") return PenaltyKind::linear;
    if (s == "quadratic") return PenaltyKind::quadratic;
    throw std::invalid_argument("unknown penalty kind '" + s + "'");
}

inline void check_action(double a, const char* who) {
    if (!(a >= -1.0 && a <= 0.0)) throw std::invalid_argument(std::string(who) + ": action outside [-1, 0]");
}

inline double tc_penalty(const RewardConfig& cfg, double a_new, double a_prev, double s) {
    check_action(a_new, "tc_penalty");
    check_action(a_prev, "tc_penalty");
    if (!(s > 0.0)) throw std::invalid_argument("tc_penalty: price must be positive");
    const double trade = a_new - a_prev;
    return cfg.kind == PenaltyKind::linear ? cfg.multiplier * std::abs(trade) * s
                                           : cfg.multiplier * trade * trade * s;
}

struct HedgeState {
    double s = 0.0;
    double tau = 0.0;
    double holding = 0.0;
    double sigma = 0.0;  // SABR only; not shown to the agent
};

using Observation = std::array<double, 3>;

/// Network input: (s / K, tau / T, holding).
inline Observation observe(const HedgeState& st, const OptionSpec& spec) {
    return {st.s / spec.strike, st.tau / spec.maturity, st.holding};
}

struct EpisodeConfig {
    std::shared_ptr<const Pricer> pricer;
    int steps = 25;
    double start_time = 0.0;
    double horizon = 0.0;  // 0 means "to maturity"
    RewardConfig reward;
    bool early_exercise = true;

    double effective_horizon() const {
        return horizon > 0.0 ? horizon : pricer->spec().maturity - start_time;
    }
    void validate() const {
        if (!pricer) throw std::invalid_argument("EpisodeConfig: pricer missing");
        if (steps < 1) throw std::invalid_argument("EpisodeConfig: steps must be >= 1");
        if (start_time < 0.0) throw std::invalid_argument("EpisodeConfig: negative start time");
        const double h = effective_horizon();
        if (!(h > 0.0) || start_time + h > pricer->spec().maturity * (1.0 + 1e-12))
            throw std::invalid_argument("EpisodeConfig: horizon must end on or before maturity");
        reward.validate();
    }
    double time_at(int i) const { return start_time + effective_horizon() * i / steps; }
};

struct EpisodePath {
    std::vector<double> prices;
    std::vector<double> vols;  // empty under GBM
};

struct StepInfo {
    double hedge_error = 0.0;
    double penalty = 0.0;
    double option_before = 0.0;
    double option_after = 0.0;
    bool exercised = false;
};

struct StepResult {
    HedgeState next;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

class HedgeEnv {
public:
    explicit HedgeEnv(EpisodeConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const EpisodeConfig& config() const { return cfg_; }
    const HedgeState& state() const { return state_; }
    int step_index() const { return index_; }
    bool done() const { return done_; }

    HedgeState reset(EpisodePath path) {
        if (path.prices.size() != static_cast<std::size_t>(cfg_.steps) + 1)
            throw std::invalid_argument("HedgeEnv::reset: path length must be steps + 1");
        if (!path.vols.empty() && path.vols.size() != path.prices.size())
            throw std::invalid_argument("HedgeEnv::reset: vol path length mismatch");
        path_ = std::move(path);
        index_ = 0;
        done_ = false;
        state_ = {path_.prices[0], maturity() - cfg_.time_at(0), 0.0, vol_at(0)};
        option_value_ = cfg_.pricer->price(state_.s, state_.sigma, cfg_.time_at(0));
        return state_;
    }

    StepResult step(double action) {
        if (done_) throw std::logic_error("HedgeEnv::step: episode already finished");
        if (index_ >= cfg_.steps) throw std::out_of_range("HedgeEnv::step: step index out of range");
        check_action(action, "HedgeEnv::step");
        const int next = index_ + 1;
        const double t1 = cfg_.time_at(next);
        const double s1 = path_.prices[next];
        const double v1 = vol_at(next);
        const auto& pricer = *cfg_.pricer;

        StepInfo info;
        info.option_before = option_value_;
        const bool at_maturity = t1 >= maturity() * (1.0 - 1e-12);
        if (at_maturity) {
            info.option_after = pricer.spec().intrinsic(s1);
        } else if (cfg_.early_exercise && pricer.exercise(s1, v1, t1)) {
            info.option_after = pricer.spec().intrinsic(s1);
            info.exercised = true;
        } else {
            info.option_after = pricer.price(s1, v1, t1);
        }
        info.hedge_error = -(info.option_after - info.option_before) + action * (s1 - state_.s);
        info.penalty = tc_penalty(cfg_.reward, action, state_.holding, state_.s);

        StepResult out;
        out.reward = -std::abs(info.hedge_error) - info.penalty;
        out.info = info;
        index_ = next;
        done_ = next == cfg_.steps || info.exercised;
        out.done = done_;
        state_ = {s1, std::max(maturity() - t1, 0.0), action, v1};
        out.next = state_;
        option_value_ = info.option_after;
        return out;
    }

private:
    double maturity() const { return cfg_.pricer->spec().maturity; }
    double vol_at(int i) const { return path_.vols.empty() ? 0.0 : path_.vols[static_cast<std::size_t>(i)]; }

    EpisodeConfig cfg_;
    EpisodePath path_;
    HedgeState state_;
    double option_value_ = 0.0;
    int index_ = 0;
    bool done_ = true;
};

}  // namespace hedgelab
