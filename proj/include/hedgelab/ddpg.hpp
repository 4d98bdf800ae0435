#pragma once

// Deep deterministic policy gradient for the hedging environment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hedgelab/hedge_env.hpp"
#include "hedgelab/market_sim.hpp"
#include "hedgelab/mlp.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

struct AgentConfig {
    double actor_lr = 5e-6;
    double critic_lr = 5e-4;
    int episodes = 5000;
    int steps_per_episode = 25;
    std::vector<int> actor_arch{64, 64};
    std::vector<int> critic_arch{64, 64};
    double gamma = 0.99;
    double soft_tau = 0.005;
    std::size_t buffer_capacity = 100000;
    std::size_t batch_size = 64;
    std::size_t warmup = 1000;
    double noise_start = 0.1;
    double noise_end = 0.01;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(actor_lr >= 0.0) || !(critic_lr >= 0.0)) throw std::invalid_argument("AgentConfig: negative learning rate");
        if (episodes < 1 || steps_per_episode < 1) throw std::invalid_argument("AgentConfig: episodes and steps must be >= 1");
        if (actor_arch.empty() || critic_arch.empty()) throw std::invalid_argument("AgentConfig: empty architecture");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("AgentConfig: gamma outside (0, 1]");
        if (!(soft_tau > 0.0 && soft_tau <= 1.0)) throw std::invalid_argument("AgentConfig: soft_tau outside (0, 1]");
        if (batch_size < 1 || batch_size > buffer_capacity)
            throw std::invalid_argument("AgentConfig: batch size must be in [1, capacity]");
        if (noise_start < 0.0 || noise_end < 0.0) throw std::invalid_argument("AgentConfig: negative noise");
    }
};

inline nlohmann::json to_json(const AgentConfig& c) {
    return {{"actor_lr", c.actor_lr},       {"critic_lr", c.critic_lr},
            {"episodes", c.episodes},       {"steps_per_episode", c.steps_per_episode},
            {"actor_arch", c.actor_arch},   {"critic_arch", c.critic_arch},
            {"gamma", c.gamma},             {"soft_tau", c.soft_tau},
            {"buffer_capacity", c.buffer_capacity}, {"batch_size", c.batch_size},
            {"warmup", c.warmup},           {"noise_start", c.noise_start},
            {"noise_end", c.noise_end},     {"optimizer", to_string(c.optimizer)},
            {"seed", c.seed}};
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
    AgentConfig c;
    c.actor_lr = j.at("actor_lr");
    c.critic_lr = j.at("critic_lr");
    c.episodes = j.at("episodes");
    c.steps_per_episode = j.at("steps_per_episode");
    c.actor_arch = j.at("actor_arch").get<std::vector<int>>();
    c.critic_arch = j.at("critic_arch").get<std::vector<int>>();
    c.gamma = j.at("gamma");
    c.soft_tau = j.at("soft_tau");
    c.buffer_capacity = j.at("buffer_capacity");
    c.batch_size = j.at("batch_size");
    c.warmup = j.at("warmup");
    c.noise_start = j.at("noise_start");
    c.noise_end = j.at("noise_end");
    c.optimizer = optimizer_kind_from(j.at("optimizer").get<std::string>());
    c.seed = j.at("seed");
    return c;
}

struct Transition {
    Observation state;
    double action;
    double reward;
    Observation next_state;
    bool done;
};

/// Bounded FIFO; the oldest transition is overwritten once full.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        data_.reserve(std::min<std::size_t>(capacity, 1u << 16));
    }
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return data_[i]; }

    void push(const Transition& t) {
        if (data_.size() < capacity_) data_.push_back(t);
        else data_[head_] = t;
        head_ = (head_ + 1) % capacity_;
    }

    /// Indices of a uniform batch drawn without replacement.
    std::vector<std::size_t> sample(std::size_t batch, Philox& rng) const {
        if (batch > data_.size()) throw std::invalid_argument("ReplayBuffer::sample: batch larger than buffer");
        std::vector<std::size_t> idx;
        idx.reserve(batch);
        // Floyd's algorithm: distinct indices in O(batch) draws
        for (std::size_t j = data_.size() - batch; j < data_.size(); ++j) {
            const std::size_t t = rng.below(j + 1);
            idx.push_back(std::find(idx.begin(), idx.end(), t) == idx.end() ? t : j);
        }
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

struct Batch {
    Eigen::MatrixXd states;       // 3 x B
    Eigen::RowVectorXd actions;   // 1 x B
    Eigen::RowVectorXd rewards;
    Eigen::MatrixXd next_states;  // 3 x B
    Eigen::RowVectorXd not_done;
};

inline Batch gather(const ReplayBuffer& buf, const std::vector<std::size_t>& idx) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Batch b{Eigen::MatrixXd(3, n), Eigen::RowVectorXd(n), Eigen::RowVectorXd(n), Eigen::MatrixXd(3, n),
            Eigen::RowVectorXd(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& t = buf[idx[static_cast<std::size_t>(k)]];
        for (int d = 0; d < 3; ++d) {
            b.states(d, k) = t.state[d];
            b.next_states(d, k) = t.next_state[d];
        }
        b.actions(k) = t.action;
        b.rewards(k) = t.reward;
        b.not_done(k) = t.done ? 0.0 : 1.0;
    }
    return b;
}

struct Networks {
    MLP actor, critic, target_actor, target_critic;
};

inline Networks make_networks(const AgentConfig& cfg, Philox& rng) {
    Networks n;
    n.actor = make_mlp(3, cfg.actor_arch, 1, Head::neg_sigmoid, rng, 1e-3);
    n.critic = make_mlp(4, cfg.critic_arch, 1, Head::linear, rng);
    n.target_actor = n.actor;
    n.target_critic = n.critic;
    return n;
}

inline Eigen::MatrixXd stack_state_action(const Eigen::MatrixXd& states, const Eigen::RowVectorXd& actions) {
    Eigen::MatrixXd x(4, states.cols());
    x.topRows(3) = states;
    x.row(3) = actions;
    return x;
}

/// One regression step of the critic toward y = R + gamma * Q'(S', pi'(S')); returns the loss before the step.
inline double critic_update(const Batch& b, Networks& nets, Optimizer& opt, double gamma) {
    const Eigen::RowVectorXd next_a = mlp_forward(nets.target_actor, b.next_states);
    const Eigen::RowVectorXd next_q = mlp_forward(nets.target_critic, stack_state_action(b.next_states, next_a));
    const Eigen::RowVectorXd y = b.rewards + gamma * next_q.cwiseProduct(b.not_done);
    ForwardCache cache;
    const Eigen::RowVectorXd q = mlp_forward(nets.critic, stack_state_action(b.states, b.actions), &cache);
    const Eigen::RowVectorXd diff = q - y;
    const double n = static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() / n;
    opt.step(nets.critic, backprop(nets.critic, cache, (2.0 / n) * diff));
    return loss;
}

/// One ascent step of mean Q(s, pi(s)) in the actor; returns the objective before the step.
inline double actor_update(const Batch& b, Networks& nets, Optimizer& opt) {
    ForwardCache actor_cache, critic_cache;
    const Eigen::RowVectorXd a = mlp_forward(nets.actor, b.states, &actor_cache);
    const Eigen::RowVectorXd q = mlp_forward(nets.critic, stack_state_action(b.states, a), &critic_cache);
    const double n = static_cast<double>(q.size());
    const Gradients through_critic =
        backprop(nets.critic, critic_cache, Eigen::RowVectorXd::Constant(q.size(), 1.0 / n));
    // descend on -Q
    const Eigen::MatrixXd upstream = -through_critic.input.row(3);
    opt.step(nets.actor, backprop(nets.actor, actor_cache, upstream));
    return q.mean();
}

struct TrainedAgent {
    MLP actor;
    double strike = 100.0;
    double maturity = 1.0;
    nlohmann::json provenance;

    /// Actions for a 3 x B matrix of observations.
    Eigen::RowVectorXd act(const Eigen::MatrixXd& observations) const {
        Eigen::RowVectorXd a = mlp_forward(actor, observations);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            if (!(a(i) >= -1.0 && a(i) <= 0.0)) throw std::logic_error("TrainedAgent: action outside [-1, 0]");
        return a;
    }
    double act(const Observation& o) const {
        Eigen::MatrixXd x(3, 1);
        x << o[0], o[1], o[2];
        return act(x)(0);
    }
};

inline nlohmann::json to_json(const TrainedAgent& a) {
    return {{"actor", to_json(a.actor)}, {"strike", a.strike}, {"maturity", a.maturity}, {"provenance", a.provenance}};
}

inline TrainedAgent agent_from_json(const nlohmann::json& j) {
    TrainedAgent a;
    a.actor = mlp_from_json(j.at("actor"));
    if (a.actor.input_width() != 3 || a.actor.output_width() != 1 || a.actor.head != Head::neg_sigmoid)
        throw std::runtime_error("agent json: actor must map 3 inputs to one -sigmoid output");
    a.strike = j.at("strike");
    a.maturity = j.at("maturity");
    a.provenance = j.value("provenance", nlohmann::json::object());
    return a;
}

struct TrainLogRow {
    int episode;
    double episode_return;
    double critic_loss;
    double actor_objective;
    double noise_sigma;
};

inline void write_training_log(std::ostream& os, const std::vector<TrainLogRow>& log) {
    os << "episode,return,critic_loss,actor_objective,noise_sigma\n";
    os.precision(10);
    for (const auto& r : log)
        os << r.episode << ',' << r.episode_return << ',' << r.critic_loss << ',' << r.actor_objective << ','
           << r.noise_sigma << '\n';
}

struct TrainResult {
    TrainedAgent agent;
    std::vector<TrainLogRow> log;
    bool diverged = false;
    std::string divergence_report;
};

/// Supplies the price (and vol) path for a given episode index.
using PathSampler = std::function<EpisodePath(std::uint64_t episode)>;

inline PathSampler gbm_sampler(const GBMParams& params, int steps, double horizon, std::uint64_t seed) {
    params.validate();
    const double dt = horizon / steps;
    return [=](std::uint64_t episode) {
        EpisodePath p;
        p.prices.resize(static_cast<std::size_t>(steps) + 1);
        gbm_path(params, dt, seed, episode, p.prices);
        return p;
    };
}

inline PathSampler sabr_sampler(const SABRParams& params, int steps, double horizon, std::uint64_t seed) {
    params.validate();
    const double dt = horizon / steps;
    return [=](std::uint64_t episode) {
        EpisodePath p;
        p.prices.resize(static_cast<std::size_t>(steps) + 1);
        p.vols.resize(p.prices.size());
        sabr_path(params, dt, seed, episode, p.prices, p.vols);
        return p;
    };
}

inline double noise_at(const AgentConfig& cfg, int episode) {
    if (cfg.episodes == 1) return cfg.noise_start;
    const double w = static_cast<double>(episode) / (cfg.episodes - 1);
    return cfg.noise_start + (cfg.noise_end - cfg.noise_start) * w;
}

/// Full training run; deterministic given (cfg, sampler). Updates happen once per environment step.
inline TrainResult train(const EpisodeConfig& env_cfg, const AgentConfig& cfg, const PathSampler& sampler,
                         const nlohmann::json& data_descriptor = nlohmann::json::object()) {
    cfg.validate();
    if (env_cfg.steps != cfg.steps_per_episode)
        throw std::invalid_argument("train: environment and agent disagree on steps per episode");
    Philox init_rng(mix_seed(cfg.seed, 0), 0);
    Philox noise_rng(mix_seed(cfg.seed, 1), 0);
    Philox replay_rng(mix_seed(cfg.seed, 2), 0);
    Networks nets = make_networks(cfg, init_rng);
    auto actor_opt = make_optimizer(cfg.optimizer, cfg.actor_lr);
    auto critic_opt = make_optimizer(cfg.optimizer, cfg.critic_lr);
    ReplayBuffer buffer(cfg.buffer_capacity);
    HedgeEnv env(env_cfg);
    const OptionSpec& spec = env_cfg.pricer->spec();

    TrainResult out;
    out.log.reserve(static_cast<std::size_t>(cfg.episodes));
    for (int ep = 0; ep < cfg.episodes && !out.diverged; ++ep) {
        const double sigma = noise_at(cfg, ep);
        HedgeState st = env.reset(sampler(static_cast<std::uint64_t>(ep)));
        double ret = 0.0, loss_sum = 0.0, obj_sum = 0.0;
        int updates = 0;
        while (!env.done()) {
            const Observation obs = observe(st, spec);
            Eigen::MatrixXd x(3, 1);
            x << obs[0], obs[1], obs[2];
            const double greedy = mlp_forward(nets.actor, x)(0);
            const double action = std::clamp(greedy + sigma * noise_rng.normal(), -1.0, 0.0);
            const StepResult res = env.step(action);
            buffer.push({obs, action, res.reward, observe(res.next, spec), res.done});
            ret += res.reward;
            st = res.next;
            if (buffer.size() >= std::max(cfg.warmup, cfg.batch_size)) {
                const Batch b = gather(buffer, buffer.sample(cfg.batch_size, replay_rng));
                const double loss = critic_update(b, nets, *critic_opt, cfg.gamma);
                const double obj = actor_update(b, nets, *actor_opt);
                soft_update(nets.target_actor, nets.actor, cfg.soft_tau);
                soft_update(nets.target_critic, nets.critic, cfg.soft_tau);
                loss_sum += loss;
                obj_sum += obj;
                ++updates;
                if (!std::isfinite(loss) || !std::isfinite(obj) || !nets.actor.finite() || !nets.critic.finite()) {
                    std::ostringstream msg;
                    msg << "non-finite training state at episode " << ep << " (critic loss " << loss
                        << ", actor objective " << obj << ")";
                    out.diverged = true;
                    out.divergence_report = msg.str();
                    break;
                }
            }
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out.log.push_back({ep, ret, updates ? loss_sum / updates : nan, updates ? obj_sum / updates : nan, sigma});
    }

    out.agent.actor = std::move(nets.actor);
    out.agent.strike = spec.strike;
    out.agent.maturity = spec.maturity;
    out.agent.provenance = {{"config", to_json(cfg)},
                            {"reward", {{"penalty", to_string(env_cfg.reward.kind)},
                                        {"multiplier", env_cfg.reward.multiplier}}},
                            {"data", data_descriptor},
                            {"diverged", out.diverged}};
    if (out.diverged) out.agent.provenance["divergence_report"] = out.divergence_report;
    return out;
}

}  // namespace hedgelab
