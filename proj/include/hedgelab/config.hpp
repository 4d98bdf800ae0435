#pragma once

// Run configuration: INI file with one section per module, "section.key=value"
// overrides, canonical JSON form and a content hash for provenance.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "hedgelab/chebyshev.hpp"
#include "hedgelab/ddpg.hpp"
#include "hedgelab/hedge_env.hpp"

namespace hedgelab {

inline constexpr const char* kVersion = "hedgelab-1.0.0";

struct MarketConfig {
    std::string model = "gbm";
    double s0 = 100.0;
    double strike = 100.0;
    double maturity = 1.0;
    double mu = 0.05;
    double r = 0.05;
    double sigma = 0.2;
    double sigma0 = 0.2;
    double nu = 0.5;
    double rho = -0.5;

    GBMParams gbm() const { return {s0, mu, sigma, r}; }
    SABRParams sabr() const { return {s0, sigma0, nu, rho, mu, r}; }
    OptionSpec option() const { return {strike, maturity, ExerciseStyle::american}; }
};

struct PricerConfig {
    std::string method = "tree";  // tree | chebyshev
    int tree_steps = 1000;
    ChebSettings cheb;
    std::uint64_t seed = 7;
};

struct TestConfig {
    std::size_t paths = 10000;
    std::vector<int> steps{104};
    std::vector<double> lambdas{0.01, 0.03};
    std::uint64_t seed = 424242;
    bool financing = true;
    bool charge_initial = false;
    bool charge_unwind = false;
    bool early_exercise = true;
};

struct PenaltySetting {
    PenaltyKind kind = PenaltyKind::quadratic;
    double multiplier = 0.005;
};

/// Grid axes; an empty axis keeps the base value.
struct SweepSpec {
    std::vector<double> actor_lr;
    std::vector<double> critic_lr;
    std::vector<int> episodes;
    std::vector<std::vector<int>> actor_arch;
    std::vector<std::vector<int>> critic_arch;
    std::vector<int> train_steps;
    std::vector<PenaltySetting> penalties;
    std::vector<std::uint64_t> seeds{1};
};

struct OutputConfig {
    std::string dir = "results";
    std::string experiment = "run";
};

struct WeeklyConfig {
    std::string paths_file = "data/table_a2_paths.csv";
    std::string strikes_file = "data/table2_strikes.csv";
    std::vector<std::string> symbols{"GE"};
    std::vector<std::string> dates{"2023-10-16", "2023-10-23", "2023-10-30", "2023-11-06", "2023-11-13"};
    std::vector<int> horizons{5, 5, 5, 5, 4};
    std::string expiry = "2023-11-17";
    std::string quotes_dir = "quotes";
    bool synthetic = false;
    double synthetic_sigma0 = 0.3;
    double synthetic_nu = 0.5;
    double synthetic_rho = -0.5;
    double rate = 0.05;
    double guess_sigma0 = 0.3;
    double guess_nu = 0.3;
    double guess_rho = 0.0;
    int calibration_starts = 3;
    int episodes = 5000;
    std::vector<double> lambdas{0.01, 0.03};
};

struct RunConfig {
    MarketConfig market;
    AgentConfig agent;
    RewardConfig reward;
    PricerConfig pricer;
    TestConfig test;
    SweepSpec sweep;
    OutputConfig output;
    WeeklyConfig weekly;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw std::invalid_argument("config " + key + ": '" + v + "' is not a number");
    return x;
}

inline long long to_int(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (x != static_cast<double>(static_cast<long long>(x))) throw std::invalid_argument("config " + key + ": '" + v + "' is not an integer");
    return static_cast<long long>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config " + key + ": '" + v + "' is not a boolean");
}

/// "64,64" -> {64, 64}
inline std::vector<int> to_arch(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& w : split(v, ',')) out.push_back(static_cast<int>(to_int(key, w)));
    if (out.empty()) throw std::invalid_argument("config " + key + ": empty architecture");
    return out;
}

template <class T, class F>
std::vector<T> to_list(const std::string& v, F conv) {
    std::vector<T> out;
    for (const auto& item : split(v, ',')) out.push_back(conv(item));
    return out;
}

/// "quadratic:0.005,linear:0.03"
inline std::vector<PenaltySetting> to_penalties(const std::string& key, const std::string& v) {
    std::vector<PenaltySetting> out;
    for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw std::invalid_argument("config " + key + ": expected kind:multiplier, got '" + item + "'");
        out.push_back({penalty_kind_from(parts[0]), to_double(key, parts[1])});
    }
    return out;
}

/// "64,64;32,32"
inline std::vector<std::vector<int>> to_arch_list(const std::string& key, const std::string& v) {
    std::vector<std::vector<int>> out;
    for (const auto& item : split(v, ';')) out.push_back(to_arch(key, item));
    return out;
}

inline std::string join_arch(const std::vector<int>& a, char sep = ',') {
    std::string s;
    for (std::size_t i = 0; i < a.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(a[i]);
    return s;
}

}  // namespace detail

/// Applies one key to the config; throws on unknown keys or malformed values.
inline void apply_setting(RunConfig& c, const std::string& section, const std::string& key, const std::string& raw) {
    using namespace detail;
    const std::string v = trim(raw);
    const std::string k = section + "." + key;
    auto d = [&] { return to_double(k, v); };
    auto i = [&] { return to_int(k, v); };
    auto b = [&] { return to_bool(k, v); };
    auto dl = [&] { return to_list<double>(v, [&](const std::string& x) { return to_double(k, x); }); };
    auto il = [&] { return to_list<int>(v, [&](const std::string& x) { return static_cast<int>(to_int(k, x)); }); };
    auto sl = [&] { return split(v, ','); };

    auto& m = c.market;
    auto& a = c.agent;
    auto& p = c.pricer;
    auto& t = c.test;
    auto& s = c.sweep;
    auto& w = c.weekly;
    if (k == "market.model") {
        if (v != "gbm" && v != "sabr") throw std::invalid_argument("config market.model: expected gbm or sabr");
        m.model = v;
    } else if (k == "market.s0") m.s0 = d();
    else if (k == "market.strike") m.strike = d();
    else if (k == "market.maturity") m.maturity = d();
    else if (k == "market.mu") m.mu = d();
    else if (k == "market.r") m.r = d();
    else if (k == "market.sigma") m.sigma = d();
    else if (k == "market.sigma0") m.sigma0 = d();
    else if (k == "market.nu") m.nu = d();
    else if (k == "market.rho") m.rho = d();
    else if (k == "agent.actor_lr") a.actor_lr = d();
    else if (k == "agent.critic_lr") a.critic_lr = d();
    else if (k == "agent.episodes") a.episodes = static_cast<int>(i());
    else if (k == "agent.steps") a.steps_per_episode = static_cast<int>(i());
    else if (k == "agent.actor_arch") a.actor_arch = to_arch(k, v);
    else if (k == "agent.critic_arch") a.critic_arch = to_arch(k, v);
    else if (k == "agent.gamma") a.gamma = d();
    else if (k == "agent.soft_tau") a.soft_tau = d();
    else if (k == "agent.buffer") a.buffer_capacity = static_cast<std::size_t>(i());
    else if (k == "agent.batch") a.batch_size = static_cast<std::size_t>(i());
    else if (k == "agent.warmup") a.warmup = static_cast<std::size_t>(i());
    else if (k == "agent.noise_start") a.noise_start = d();
    else if (k == "agent.noise_end") a.noise_end = d();
    else if (k == "agent.optimizer") a.optimizer = optimizer_kind_from(v);
    else if (k == "agent.seed") a.seed = static_cast<std::uint64_t>(i());
    else if (k == "reward.penalty") c.reward.kind = penalty_kind_from(v);
    else if (k == "reward.multiplier") c.reward.multiplier = d();
    else if (k == "pricer.method") {
        if (v != "tree" && v != "chebyshev") throw std::invalid_argument("config pricer.method: expected tree or chebyshev");
        p.method = v;
    } else if (k == "pricer.tree_steps") p.tree_steps = static_cast<int>(i());
    else if (k == "pricer.price_degree") p.cheb.price_degree = static_cast<int>(i());
    else if (k == "pricer.vol_degree") p.cheb.vol_degree = static_cast<int>(i());
    else if (k == "pricer.time_steps") p.cheb.time_steps = static_cast<int>(i());
    else if (k == "pricer.mc_per_node") p.cheb.mc_per_node = static_cast<int>(i());
    else if (k == "pricer.seed") p.seed = static_cast<std::uint64_t>(i());
    else if (k == "test.paths") t.paths = static_cast<std::size_t>(i());
    else if (k == "test.steps") t.steps = il();
    else if (k == "test.lambdas") t.lambdas = dl();
    else if (k == "test.seed") t.seed = static_cast<std::uint64_t>(i());
    else if (k == "test.financing") t.financing = b();
    else if (k == "test.charge_initial") t.charge_initial = b();
    else if (k == "test.charge_unwind") t.charge_unwind = b();
    else if (k == "test.early_exercise") t.early_exercise = b();
    else if (k == "sweep.actor_lr") s.actor_lr = dl();
    else if (k == "sweep.critic_lr") s.critic_lr = dl();
    else if (k == "sweep.episodes") s.episodes = il();
    else if (k == "sweep.actor_arch") s.actor_arch = to_arch_list(k, v);
    else if (k == "sweep.critic_arch") s.critic_arch = to_arch_list(k, v);
    else if (k == "sweep.train_steps") s.train_steps = il();
    else if (k == "sweep.penalties") s.penalties = to_penalties(k, v);
    else if (k == "sweep.seeds") {
        s.seeds.clear();
        for (int x : il()) s.seeds.push_back(static_cast<std::uint64_t>(x));
    } else if (k == "output.dir") c.output.dir = v;
    else if (k == "output.experiment") c.output.experiment = v;
    else if (k == "weekly.paths_file") w.paths_file = v;
    else if (k == "weekly.strikes_file") w.strikes_file = v;
    else if (k == "weekly.symbols") w.symbols = sl();
    else if (k == "weekly.dates") w.dates = sl();
    else if (k == "weekly.horizons") w.horizons = il();
    else if (k == "weekly.expiry") w.expiry = v;
    else if (k == "weekly.quotes_dir") w.quotes_dir = v;
    else if (k == "weekly.synthetic") w.synthetic = b();
    else if (k == "weekly.synthetic_sigma0") w.synthetic_sigma0 = d();
    else if (k == "weekly.synthetic_nu") w.synthetic_nu = d();
    else if (k == "weekly.synthetic_rho") w.synthetic_rho = d();
    else if (k == "weekly.rate") w.rate = d();
    else if (k == "weekly.guess_sigma0") w.guess_sigma0 = d();
    else if (k == "weekly.guess_nu") w.guess_nu = d();
    else if (k == "weekly.guess_rho") w.guess_rho = d();
    else if (k == "weekly.calibration_starts") w.calibration_starts = static_cast<int>(i());
    else if (k == "weekly.episodes") w.episodes = static_cast<int>(i());
    else if (k == "weekly.lambdas") w.lambdas = dl();
    else throw std::invalid_argument("config: unknown key '" + k + "'");
}

/// "section.key=value"
inline void apply_override(RunConfig& c, const std::string& text) {
    const auto eq = text.find('=');
    const auto dot = text.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw std::invalid_argument("override '" + text + "': expected section.key=value");
    apply_setting(c, detail::trim(text.substr(0, dot)), detail::trim(text.substr(dot + 1, eq - dot - 1)),
                  text.substr(eq + 1));
}

inline void validate(const RunConfig& c) {
    if (c.market.model == "gbm") c.market.gbm().validate();
    else c.market.sabr().validate();
    c.market.option().validate();
    c.agent.validate();
    c.reward.validate();
    if (c.market.model == "sabr" && c.pricer.method == "tree")
        throw std::invalid_argument("config: the tree pricer supports gbm only");
    if (c.test.paths < 2) throw std::invalid_argument("config test.paths: need at least two paths");
    if (c.test.steps.empty()) throw std::invalid_argument("config test.steps: empty");
    for (int n : c.test.steps)
        if (n < 1) throw std::invalid_argument("config test.steps: must be >= 1");
    for (double l : c.test.lambdas)
        if (!(l >= 0.0)) throw std::invalid_argument("config test.lambdas: must be non-negative");
    if (c.sweep.seeds.empty()) throw std::invalid_argument("config sweep.seeds: empty");
    if (c.weekly.dates.size() != c.weekly.horizons.size())
        throw std::invalid_argument("config weekly: one horizon per date required");
}

inline RunConfig parse_config(std::istream& is) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    RunConfig c;
    for (const auto& [section, body] : pt) {
        if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) apply_setting(c, section, key, value.data());
    }
    return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    RunConfig c;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config '" + path + "'");
        c = parse_config(in);
    }
    for (const auto& o : overrides) apply_override(c, o);
    validate(c);
    return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    const auto& m = c.market;
    const auto& p = c.pricer;
    const auto& t = c.test;
    const auto& s = c.sweep;
    const auto& w = c.weekly;
    json pen = json::array();
    for (const auto& x : s.penalties) pen.push_back({to_string(x.kind), x.multiplier});
    return {
        {"market", {{"model", m.model}, {"s0", m.s0}, {"strike", m.strike}, {"maturity", m.maturity}, {"mu", m.mu},
                    {"r", m.r}, {"sigma", m.sigma}, {"sigma0", m.sigma0}, {"nu", m.nu}, {"rho", m.rho}}},
        {"agent", to_json(c.agent)},
        {"reward", {{"penalty", to_string(c.reward.kind)}, {"multiplier", c.reward.multiplier}}},
        {"pricer", {{"method", p.method}, {"tree_steps", p.tree_steps}, {"price_degree", p.cheb.price_degree},
                    {"vol_degree", p.cheb.vol_degree}, {"time_steps", p.cheb.time_steps},
                    {"mc_per_node", p.cheb.mc_per_node}, {"seed", p.seed}}},
        {"test", {{"paths", t.paths}, {"steps", t.steps}, {"lambdas", t.lambdas}, {"seed", t.seed},
                  {"financing", t.financing}, {"charge_initial", t.charge_initial},
                  {"charge_unwind", t.charge_unwind}, {"early_exercise", t.early_exercise}}},
        {"sweep", {{"actor_lr", s.actor_lr}, {"critic_lr", s.critic_lr}, {"episodes", s.episodes},
                   {"actor_arch", s.actor_arch}, {"critic_arch", s.critic_arch}, {"train_steps", s.train_steps},
                   {"penalties", pen}, {"seeds", s.seeds}}},
        {"output", {{"dir", c.output.dir}, {"experiment", c.output.experiment}}},
        {"weekly", {{"paths_file", w.paths_file}, {"strikes_file", w.strikes_file}, {"symbols", w.symbols},
                    {"dates", w.dates}, {"horizons", w.horizons}, {"expiry", w.expiry},
                    {"quotes_dir", w.quotes_dir}, {"synthetic", w.synthetic},
                    {"synthetic_params", {w.synthetic_sigma0, w.synthetic_nu, w.synthetic_rho}},
                    {"rate", w.rate}, {"guess", {w.guess_sigma0, w.guess_nu, w.guess_rho}},
                    {"calibration_starts", w.calibration_starts}, {"episodes", w.episodes},
                    {"lambdas", w.lambdas}}},
    };
}

/// 64-bit FNV-1a as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Hash of the canonical (key-sorted) JSON form; output location is excluded.
inline std::string config_hash(const RunConfig& c) {
    nlohmann::json j = to_json(c);
    j.erase("output");
    return fnv1a_hex(j.dump());
}

}  // namespace hedgelab
