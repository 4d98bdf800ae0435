#pragma once

// Small fully connected networks with hand-written reverse mode.
//
// Activations are stored feature-major: a batch is a (features x batch)
// matrix. Hidden layers use ReLU; the head is either linear (critic) or
// -sigmoid (actor, range [-1, 0]).

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hedgelab/rng.hpp"

namespace hedgelab {

enum class Head { linear, neg_sigmoid };

struct DenseLayer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;  // out
};

struct MLP {
    std::vector<DenseLayer> layers;
    Head head = Head::linear;

    Eigen::Index input_width() const { return layers.front().w.cols(); }
    Eigen::Index output_width() const { return layers.back().w.rows(); }
    std::vector<int> widths() const {
        std::vector<int> out{static_cast<int>(input_width())};
        for (const auto& l : layers) out.push_back(static_cast<int>(l.w.rows()));
        return out;
    }
    bool finite() const {
        for (const auto& l : layers)
            if (!l.w.allFinite() || !l.b.allFinite()) return false;
        return true;
    }
    void validate() const {
        if (layers.empty()) throw std::invalid_argument("MLP: no layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].b.size() != layers[i].w.rows()) throw std::invalid_argument("MLP: bias size mismatch");
            if (i > 0 && layers[i].w.cols() != layers[i - 1].w.rows())
                throw std::invalid_argument("MLP: layer widths do not chain");
        }
    }
};

/// Glorot-uniform weights, zero biases; the output layer is scaled by `final_scale`.
inline MLP make_mlp(int inputs, const std::vector<int>& hidden, int outputs, Head head, Philox& rng,
                    double final_scale = 1.0) {
    if (inputs < 1 || outputs < 1) throw std::invalid_argument("make_mlp: widths must be positive");
    MLP net;
    net.head = head;
    std::vector<int> widths{inputs};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(outputs);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        if (widths[i + 1] < 1) throw std::invalid_argument("make_mlp: hidden widths must be positive");
        const double limit = std::sqrt(6.0 / (widths[i] + widths[i + 1]));
        const double scale = i + 2 == widths.size() ? final_scale : 1.0;
        DenseLayer layer{Eigen::MatrixXd(widths[i + 1], widths[i]), Eigen::VectorXd::Zero(widths[i + 1])};
        for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
                layer.w(r, c) = scale * limit * (2.0 * rng.uniform() - 1.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer; inputs[0] is the network input
    Eigen::MatrixXd output;
};

inline Eigen::MatrixXd mlp_forward(const MLP& net, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr) {
    if (x.rows() != net.input_width()) throw std::invalid_argument("mlp_forward: input width mismatch");
    if (cache) cache->inputs.clear();
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (cache) cache->inputs.push_back(a);
        Eigen::MatrixXd z = net.layers[i].w * a;
        z.colwise() += net.layers[i].b;
        if (i + 1 < net.layers.size()) a = z.cwiseMax(0.0);
        else if (net.head == Head::neg_sigmoid) a = -(1.0 / (1.0 + (-z.array()).exp())).matrix();
        else a = std::move(z);
    }
    if (cache) cache->output = a;
    return a;
}

struct Gradients {
    std::vector<DenseLayer> layers;
    Eigen::MatrixXd input;  // d loss / d network input
};

/// Reverse pass. `upstream` is d loss / d output with the output's shape.
inline Gradients backprop(const MLP& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream) {
    if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
        throw std::invalid_argument("backprop: upstream shape mismatch");
    Gradients g;
    g.layers.resize(net.layers.size());
    Eigen::MatrixXd delta;
    if (net.head == Head::neg_sigmoid) {
        // y = -sig(z), dy/dz = -sig(1 - sig) = y (1 + y)
        const auto& y = cache.output.array();
        delta = (upstream.array() * y * (1.0 + y)).matrix();
    } else {
        delta = upstream;
    }
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const auto& in = cache.inputs[i];
        g.layers[i].w = delta * in.transpose();
        g.layers[i].b = delta.rowwise().sum();
        Eigen::MatrixXd back = net.layers[i].w.transpose() * delta;
        if (i > 0) back = (in.array() > 0.0).select(back, 0.0);
        delta = std::move(back);
    }
    g.input = std::move(delta);
    return g;
}

/// target <- (1 - tau) target + tau online.
inline void soft_update(MLP& target, const MLP& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau outside [0, 1]");
    if (target.widths() != online.widths()) throw std::invalid_argument("soft_update: shape mismatch");
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        target.layers[i].w = (1.0 - tau) * target.layers[i].w + tau * online.layers[i].w;
        target.layers[i].b = (1.0 - tau) * target.layers[i].b + tau * online.layers[i].b;
    }
}

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
inline OptimizerKind optimizer_kind_from(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + s + "'");
}

/// Descent step on a network: params <- params - lr * f(grad).
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(MLP& net, const Gradients& g) = 0;
    virtual OptimizerKind kind() const = 0;
};

class SGD final : public Optimizer {
public:
    explicit SGD(double lr) : lr_(lr) {}
    void step(MLP& net, const Gradients& g) override {
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            net.layers[i].w -= lr_ * g.layers[i].w;
            net.layers[i].b -= lr_ * g.layers[i].b;
        }
    }
    OptimizerKind kind() const override { return OptimizerKind::sgd; }

private:
    double lr_;
};

class Adam final : public Optimizer {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(MLP& net, const Gradients& g) override {
        if (m_.empty()) {
            for (const auto& l : net.layers) {
                m_.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});
                v_.push_back(m_.back());
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            update(net.layers[i].w, m_[i].w, v_[i].w, g.layers[i].w, c1, c2);
            update(net.layers[i].b, m_[i].b, v_[i].b, g.layers[i].b, c1, c2);
        }
    }
    OptimizerKind kind() const override { return OptimizerKind::adam; }

private:
    template <class P, class G>
    void update(P& p, P& m, P& v, const G& g, double c1, double c2) const {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
        p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }

    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<DenseLayer> m_, v_;
};

inline std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr) {
    if (kind == OptimizerKind::adam) return std::make_unique<Adam>(lr);
    return std::make_unique<SGD>(lr);
}

inline nlohmann::json to_json(const MLP& net) {
    nlohmann::json j;
    j["head"] = net.head == Head::linear ? "linear" : "neg_sigmoid";
    j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.w.size()));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) w.push_back(l.w(r, c));
        j["layers"].push_back({{"rows", l.w.rows()},
                               {"cols", l.w.cols()},
                               {"weights", w},
                               {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    return j;
}

inline MLP mlp_from_json(const nlohmann::json& j) {
    MLP net;
    net.head = j.at("head").get<std::string>() == "linear" ? Head::linear : Head::neg_sigmoid;
    for (const auto& jl : j.at("layers")) {
        const auto rows = jl.at("rows").get<Eigen::Index>();
        const auto cols = jl.at("cols").get<Eigen::Index>();
        const auto w = jl.at("weights").get<std::vector<double>>();
        const auto b = jl.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
            throw std::runtime_error("mlp json: layer size mismatch");
        DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) layer.w(r, c) = w[static_cast<std::size_t>(r * cols + c)];
            layer.b(r) = b[static_cast<std::size_t>(r)];
        }
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

}  // namespace hedgelab
