#include "diffpurify/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace diffpurify {

Mlp::Mlp(const std::vector<int>& sizes, std::uint64_t init_seed) : sizes_(sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least in/out sizes");
    RngStream rng(init_seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        int fan_in = sizes[l], fan_out = sizes[l + 1];
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : w) v = s * rng.gaussian();
        weights.push_back(std::move(w));
        biases.emplace_back(fan_out, 0.0);
    }
}

void Mlp::forward_cached(const State& x, std::vector<State>& acts) const {
    if (static_cast<int>(x.size()) != in_dim()) throw std::invalid_argument("Mlp: bad input dim");
    acts.clear();
    acts.push_back(x);
    State h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        int fan_in = sizes_[l], fan_out = sizes_[l + 1];
        State z(biases[l]);
        for (int i = 0; i < fan_in; ++i) {
            double hi = h[static_cast<std::size_t>(i)];
            const double* wrow = weights[l].data() + static_cast<std::size_t>(i) * fan_out;
            for (int j = 0; j < fan_out; ++j) z[static_cast<std::size_t>(j)] += hi * wrow[j];
        }
        if (l + 1 < weights.size())
            for (auto& v : z) v = std::tanh(v);
        h = z;
        acts.push_back(h);
    }
}

State Mlp::forward(const State& x) const {
    std::vector<State> acts;
    forward_cached(x, acts);
    return acts.back();
}

State Mlp::input_vjp(const State& x, const State& out_cotangent) const {
    std::vector<State> acts;
    forward_cached(x, acts);
    State d = out_cotangent;
    for (std::size_t l = weights.size(); l-- > 0;) {
        int fan_in = sizes_[l], fan_out = sizes_[l + 1];
        State dprev(static_cast<std::size_t>(fan_in), 0.0);
        for (int i = 0; i < fan_in; ++i) {
            const double* wrow = weights[l].data() + static_cast<std::size_t>(i) * fan_out;
            double s = 0.0;
            for (int j = 0; j < fan_out; ++j) s += wrow[j] * d[static_cast<std::size_t>(j)];
            dprev[static_cast<std::size_t>(i)] = s;
        }
        if (l > 0) {
            const State& a = acts[l];  // tanh outputs of layer l-1..: acts[l] is post-activation
            for (int i = 0; i < fan_in; ++i)
                dprev[static_cast<std::size_t>(i)] *= 1.0 - a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
        }
        d = std::move(dprev);
    }
    return d;
}

Mlp::Grads Mlp::zero_grads() const {
    Grads g;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        g.w.emplace_back(weights[l].size(), 0.0);
        g.b.emplace_back(biases[l].size(), 0.0);
    }
    return g;
}

State Mlp::backprop(const State& x, const State& out_cotangent, Grads& grads) const {
    std::vector<State> acts;
    forward_cached(x, acts);
    State d = out_cotangent;
    for (std::size_t l = weights.size(); l-- > 0;) {
        int fan_in = sizes_[l], fan_out = sizes_[l + 1];
        const State& a_in = acts[l];
        for (int i = 0; i < fan_in; ++i) {
            double ai = a_in[static_cast<std::size_t>(i)];
            double* grow = grads.w[l].data() + static_cast<std::size_t>(i) * fan_out;
            for (int j = 0; j < fan_out; ++j) grow[j] += ai * d[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < fan_out; ++j) grads.b[l][static_cast<std::size_t>(j)] += d[static_cast<std::size_t>(j)];
        if (l == 0) break;
        State dprev(static_cast<std::size_t>(fan_in), 0.0);
        for (int i = 0; i < fan_in; ++i) {
            const double* wrow = weights[l].data() + static_cast<std::size_t>(i) * fan_out;
            double s = 0.0;
            for (int j = 0; j < fan_out; ++j) s += wrow[j] * d[static_cast<std::size_t>(j)];
            double ai = a_in[static_cast<std::size_t>(i)];
            dprev[static_cast<std::size_t>(i)] = s * (1.0 - ai * ai);
        }
        d = std::move(dprev);
    }
    return acts.back();
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> Mlp::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].begin(), weights[l].end());
        flat.insert(flat.end(), biases[l].begin(), biases[l].end());
    }
    return flat;
}

void Mlp::unflatten(const std::vector<double>& flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("Mlp: bad parameter vector");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (auto& v : weights[l]) v = flat[k++];
        for (auto& v : biases[l]) v = flat[k++];
    }
}

AdamOptimizer::AdamOptimizer(std::size_t dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim, 0.0), v_(dim, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("AdamOptimizer: dimension mismatch");
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

}  // namespace diffpurify
