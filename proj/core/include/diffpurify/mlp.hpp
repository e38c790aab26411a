#ifndef DIFFPURIFY_MLP_HPP
#define DIFFPURIFY_MLP_HPP

#include <cstdint>
#include <vector>

#include "diffpurify/state.hpp"

namespace diffpurify {

// Small dense tanh network with manual reverse-mode passes. Hidden layers use
// tanh (smooth, so input Jacobians exist everywhere); the output is linear.
class Mlp {
public:
    Mlp() = default;
    // sizes = {in, hidden..., out}
    Mlp(const std::vector<int>& sizes, std::uint64_t init_seed);

    const std::vector<int>& sizes() const { return sizes_; }
    int in_dim() const { return sizes_.front(); }
    int out_dim() const { return sizes_.back(); }

    State forward(const State& x) const;

    // Reverse pass from an output cotangent to the input cotangent.
    State input_vjp(const State& x, const State& out_cotangent) const;

    struct Grads {
        std::vector<std::vector<double>> w;  // per layer, row-major (in x out)
        std::vector<std::vector<double>> b;
    };
    Grads zero_grads() const;

    // Accumulates parameter gradients for one sample; returns the output.
    State backprop(const State& x, const State& out_cotangent, Grads& grads) const;

    std::size_t param_count() const;

    // Flat parameter access, layer-major, weights then biases per layer.
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);

    std::vector<std::vector<double>> weights;  // [layer], row-major in x out
    std::vector<std::vector<double>> biases;   // [layer]

private:
    std::vector<int> sizes_;

    // Forward keeping post-activation values per layer (acts[0] = input).
    void forward_cached(const State& x, std::vector<State>& acts) const;
};

// Adam with standard bias correction; deterministic given call order.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t dim, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace diffpurify

#endif
