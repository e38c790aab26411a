#ifndef DIFFPURIFY_SCORE_HPP
#define DIFFPURIFY_SCORE_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "diffpurify/mlp.hpp"
#include "diffpurify/schedule.hpp"
#include "diffpurify/state.hpp"

namespace diffpurify {

// Score model interface: s(x, t) ~ grad_x log p(x; t), plus the
// vector-Jacobian product v^T ds/dx needed by guidance gradients.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual std::size_t dim() const = 0;
    virtual State score(const State& x, int t) const = 0;
    virtual State score_vjp(const State& x, int t, const State& v) const = 0;
};

struct GmmComponent {
    double weight = 1.0;
    State mean;
    State cov_diag;  // strictly positive
};

// Analytic Gaussian-mixture score. The time-t marginal pushes each component
// through the forward process: mean sqrt(sigma)*mu, covariance
// sigma*Sigma + (1 - sigma) I, so score and Jacobian are exact.
class GmmScoreModel : public ScoreModel {
public:
    GmmScoreModel(std::vector<GmmComponent> components, const NoiseSchedule& schedule);

    std::size_t dim() const override { return components_[0].mean.size(); }
    State score(const State& x, int t) const override;
    State score_vjp(const State& x, int t, const State& v) const override;

    // log p_t(x) for the diffused mixture; the finite-difference oracle in the
    // tests differentiates this.
    double log_density(const State& x, int t) const;

    const std::vector<GmmComponent>& components() const { return components_; }
    const NoiseSchedule& schedule() const { return schedule_; }

    // Posterior responsibilities at (x, t); used by diagnostics.
    std::vector<double> responsibilities(const State& x, int t) const;

private:
    std::vector<GmmComponent> components_;
    NoiseSchedule schedule_;

    // Per-t marginal tables, precomputed once: the diffused mixture has
    // means sqrt(sigma)*mu_k and diagonal variances sigma*Sigma_k + (1-sigma).
    struct Marginal {
        std::vector<State> means;
        std::vector<State> inv_vars;
        std::vector<double> log_norm;  // log w_k - 0.5 * sum log(2 pi var)
    };
    std::vector<Marginal> marginals_;  // index t = 0..T
    const Marginal& marginal_at(int t) const;

    void log_weights(const Marginal& m, const State& x, std::vector<double>& logs) const;
};

// Trainable score network: input [x, time features], output dim(x). The
// network predicts the score directly; for an eps-model the conversion is
// eps_hat = -sqrt(1 - sigma) * score.
class NetScoreModel : public ScoreModel {
public:
    NetScoreModel(std::size_t dim, std::vector<int> hidden, const NoiseSchedule& schedule,
                  std::uint64_t init_seed);

    std::size_t dim() const override { return dim_; }
    State score(const State& x, int t) const override;
    State score_vjp(const State& x, int t, const State& v) const override;

    const NoiseSchedule& schedule() const { return schedule_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    static constexpr int kTimeFeatures = 5;
    State time_features(int t) const;

    void save(const std::string& path) const;
    static NetScoreModel load(const std::string& path);

private:
    std::size_t dim_;
    std::vector<int> hidden_;
    NoiseSchedule schedule_;
    Mlp net_;

    State embed(const State& x, int t) const;
};

struct ScoreTrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double lr = 1e-3;
    std::vector<int> hidden = {96, 96};
    std::uint64_t seed = 1;
};

struct ScoreTrainReport {
    double initial_loss = 0.0;  // held-out denoising loss before training
    double final_loss = 0.0;
    int epochs_run = 0;
};

// Denoising score matching: for (x0, t, eps) the regression target is
// -eps / sqrt(1 - sigma), weighted by (1 - sigma) so the loss stays bounded.
NetScoreModel train_net_score(const std::vector<State>& dataset, const NoiseSchedule& schedule,
                              const ScoreTrainConfig& cfg, ScoreTrainReport* report = nullptr);

// Held-out weighted denoising loss of a model on a dataset (fixed draws).
double denoising_loss(const ScoreModel& model, const NoiseSchedule& schedule,
                      const std::vector<State>& dataset, std::uint64_t seed, int draws_per_sample = 4);

}  // namespace diffpurify

#endif
