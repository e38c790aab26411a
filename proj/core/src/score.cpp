#include "diffpurify/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "diffpurify/tensor_io.hpp"

namespace diffpurify {

namespace {
void check_finite_input(const State& x, const char* where) {
    if (!all_finite(x)) throw std::invalid_argument(std::string(where) + ": non-finite input");
}
}  // namespace

GmmScoreModel::GmmScoreModel(std::vector<GmmComponent> components, const NoiseSchedule& schedule)
    : components_(std::move(components)), schedule_(schedule) {
    if (components_.empty()) throw std::invalid_argument("GmmScoreModel: no components");
    double wsum = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != components_[0].mean.size() || c.cov_diag.size() != c.mean.size())
            throw std::invalid_argument("GmmScoreModel: inconsistent dimensions");
        for (double v : c.cov_diag)
            if (!(v > 0.0)) throw std::invalid_argument("GmmScoreModel: covariance must be positive");
        if (!(c.weight > 0.0)) throw std::invalid_argument("GmmScoreModel: weights must be positive");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("GmmScoreModel: weights must sum to 1");

    marginals_.resize(static_cast<std::size_t>(schedule_.T) + 1);
    for (int t = 0; t <= schedule_.T; ++t) {
        double s = schedule_.at(t);
        double rs = std::sqrt(s);
        Marginal& m = marginals_[static_cast<std::size_t>(t)];
        for (const auto& c : components_) {
            State mean(c.mean.size()), inv_var(c.mean.size());
            double log_norm = std::log(c.weight);
            for (std::size_t i = 0; i < c.mean.size(); ++i) {
                mean[i] = rs * c.mean[i];
                double var = s * c.cov_diag[i] + (1.0 - s);
                inv_var[i] = 1.0 / var;
                log_norm -= 0.5 * std::log(2.0 * M_PI * var);
            }
            m.means.push_back(std::move(mean));
            m.inv_vars.push_back(std::move(inv_var));
            m.log_norm.push_back(log_norm);
        }
    }
}

const GmmScoreModel::Marginal& GmmScoreModel::marginal_at(int t) const {
    if (t < 0 || t > schedule_.T) throw std::out_of_range("gmm: t out of range");
    return marginals_[static_cast<std::size_t>(t)];
}

void GmmScoreModel::log_weights(const Marginal& m, const State& x, std::vector<double>& logs) const {
    logs.resize(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double* mean = m.means[k].data();
        const double* iv = m.inv_vars[k].data();
        double q = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = x[i] - mean[i];
            q += d * d * iv[i];
        }
        logs[k] = m.log_norm[k] - 0.5 * q;
    }
}

double GmmScoreModel::log_density(const State& x, int t) const {
    check_finite_input(x, "gmm log_density");
    const auto& m = marginal_at(t);
    std::vector<double> logs;
    log_weights(m, x, logs);
    double best = *std::max_element(logs.begin(), logs.end());
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - best);
    return best + std::log(acc);
}

std::vector<double> GmmScoreModel::responsibilities(const State& x, int t) const {
    const auto& m = marginal_at(t);
    std::vector<double> logs;
    log_weights(m, x, logs);
    double best = *std::max_element(logs.begin(), logs.end());
    double acc = 0.0;
    for (auto& l : logs) {
        l = std::exp(l - best);
        acc += l;
    }
    for (auto& l : logs) l /= acc;
    return logs;
}

State GmmScoreModel::score(const State& x, int t) const {
    check_finite_input(x, "gmm_score");
    if (x.size() != dim()) throw std::invalid_argument("gmm_score: dimension mismatch");
    const auto& m = marginal_at(t);
    auto r = responsibilities(x, t);
    State out(x.size(), 0.0);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        if (r[k] == 0.0) continue;
        const double* mean = m.means[k].data();
        const double* iv = m.inv_vars[k].data();
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] -= r[k] * (x[i] - mean[i]) * iv[i];
    }
    return out;
}

State GmmScoreModel::score_vjp(const State& x, int t, const State& v) const {
    check_finite_input(x, "gmm score_vjp");
    check_same_dim(x, v, "gmm score_vjp");
    const auto& m = marginal_at(t);
    auto r = responsibilities(x, t);

    // J = sum_k r_k [ -diag(1/var_k) + (g_k - s)(g_k - s)^T ] with
    // g_k = -(x - mean_k)/var_k and s the mixture score. The centered form
    // keeps every factor bounded by mean separations, so far-field inputs do
    // not suffer catastrophic cancellation. J is symmetric, so v^T J = J v.
    std::vector<State> g(components_.size());
    State s(x.size(), 0.0);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        g[k].resize(x.size());
        const double* mean = m.means[k].data();
        const double* iv = m.inv_vars[k].data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            g[k][i] = -(x[i] - mean[i]) * iv[i];
            s[i] += r[k] * g[k][i];
        }
    }
    State out(x.size(), 0.0);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        if (r[k] == 0.0) continue;
        const double* iv = m.inv_vars[k].data();
        double inner = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            out[i] -= r[k] * v[i] * iv[i];
            inner += (g[k][i] - s[i]) * v[i];
        }
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += r[k] * inner * (g[k][i] - s[i]);
    }
    return out;
}

NetScoreModel::NetScoreModel(std::size_t dim, std::vector<int> hidden, const NoiseSchedule& schedule,
                             std::uint64_t init_seed)
    : dim_(dim), hidden_(std::move(hidden)), schedule_(schedule) {
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(dim) + kTimeFeatures);
    for (int h : hidden_) sizes.push_back(h);
    sizes.push_back(static_cast<int>(dim));
    net_ = Mlp(sizes, init_seed);
}

State NetScoreModel::time_features(int t) const {
    double tau = static_cast<double>(t) / schedule_.T;
    return {tau, std::sin(2.0 * M_PI * tau), std::cos(2.0 * M_PI * tau),
            std::sin(4.0 * M_PI * tau), std::cos(4.0 * M_PI * tau)};
}

State NetScoreModel::embed(const State& x, int t) const {
    State in(x);
    State tf = time_features(t);
    in.insert(in.end(), tf.begin(), tf.end());
    return in;
}

State NetScoreModel::score(const State& x, int t) const {
    check_finite_input(x, "net score");
    if (x.size() != dim_) throw std::invalid_argument("net score: dimension mismatch");
    return net_.forward(embed(x, t));
}

State NetScoreModel::score_vjp(const State& x, int t, const State& v) const {
    check_finite_input(x, "net score_vjp");
    check_same_dim(x, v, "net score_vjp");
    State full = net_.input_vjp(embed(x, t), v);
    full.resize(dim_);  // drop the time-feature cotangents
    return full;
}

void NetScoreModel::save(const std::string& path) const {
    TensorBundle b;
    Tensor meta;
    meta.dims = {static_cast<std::uint32_t>(3 + hidden_.size())};
    meta.data = {static_cast<double>(dim_), static_cast<double>(schedule_.T),
                 static_cast<double>(hidden_.size())};
    for (int h : hidden_) meta.data.push_back(static_cast<double>(h));
    b.add("meta", std::move(meta));
    Tensor sig;
    sig.dims = {static_cast<std::uint32_t>(schedule_.sigma.size())};
    sig.data = schedule_.sigma;
    b.add("sigma", std::move(sig));
    Tensor params;
    auto flat = net_.flatten();
    params.dims = {static_cast<std::uint32_t>(flat.size())};
    params.data = std::move(flat);
    b.add("params", std::move(params));
    save_bundle(path, b);
}

NetScoreModel NetScoreModel::load(const std::string& path) {
    TensorBundle b = load_bundle(path);
    const Tensor& meta = b.get("meta");
    std::size_t dim = static_cast<std::size_t>(meta.data.at(0));
    int T = static_cast<int>(meta.data.at(1));
    int nh = static_cast<int>(meta.data.at(2));
    std::vector<int> hidden;
    for (int i = 0; i < nh; ++i) hidden.push_back(static_cast<int>(meta.data.at(3 + i)));
    NoiseSchedule sched;
    sched.T = T;
    sched.sigma = b.get("sigma").data;
    sched.validate();
    NetScoreModel model(dim, hidden, sched, 0);
    model.net_.unflatten(b.get("params").data);
    return model;
}

double denoising_loss(const ScoreModel& model, const NoiseSchedule& schedule,
                      const std::vector<State>& dataset, std::uint64_t seed, int draws_per_sample) {
    if (dataset.empty()) throw std::invalid_argument("denoising_loss: empty dataset");
    RngStream rng(seed);
    double total = 0.0;
    long count = 0;
    for (const auto& x0 : dataset) {
        for (int d = 0; d < draws_per_sample; ++d) {
            int t = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(schedule.T)));
            State eps = rng.gaussian_vec(x0.size());
            State xt = forward_diffuse(schedule, x0, t, eps);
            double s = schedule.at(t);
            double rb = std::sqrt(1.0 - s);
            State sc = model.score(xt, t);
            // (1 - sigma) * || sqrt(1-sigma) * score + eps ||^2 / n; equivalently the
            // sigma-weighted error of the denoised estimate against x0.
            double acc = 0.0;
            for (std::size_t i = 0; i < x0.size(); ++i) {
                double r = rb * sc[i] + eps[i];
                acc += r * r;
            }
            total += (1.0 - s) * acc / static_cast<double>(x0.size());
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

NetScoreModel train_net_score(const std::vector<State>& dataset, const NoiseSchedule& schedule,
                              const ScoreTrainConfig& cfg, ScoreTrainReport* report) {
    if (dataset.empty()) throw std::invalid_argument("train_net_score: empty dataset");
    std::size_t dim = dataset[0].size();
    for (const auto& x : dataset)
        if (x.size() != dim) throw std::invalid_argument("train_net_score: inconsistent dimensions");

    std::size_t held = std::max<std::size_t>(1, dataset.size() / 5);
    std::vector<State> train(dataset.begin(), dataset.end() - static_cast<long>(held));
    std::vector<State> heldout(dataset.end() - static_cast<long>(held), dataset.end());
    if (train.empty()) train = dataset;

    NetScoreModel model(dim, cfg.hidden, schedule, derive_seed(cfg.seed, "score-init"));
    std::uint64_t eval_seed = derive_seed(cfg.seed, "score-eval");
    if (report) {
        report->initial_loss = denoising_loss(model, schedule, heldout, eval_seed);
        report->epochs_run = cfg.epochs;
    }

    RngStream rng(derive_seed(cfg.seed, "score-train"));
    auto params = model.net().flatten();
    AdamOptimizer opt(params.size(), cfg.lr);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            auto grads = model.net().zero_grads();
            double batch_loss = 0.0;
            for (std::size_t b = start; b < stop; ++b) {
                const State& x0 = train[order[b]];
                int t = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(schedule.T)));
                State eps = rng.gaussian_vec(dim);
                State xt = forward_diffuse(schedule, x0, t, eps);
                double s = schedule.at(t);
                double rb = std::sqrt(1.0 - s);
                State in(xt);
                State tf = model.time_features(t);
                in.insert(in.end(), tf.begin(), tf.end());
                State out = model.net().forward(in);
                State cot(dim);
                double w = (1.0 - s) / (static_cast<double>(dim) * static_cast<double>(stop - start));
                for (std::size_t i = 0; i < dim; ++i) {
                    double r = rb * out[i] + eps[i];
                    batch_loss += r * r * w;
                    cot[i] = 2.0 * rb * r * w;
                }
                model.net().backprop(in, cot, grads);
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train_net_score: divergent loss at epoch " +
                                         std::to_string(epoch));
            std::vector<double> flat_grad;
            flat_grad.reserve(params.size());
            for (std::size_t l = 0; l < grads.w.size(); ++l) {
                flat_grad.insert(flat_grad.end(), grads.w[l].begin(), grads.w[l].end());
                flat_grad.insert(flat_grad.end(), grads.b[l].begin(), grads.b[l].end());
            }
            opt.step(params, flat_grad);
            model.net().unflatten(params);
        }
    }

    if (report) report->final_loss = denoising_loss(model, schedule, heldout, eval_seed);
    return model;
}

}  // namespace diffpurify
